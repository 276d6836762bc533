/** Client view state with the mode-gating invariants enforced at the door:
 * lasso selections exist only in scatterplot mode, grid-cell selections
 * only in density mode, and density artifacts must not carry foreign
 * per-point geometry into client state.
 */

import { findForeignPointRecords } from "./privacy.js";
import type { ArtifactRecord, Selection, VisualizationMode } from "./types.js";

export type ColorEncoding = "ownership" | "class";

export class ViewState {
  readonly viewer: string;
  activeTaskId: string | null = null;
  participantFilter: string | "all" = "all";
  mode: VisualizationMode = "scatterplot";
  colorBy: ColorEncoding = "ownership";
  private currentSelection: Selection | null = null;
  private currentArtifact: ArtifactRecord | null = null;
  private listeners: (() => void)[] = [];

  constructor(viewer: string) {
    this.viewer = viewer;
  }

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) {
      listener();
    }
  }

  get selection(): Selection | null {
    return this.currentSelection;
  }

  get artifact(): ArtifactRecord | null {
    return this.currentArtifact;
  }

  setActiveTask(taskId: string | null): void {
    if (taskId !== this.activeTaskId) {
      this.activeTaskId = taskId;
      this.currentArtifact = null;
      this.currentSelection = null;
      this.notify();
    }
  }

  setArtifact(artifact: ArtifactRecord): void {
    if (artifact.mode === "density") {
      const leaks = findForeignPointRecords(artifact, this.viewer);
      if (leaks.length > 0) {
        throw new Error(
          `refusing density artifact with foreign per-point geometry (${leaks[0].path})`,
        );
      }
    }
    this.currentArtifact = artifact;
    this.mode = artifact.mode;
    this.currentSelection = null;
    this.colorBy = artifact.points.some((p) => p.label != null) ? this.colorBy : "ownership";
    this.notify();
  }

  setSelection(selection: Selection | null): void {
    if (selection !== null) {
      if (selection.kind === "lasso" && this.mode !== "scatterplot") {
        throw new Error("lasso selection is only available in scatterplot mode");
      }
      if (selection.kind === "cells" && this.mode !== "density") {
        throw new Error("grid-cell selection is only available in density mode");
      }
    }
    this.currentSelection = selection;
    this.notify();
  }

  setParticipantFilter(owner: string | "all"): void {
    this.participantFilter = owner;
    this.notify();
  }

  setColorBy(encoding: ColorEncoding): void {
    this.colorBy = encoding;
    this.notify();
  }

  /** Points for the individual view: one participant's share of the layout. */
  filteredPoints(): ArtifactRecord["points"] {
    if (this.currentArtifact === null) {
      return [];
    }
    if (this.participantFilter === "all") {
      return this.currentArtifact.points;
    }
    return this.currentArtifact.points.filter(
      (p) => p.owner_id === this.participantFilter,
    );
  }
}
