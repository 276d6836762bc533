/** Application bootstrap: wires the coordinator API, view state, and the
 * six panels together, polling task state every two seconds.
 *
 * URL parameters: ?coordinator=http://host:port&participant=ID
 */

import { CoordinatorApi } from "./api.js";
import { decodeRaster } from "./raster.js";
import { attributeRows, contributionCounts } from "./selection.js";
import { ViewState } from "./state.js";
import type { ArtifactRecord, GridCell, TaskRecord } from "./types.js";
import { renderContributionBars } from "./render/bars.js";
import { el } from "./render/common.js";
import { renderDensity } from "./render/density.js";
import { renderParallelCoordinates } from "./render/parcoords.js";
import { renderScatter } from "./render/scatter.js";
import { renderMyTask, renderTaskDescription, renderTaskList } from "./render/tasks.js";

const POLL_INTERVAL_MS = 2000;

function panel(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing panel #${id}`);
  }
  return node;
}

export class App {
  private readonly api: CoordinatorApi;
  private readonly state: ViewState;
  private tasks: TaskRecord[] = [];
  private selectedCells: GridCell[] = [];

  constructor(coordinatorUrl: string, viewer: string) {
    this.api = new CoordinatorApi(coordinatorUrl, viewer);
    this.state = new ViewState(viewer);
    this.state.onChange(() => this.renderViews());
  }

  async start(): Promise<void> {
    await this.refreshTasks();
    setInterval(() => void this.refreshTasks(), POLL_INTERVAL_MS);
  }

  private async refreshTasks(): Promise<void> {
    try {
      this.tasks = await this.api.listTasks();
      this.clearBanner();
    } catch (err) {
      this.showBanner(`coordinator unreachable: ${String(err)}`);
      return;
    }
    this.renderTaskPanels();
    const active = this.tasks.find((t) => t.task_id === this.state.activeTaskId);
    if (active && active.state === "Complete" && this.state.artifact === null) {
      await this.fetchArtifact(active.task_id);
    }
  }

  private async fetchArtifact(taskId: string): Promise<void> {
    try {
      const artifact = await this.api.artifact(taskId);
      this.state.setArtifact(artifact);
    } catch (err) {
      this.showBanner(`artifact fetch failed: ${String(err)}`);
    }
  }

  private renderTaskPanels(): void {
    renderTaskList(panel("task-list"), this.tasks, this.api.viewer,
                   this.state.activeTaskId, {
        onSelect: (taskId) => {
          this.state.setActiveTask(taskId);
          this.renderTaskPanels();
        },
        onJoin: (taskId) => void this.joinTask(taskId),
      });
    const active = this.tasks.find((t) => t.task_id === this.state.activeTaskId) ?? null;
    renderTaskDescription(panel("task-description"), active);
    renderMyTask(panel("my-task"), active, this.api.viewer);
  }

  private async joinTask(taskId: string): Promise<void> {
    try {
      // the browser client has no frame listener; the participant's
      // runner process owns the data plane and registers endpoints
      await this.api.join(taskId, null);
    } catch (err) {
      this.showBanner(`join failed: ${String(err)}`);
    }
  }

  private renderViews(): void {
    const artifact = this.state.artifact;
    if (!artifact) {
      return;
    }
    this.renderProjection(panel("global-view"), artifact, "all");
    this.renderProjection(panel("individual-view"), artifact,
                          this.state.participantFilter === "all"
                            ? this.api.viewer : this.state.participantFilter);
    this.renderDescriptive(artifact);
    this.renderFilterControls(artifact);
  }

  private renderProjection(target: HTMLElement, artifact: ArtifactRecord,
                           scope: string): void {
    if (artifact.mode === "scatterplot") {
      const points = scope === "all"
        ? artifact.points
        : artifact.points.filter((p) => p.owner_id === scope);
      renderScatter(target, points, artifact.bounds, {
        colorBy: this.state.colorBy,
        onLasso: (polygon) => this.state.setSelection({ kind: "lasso", polygon }),
      });
    } else {
      const blob = artifact.rasters[scope] ?? artifact.rasters["all"];
      if (!blob) {
        return;
      }
      renderDensity(target, decodeRaster(blob), artifact.grid_counts, {
        selected: this.selectedCells,
        onToggleCell: (cell) => this.toggleCell(cell),
      });
    }
  }

  private toggleCell(cell: GridCell): void {
    const key = (c: GridCell) => `${c.iy}:${c.ix}`;
    const existing = this.selectedCells.findIndex((c) => key(c) === key(cell));
    if (existing >= 0) {
      this.selectedCells.splice(existing, 1);
    } else {
      this.selectedCells.push(cell);
    }
    this.state.setSelection(this.selectedCells.length
      ? { kind: "cells", cells: [...this.selectedCells] } : null);
  }

  private renderDescriptive(artifact: ArtifactRecord): void {
    const selection = this.state.selection;
    renderContributionBars(panel("contribution-bars"),
                           contributionCounts(artifact, selection));
    renderParallelCoordinates(panel("attribute-view"),
                              attributeRows(artifact, selection),
                              artifact.attribute_columns ?? []);
  }

  private renderFilterControls(artifact: ArtifactRecord): void {
    const target = panel("view-controls");
    target.textContent = "";
    const owners = ["all", ...Object.keys(artifact.owner_counts).sort()];
    const select = el("select");
    for (const owner of owners) {
      const option = el("option", undefined, owner);
      option.setAttribute("value", owner);
      if (owner === this.state.participantFilter) {
        option.setAttribute("selected", "selected");
      }
      select.appendChild(option);
    }
    select.addEventListener("change", () => {
      this.state.setParticipantFilter(select.value as string | "all");
    });
    target.appendChild(el("span", undefined, "individual view: "));
    target.appendChild(select);
    if (artifact.mode === "scatterplot" &&
        artifact.points.some((p) => p.label != null)) {
      const toggle = el("button", undefined,
                        `color: ${this.state.colorBy}`);
      toggle.addEventListener("click", () => {
        this.state.setColorBy(this.state.colorBy === "ownership" ? "class" : "ownership");
      });
      target.appendChild(toggle);
    }
  }

  private showBanner(message: string): void {
    panel("banner").textContent = message;
    panel("banner").classList.add("visible");
  }

  private clearBanner(): void {
    panel("banner").textContent = "";
    panel("banner").classList.remove("visible");
  }
}

export function boot(): void {
  const params = new URLSearchParams(window.location.search);
  const coordinator = params.get("coordinator") ?? "http://127.0.0.1:7600";
  const viewer = params.get("participant") ?? "viewer";
  const app = new App(coordinator, viewer);
  void app.start();
}

if (typeof document !== "undefined" && document.getElementById("task-list")) {
  boot();
}
