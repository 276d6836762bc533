/** Descriptive-view data derived from the current selection.
 *
 * Contribution counts cover every participant's points (ownership is
 * shared knowledge); attribute rows come only from the viewer's own
 * uploaded data, which is the only raw data the client ever holds.
 */

import { countsForCells, lassoSelect } from "./geometry.js";
import type { ArtifactRecord, EmbeddedPointRecord, Selection } from "./types.js";

export interface AttributeRow {
  pointId: number;
  values: number[];
}

export function contributionCounts(
  artifact: ArtifactRecord,
  selection: Selection | null,
): Record<string, number> {
  if (selection === null) {
    return {};
  }
  if (selection.kind === "cells") {
    return countsForCells(artifact.grid_counts, selection.cells);
  }
  const chosen = lassoSelect(artifact.points, selection.polygon);
  const counts: Record<string, number> = {};
  for (const point of chosen) {
    counts[point.owner_id] = (counts[point.owner_id] ?? 0) + 1;
  }
  return counts;
}

/** Raw attribute polylines for the viewer's own selected points only. */
export function attributeRows(
  artifact: ArtifactRecord,
  selection: Selection | null,
): AttributeRow[] {
  if (selection === null || !artifact.attributes) {
    return [];
  }
  let ownSelected: EmbeddedPointRecord[];
  if (selection.kind === "lasso") {
    ownSelected = lassoSelect(artifact.points, selection.polygon);
  } else {
    // density mode ships own points only; match them to selected cells
    const cellKeys = new Set(selection.cells.map((c) => `${c.iy}:${c.ix}`));
    const { bounds, resolution } = artifact.grid_counts;
    const [xmin, xmax, ymin, ymax] = bounds;
    ownSelected = artifact.points.filter((p) => {
      const ix = Math.min(Math.floor(((p.x - xmin) / (xmax - xmin)) * resolution), resolution - 1);
      const iy = Math.min(Math.floor(((p.y - ymin) / (ymax - ymin)) * resolution), resolution - 1);
      return cellKeys.has(`${iy}:${ix}`);
    });
  }
  const rows: AttributeRow[] = [];
  for (const point of ownSelected) {
    const values = artifact.attributes[String(point.point_id)];
    if (values !== undefined) {
      rows.push({ pointId: point.point_id, values });
    }
  }
  return rows;
}
