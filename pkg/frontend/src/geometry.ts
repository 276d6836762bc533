/** Selection geometry: lasso hit-testing and lattice-cell arithmetic. */

import type { Bounds, EmbeddedPointRecord, GridCell, GridCountsRecord, Polygon } from "./types.js";

/** Ray-casting point-in-polygon test; boundary points count as inside. */
export function pointInPolygon(x: number, y: number, polygon: Polygon): boolean {
  let inside = false;
  const n = polygon.length;
  for (let i = 0, j = n - 1; i < n; j = i++) {
    const [xi, yi] = polygon[i];
    const [xj, yj] = polygon[j];
    if (onSegment(x, y, xi, yi, xj, yj)) {
      return true;
    }
    const crosses = yi > y !== yj > y && x < ((xj - xi) * (y - yi)) / (yj - yi) + xi;
    if (crosses) {
      inside = !inside;
    }
  }
  return inside;
}

function onSegment(
  px: number, py: number,
  ax: number, ay: number,
  bx: number, by: number,
): boolean {
  const cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax);
  if (Math.abs(cross) > 1e-12) {
    return false;
  }
  return (
    Math.min(ax, bx) - 1e-12 <= px && px <= Math.max(ax, bx) + 1e-12 &&
    Math.min(ay, by) - 1e-12 <= py && py <= Math.max(ay, by) + 1e-12
  );
}

export function lassoSelect(points: EmbeddedPointRecord[], polygon: Polygon): EmbeddedPointRecord[] {
  if (polygon.length < 3) {
    return [];
  }
  return points.filter((p) => pointInPolygon(p.x, p.y, polygon));
}

/** Index of the lattice cell containing a data-space position.
 *
 * Cells are half-open [lo, hi) except the global max edge, matching the
 * backend binning.
 */
export function cellForPosition(x: number, y: number, bounds: Bounds, resolution: number): GridCell | null {
  const [xmin, xmax, ymin, ymax] = bounds;
  if (x < xmin || x > xmax || y < ymin || y > ymax) {
    return null;
  }
  const ix = Math.min(Math.floor(((x - xmin) / (xmax - xmin)) * resolution), resolution - 1);
  const iy = Math.min(Math.floor(((y - ymin) / (ymax - ymin)) * resolution), resolution - 1);
  return { ix, iy };
}

/** Per-owner point counts inside a set of lattice cells. */
export function countsForCells(grid: GridCountsRecord, cells: GridCell[]): Record<string, number> {
  const out: Record<string, number> = {};
  for (const [owner, lattice] of Object.entries(grid.lattice)) {
    let total = 0;
    for (const cell of cells) {
      const row = lattice[cell.iy];
      if (row && typeof row[cell.ix] === "number") {
        total += row[cell.ix];
      }
    }
    if (total > 0) {
      out[owner] = total;
    }
  }
  return out;
}

export function totalGridCount(grid: GridCountsRecord): number {
  let total = 0;
  for (const lattice of Object.values(grid.lattice)) {
    for (const row of lattice) {
      for (const value of row) {
        total += value;
      }
    }
  }
  return total;
}

/** Fisher-Yates shuffle; scatterplots draw in random order so that no
 * participant's points systematically occlude another's. */
export function shuffled<T>(items: T[], random: () => number = Math.random): T[] {
  const out = items.slice();
  for (let i = out.length - 1; i > 0; i--) {
    const j = Math.floor(random() * (i + 1));
    [out[i], out[j]] = [out[j], out[i]];
  }
  return out;
}
