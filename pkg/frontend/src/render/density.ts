/** Density projection view: raster heatmap with a selection lattice.
 *
 * No per-point marks ever render here; clicking lattice cells toggles
 * them into the current selection.
 */

import type { RasterImage } from "../raster.js";
import type { GridCell, GridCountsRecord } from "../types.js";
import { clear, el } from "./common.js";

export interface DensityOptions {
  size?: number;
  selected?: GridCell[];
  onToggleCell?: (cell: GridCell) => void;
}

/** Perceptually-reasonable single-hue ramp from white to deep blue. */
function heatColor(t: number): string {
  const clamped = Math.max(0, Math.min(1, t));
  const r = Math.round(255 - 205 * clamped);
  const g = Math.round(255 - 165 * clamped);
  const b = Math.round(255 - 88 * clamped);
  return `rgb(${r},${g},${b})`;
}

export function renderDensity(
  container: HTMLElement,
  raster: RasterImage,
  grid: GridCountsRecord,
  options: DensityOptions = {},
): void {
  const size = options.size ?? 420;
  clear(container);
  const canvas = el("canvas", "density-view");
  canvas.width = size;
  canvas.height = size;
  container.appendChild(canvas);
  const ctx = canvas.getContext("2d");
  if (!ctx) {
    return;
  }

  const r = raster.resolution;
  let peak = 0;
  for (const value of raster.values) {
    peak = Math.max(peak, value);
  }
  const cell = size / r;
  for (let iy = 0; iy < r; iy++) {
    for (let ix = 0; ix < r; ix++) {
      const value = raster.values[iy * r + ix];
      ctx.fillStyle = heatColor(peak > 0 ? value / peak : 0);
      // canvas y grows downward; raster rows follow data y
      ctx.fillRect(ix * cell, size - (iy + 1) * cell, cell + 0.5, cell + 0.5);
    }
  }

  const g = grid.resolution;
  const step = size / g;
  ctx.strokeStyle = "rgba(40,40,40,0.25)";
  ctx.lineWidth = 1;
  for (let i = 0; i <= g; i++) {
    ctx.beginPath();
    ctx.moveTo(i * step, 0);
    ctx.lineTo(i * step, size);
    ctx.stroke();
    ctx.beginPath();
    ctx.moveTo(0, i * step);
    ctx.lineTo(size, i * step);
    ctx.stroke();
  }

  for (const selected of options.selected ?? []) {
    ctx.strokeStyle = "#d62728";
    ctx.lineWidth = 2;
    ctx.strokeRect(selected.ix * step, size - (selected.iy + 1) * step, step, step);
  }

  if (options.onToggleCell) {
    const onToggle = options.onToggleCell;
    canvas.addEventListener("click", (event) => {
      const rect = canvas.getBoundingClientRect();
      const px = (event.clientX - rect.left) * (size / rect.width);
      const py = (event.clientY - rect.top) * (size / rect.height);
      const ix = Math.min(Math.floor(px / step), g - 1);
      const iy = Math.min(Math.floor((size - py) / step), g - 1);
      onToggle({ ix, iy });
    });
  }
}
