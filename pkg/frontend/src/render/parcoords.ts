/** Parallel coordinates over the viewer's own selected points.
 *
 * Axes are the raw attribute columns; one polyline per selected local
 * point.  Foreign points never appear here by construction: the client
 * holds no foreign attributes to draw.
 */

import type { AttributeRow } from "../selection.js";
import { clear, el, svgEl } from "./common.js";

export function renderParallelCoordinates(
  container: HTMLElement,
  rows: AttributeRow[],
  columns: string[],
  width = 420,
  height = 240,
): void {
  clear(container);
  if (rows.length === 0 || columns.length === 0) {
    container.appendChild(el("p", "empty-note", "no local points selected"));
    return;
  }
  const margin = { top: 18, bottom: 8, left: 24, right: 24 };
  const innerW = width - margin.left - margin.right;
  const innerH = height - margin.top - margin.bottom;
  const axisX = (i: number) =>
    margin.left + (columns.length === 1 ? 0 : (i * innerW) / (columns.length - 1));

  const lows = columns.map((_, i) => Math.min(...rows.map((r) => r.values[i])));
  const highs = columns.map((_, i) => Math.max(...rows.map((r) => r.values[i])));
  const axisY = (value: number, i: number) => {
    const span = highs[i] - lows[i];
    const t = span > 0 ? (value - lows[i]) / span : 0.5;
    return margin.top + (1 - t) * innerH;
  };

  const svg = svgEl("svg", { width, height, class: "parcoords-view" });
  columns.forEach((column, i) => {
    svg.appendChild(svgEl("line", {
      x1: axisX(i), x2: axisX(i), y1: margin.top, y2: margin.top + innerH,
      class: "parcoords-axis",
    }));
    svg.appendChild(svgEl("text", {
      x: axisX(i), y: margin.top - 6, "text-anchor": "middle", class: "axis-label",
    })).textContent = column;
  });
  for (const row of rows) {
    const path = row.values
      .map((value, i) => `${i === 0 ? "M" : "L"}${axisX(i)},${axisY(value, i)}`)
      .join("");
    svg.appendChild(svgEl("path", {
      d: path, fill: "none", class: "parcoords-line",
      "data-point-id": row.pointId,
    }));
  }
  container.appendChild(svg);
}
