/** Scatterplot projection view with a lasso tool.
 *
 * Points draw in randomized order to keep one participant's data from
 * systematically covering another's where they overlap.
 */

import { shuffled } from "../geometry.js";
import { classPalette, ownerPalette } from "../palettes.js";
import type { EmbeddedPointRecord, Bounds, Polygon } from "../types.js";
import { clear, plotTransform, svgEl } from "./common.js";

export interface ScatterOptions {
  width?: number;
  height?: number;
  colorBy?: "ownership" | "class";
  onLasso?: (polygon: Polygon) => void;
}

export function renderScatter(
  container: HTMLElement,
  points: EmbeddedPointRecord[],
  bounds: Bounds,
  options: ScatterOptions = {},
): void {
  const width = options.width ?? 420;
  const height = options.height ?? 420;
  const transform = plotTransform(bounds, width, height);
  const svg = svgEl("svg", { width, height, class: "scatter-view" });
  clear(container);
  container.appendChild(svg);

  const owners = ownerPalette(points.map((p) => p.owner_id));
  const classes = classPalette(points.map((p) => p.label));
  const colorOf = (p: EmbeddedPointRecord) =>
    options.colorBy === "class" && p.label != null
      ? classes.get(p.label) ?? "#555"
      : owners.get(p.owner_id) ?? "#555";

  for (const point of shuffled(points)) {
    svg.appendChild(svgEl("circle", {
      cx: transform.toScreenX(point.x),
      cy: transform.toScreenY(point.y),
      r: 3.5,
      fill: colorOf(point),
      "fill-opacity": 0.85,
      "data-point-id": point.point_id,
      "data-owner": point.owner_id,
    }));
  }

  if (options.onLasso) {
    attachLasso(svg, transform, options.onLasso);
  }
}

function attachLasso(
  svg: SVGSVGElement,
  transform: ReturnType<typeof plotTransform>,
  onLasso: (polygon: Polygon) => void,
): void {
  let dragging = false;
  let screenPath: [number, number][] = [];
  const trace = svgEl("path", { class: "lasso-trace", fill: "none" });
  svg.appendChild(trace);

  const position = (event: PointerEvent): [number, number] => {
    const rect = svg.getBoundingClientRect();
    return [event.clientX - rect.left, event.clientY - rect.top];
  };

  svg.addEventListener("pointerdown", (event) => {
    dragging = true;
    screenPath = [position(event)];
    svg.setPointerCapture(event.pointerId);
  });
  svg.addEventListener("pointermove", (event) => {
    if (!dragging) {
      return;
    }
    screenPath.push(position(event));
    trace.setAttribute("d", "M" + screenPath.map(([x, y]) => `${x},${y}`).join("L"));
  });
  svg.addEventListener("pointerup", () => {
    dragging = false;
    trace.setAttribute("d", "");
    if (screenPath.length >= 3) {
      onLasso(screenPath.map(([px, py]) =>
        [transform.toDataX(px), transform.toDataY(py)] as [number, number]));
    }
    screenPath = [];
  });
}
