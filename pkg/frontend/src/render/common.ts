/** Small shared helpers for the SVG/canvas views. */

import type { Bounds } from "../types.js";

export const SVG_NS = "http://www.w3.org/2000/svg";

export interface Margin {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

export const DEFAULT_MARGIN: Margin = { top: 12, right: 12, bottom: 24, left: 32 };

export interface PlotTransform {
  toScreenX(x: number): number;
  toScreenY(y: number): number;
  toDataX(px: number): number;
  toDataY(py: number): number;
  width: number;
  height: number;
}

/** Linear data-to-pixel mapping with the y axis flipped (screen y grows down). */
export function plotTransform(bounds: Bounds, width: number, height: number,
                              margin: Margin = DEFAULT_MARGIN): PlotTransform {
  const [xmin, xmax, ymin, ymax] = bounds;
  const innerW = width - margin.left - margin.right;
  const innerH = height - margin.top - margin.bottom;
  return {
    width,
    height,
    toScreenX: (x) => margin.left + ((x - xmin) / (xmax - xmin)) * innerW,
    toScreenY: (y) => margin.top + (1 - (y - ymin) / (ymax - ymin)) * innerH,
    toDataX: (px) => xmin + ((px - margin.left) / innerW) * (xmax - xmin),
    toDataY: (py) => ymin + (1 - (py - margin.top) / innerH) * (ymax - ymin),
  };
}

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, className?: string, text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

export function svgEl<K extends keyof SVGElementTagNameMap>(
  tag: K, attrs: Record<string, string | number> = {},
): SVGElementTagNameMap[K] {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, String(value));
  }
  return node;
}

export function clear(node: Element): void {
  while (node.firstChild) {
    node.removeChild(node.firstChild);
  }
}
