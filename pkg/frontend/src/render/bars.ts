/** Contribution bar chart: how many selected points each participant owns. */

import { ownerPalette } from "../palettes.js";
import { clear, el, svgEl } from "./common.js";

export function renderContributionBars(
  container: HTMLElement,
  counts: Record<string, number>,
  width = 300,
  rowHeight = 22,
): void {
  clear(container);
  const owners = Object.keys(counts).sort();
  if (owners.length === 0) {
    container.appendChild(el("p", "empty-note", "no selection"));
    return;
  }
  const palette = ownerPalette(owners);
  const peak = Math.max(...owners.map((o) => counts[o]));
  const labelWidth = 90;
  const svg = svgEl("svg", { width, height: owners.length * rowHeight, class: "bars-view" });
  owners.forEach((owner, i) => {
    const y = i * rowHeight;
    svg.appendChild(svgEl("text", {
      x: labelWidth - 6, y: y + rowHeight / 2 + 4, "text-anchor": "end",
      class: "bar-label",
    })).textContent = owner;
    svg.appendChild(svgEl("rect", {
      x: labelWidth,
      y: y + 3,
      width: Math.max(1, ((width - labelWidth - 40) * counts[owner]) / peak),
      height: rowHeight - 6,
      fill: palette.get(owner) ?? "#888",
    }));
    svg.appendChild(svgEl("text", {
      x: labelWidth + 4 + ((width - labelWidth - 40) * counts[owner]) / peak,
      y: y + rowHeight / 2 + 4,
      class: "bar-count",
    })).textContent = String(counts[owner]);
  });
  container.appendChild(svg);
}
