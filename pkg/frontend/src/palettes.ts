/** Categorical palettes: one keyed by ownership, one by class label. */

const OWNER_COLORS = [
  "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1",
  "#76b7b2", "#edc948", "#ff9da7", "#9c755f", "#bab0ac",
];

const CLASS_COLORS = [
  "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e",
  "#e6ab02", "#a6761d", "#666666",
];

export function ownerPalette(owners: string[]): Map<string, string> {
  const sorted = [...owners].sort();
  return new Map(sorted.map((o, i) => [o, OWNER_COLORS[i % OWNER_COLORS.length]]));
}

export function classPalette(labels: (string | null | undefined)[]): Map<string, string> {
  const distinct = [...new Set(labels.filter((l): l is string => l != null))].sort();
  return new Map(distinct.map((l, i) => [l, CLASS_COLORS[i % CLASS_COLORS.length]]));
}
