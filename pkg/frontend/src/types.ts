/** Shared shapes of the coordinator API payloads. */

export type TaskState = "Preparing" | "Running" | "Complete" | "Failed";
export type VisualizationMode = "scatterplot" | "density";

export interface RosterEntry {
  participant_id: string;
  state: "invited" | "joined" | "uploaded";
  expected_points: number;
  endpoint?: { frames?: string; artifact?: string } | string | null;
}

export interface TaskRecord {
  task_id: string;
  title: string;
  description: string;
  proposer: string;
  state: TaskState;
  step: number;
  state_label: string;
  failure_reason: string | null;
  result_ref: string | null;
  roster: Record<string, RosterEntry>;
  collaborators: Record<string, string>;
  config: {
    participants: { participant_id: string; point_count: number }[];
    dimensions: number;
    perplexity: number;
    visualization_mode: VisualizationMode;
    key_bits: number;
    scale_bits: number;
  };
  created_at: number;
  updated_at: number;
}

export interface EmbeddedPointRecord {
  point_id: number;
  owner_id: string;
  x: number;
  y: number;
  label?: string | null;
}

/** xmin, xmax, ymin, ymax */
export type Bounds = [number, number, number, number];

export interface GridCountsRecord {
  resolution: number;
  bounds: Bounds;
  /** owner -> [iy][ix] counts */
  lattice: Record<string, number[][]>;
}

export interface ArtifactRecord {
  task_id: string;
  mode: VisualizationMode;
  bounds: Bounds;
  points: EmbeddedPointRecord[];
  owner_counts: Record<string, number>;
  grid_counts: GridCountsRecord;
  /** scope ("all" or owner id) -> base64 raster blob */
  rasters: Record<string, string>;
  /** own point id -> raw attribute vector; never contains foreign rows */
  attributes?: Record<string, number[]>;
  attribute_columns?: string[];
  viewer?: string;
}

export interface DensityRecord {
  task_id: string;
  mode: VisualizationMode;
  bounds: Bounds;
  rasters: Record<string, string>;
  grid_counts: GridCountsRecord;
  owner_counts: Record<string, number>;
}

export type Polygon = [number, number][];

export interface GridCell {
  ix: number;
  iy: number;
}

export type Selection =
  | { kind: "lasso"; polygon: Polygon }
  | { kind: "cells"; cells: GridCell[] };
