import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { ArtifactRecord, DensityRecord, TaskRecord } from "../src/types.js";

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "..", "fixtures");

export function loadFixture<T>(name: string): T {
  return JSON.parse(readFileSync(join(FIXTURES, name), "utf-8")) as T;
}

export interface FixtureSet {
  tasks: TaskRecord[];
  task: TaskRecord;
  artifact: ArtifactRecord;
  density: DensityRecord;
}

/** Responses captured from a real coordinator run (viewer: alpha). */
export function loadRun(prefix: "density" | "scatter"): FixtureSet {
  return {
    tasks: loadFixture(`${prefix}_tasks.json`),
    task: loadFixture(`${prefix}_task.json`),
    artifact: loadFixture(`${prefix}_artifact_alpha.json`),
    density: loadFixture(`${prefix}_density_alpha.json`),
  };
}

export const VIEWER = "alpha";
