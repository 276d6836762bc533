import { describe, expect, it } from "vitest";

import { decodeRaster, rasterMass } from "../src/raster.js";
import { loadRun } from "./helpers.js";

describe("raster decoding", () => {
  const run = loadRun("density");

  it("parses header fields and dimensions", () => {
    const raster = decodeRaster(run.density.rasters["all"]);
    expect(raster.resolution).toBe(256);
    expect(raster.values.length).toBe(256 * 256);
    expect(raster.bounds).toEqual(run.density.bounds);
    expect(raster.bandwidth).toBeGreaterThan(0);
    expect(raster.ownerScope).toBe("all");
  });

  it("carries one unit of mass per in-scope point", () => {
    const total = Object.values(run.task.roster)
      .reduce((acc, entry) => acc + entry.expected_points, 0);
    const globalMass = rasterMass(decodeRaster(run.density.rasters["all"]));
    expect(globalMass).toBeCloseTo(total, 6);
    const alphaMass = rasterMass(decodeRaster(run.density.rasters["alpha"]));
    expect(alphaMass).toBeCloseTo(run.density.owner_counts["alpha"], 6);
  });

  it("per-owner rasters sum to the global raster", () => {
    const whole = decodeRaster(run.density.rasters["all"]);
    const alpha = decodeRaster(run.density.rasters["alpha"]);
    const beta = decodeRaster(run.density.rasters["beta"]);
    let worst = 0;
    for (let i = 0; i < whole.values.length; i++) {
      worst = Math.max(worst, Math.abs(alpha.values[i] + beta.values[i] - whole.values[i]));
    }
    expect(worst).toBeLessThan(1e-9);
  });

  it("rejects truncated payloads", () => {
    const blob = run.density.rasters["all"];
    expect(() => decodeRaster(blob.slice(0, 400))).toThrow();
  });
});
