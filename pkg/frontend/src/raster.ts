/** Decoder for the binary density-raster payloads.
 *
 * Wire layout: 4-byte little-endian header length, a JSON header with
 * resolution/bandwidth/bounds, then row-major little-endian float64
 * densities (row index follows y, column index follows x).
 */

import type { Bounds } from "./types.js";

export interface RasterImage {
  resolution: number;
  bandwidth: number;
  ownerScope: string;
  bounds: Bounds;
  values: Float64Array;
}

export function decodeRaster(base64: string): RasterImage {
  const raw = atob(base64);
  const bytes = new Uint8Array(raw.length);
  for (let i = 0; i < raw.length; i++) {
    bytes[i] = raw.charCodeAt(i);
  }
  const view = new DataView(bytes.buffer);
  const headerLength = view.getUint32(0, true);
  const headerText = new TextDecoder().decode(bytes.subarray(4, 4 + headerLength));
  const header = JSON.parse(headerText) as {
    resolution: number;
    bandwidth: number;
    owner_scope: string;
    bounds: Bounds;
    dtype: string;
  };
  if (header.dtype !== "<f8") {
    throw new Error(`unsupported raster dtype ${header.dtype}`);
  }
  const r = header.resolution;
  const body = bytes.subarray(4 + headerLength);
  if (body.byteLength !== r * r * 8) {
    throw new Error(`raster body is ${body.byteLength} bytes, expected ${r * r * 8}`);
  }
  const values = new Float64Array(r * r);
  const bodyView = new DataView(body.buffer, body.byteOffset, body.byteLength);
  for (let i = 0; i < values.length; i++) {
    values[i] = bodyView.getFloat64(i * 8, true);
  }
  return {
    resolution: r,
    bandwidth: header.bandwidth,
    ownerScope: header.owner_scope,
    bounds: header.bounds,
    values,
  };
}

/** Total mass carried by the raster (cell sum times cell area). */
export function rasterMass(raster: RasterImage): number {
  const [xmin, xmax, ymin, ymax] = raster.bounds;
  const r = raster.resolution;
  const cellArea = ((xmax - xmin) / r) * ((ymax - ymin) / r);
  let sum = 0;
  for (const v of raster.values) {
    sum += v;
  }
  return sum * cellArea;
}
