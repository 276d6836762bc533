/** Client-side privacy assertions.
 *
 * The UI treats it as a contract violation if any server response for a
 * density-mode task carries per-point records it should not see, or if
 * attribute payloads ever include rows for foreign points.  These scans
 * run on every consumed response and the violations throw, so a
 * misbehaving server cannot silently leak into client state.
 */

export interface PointLikeRecord {
  path: string;
  owner: string;
}

function looksLikePointRecord(value: unknown): value is {
  point_id: unknown; owner_id: string; x: unknown; y: unknown;
} {
  return (
    typeof value === "object" && value !== null &&
    "point_id" in value && "owner_id" in value && "x" in value && "y" in value
  );
}

/** Recursively collect per-point records owned by someone other than the viewer. */
export function findForeignPointRecords(
  body: unknown,
  viewer: string,
  path = "$",
): PointLikeRecord[] {
  const found: PointLikeRecord[] = [];
  if (Array.isArray(body)) {
    body.forEach((item, i) => {
      found.push(...findForeignPointRecords(item, viewer, `${path}[${i}]`));
    });
    return found;
  }
  if (typeof body === "object" && body !== null) {
    if (looksLikePointRecord(body) && body.owner_id !== viewer) {
      found.push({ path, owner: body.owner_id });
    }
    for (const [key, value] of Object.entries(body)) {
      found.push(...findForeignPointRecords(value, viewer, `${path}.${key}`));
    }
  }
  return found;
}

/** Attribute maps may only cover point ids the artifact lists as the
 * viewer's own. */
export function foreignAttributeIds(body: {
  points?: { point_id: number; owner_id: string }[];
  attributes?: Record<string, unknown>;
  viewer?: string;
}): string[] {
  if (!body.attributes) {
    return [];
  }
  const viewer = body.viewer;
  const ownIds = new Set(
    (body.points ?? [])
      .filter((p) => viewer === undefined || p.owner_id === viewer)
      .map((p) => String(p.point_id)),
  );
  return Object.keys(body.attributes).filter((id) => !ownIds.has(id));
}

/** Throws when a density-task response leaks foreign per-point data. */
export function assertDensityResponseClean(body: unknown, viewer: string, label: string): void {
  const leaks = findForeignPointRecords(body, viewer);
  if (leaks.length > 0) {
    throw new Error(
      `privacy violation in ${label}: ${leaks.length} foreign per-point ` +
      `records (first at ${leaks[0].path}, owner ${leaks[0].owner})`,
    );
  }
}
