"""Privacy-aware aggregation of embedding results.

Two publication modes: scatterplot artifacts carry every point with its
owner (and label when present); density artifacts withhold foreign
per-point geometry and ship kernel-density rasters plus lattice counts
instead, so recipients see distributions without point identities.

Raster cells hold densities; each point contributes exactly one unit of
mass inside the bounds (its Gaussian kernel is integrated per cell and
renormalized for edge truncation), so cell_sum * cell_area equals the
in-scope point count to float precision.
"""

from __future__ import annotations

import base64
import json
import logging
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

log = logging.getLogger(__name__)

DEFAULT_RASTER_RES = 256
DEFAULT_GRID_RES = 20
SCOPE_ALL = "all"


@dataclass
class EmbeddedPoint:
    point_id: int
    owner_id: str
    x: float
    y: float
    label: str | None = None


@dataclass
class DensityRaster:
    grid: np.ndarray  # (R, R) densities, row index = y cell, column = x cell
    bandwidth: float
    owner_scope: str
    bounds: tuple[float, float, float, float]  # xmin, xmax, ymin, ymax

    def mass(self) -> float:
        xmin, xmax, ymin, ymax = self.bounds
        r = self.grid.shape[0]
        cell_area = (xmax - xmin) / r * (ymax - ymin) / r
        return float(self.grid.sum() * cell_area)

    def to_bytes(self) -> bytes:
        """Length-prefixed JSON header + row-major little-endian float64."""
        header = json.dumps({
            "resolution": self.grid.shape[0],
            "bandwidth": self.bandwidth,
            "owner_scope": self.owner_scope,
            "bounds": list(self.bounds),
            "dtype": "<f8",
        }).encode()
        return struct.pack("<I", len(header)) + header + self.grid.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "DensityRaster":
        (hlen,) = struct.unpack("<I", blob[:4])
        header = json.loads(blob[4:4 + hlen])
        r = header["resolution"]
        grid = np.frombuffer(blob[4 + hlen:], dtype="<f8").reshape(r, r).copy()
        return cls(grid, header["bandwidth"], header["owner_scope"], tuple(header["bounds"]))


@dataclass
class GridCounts:
    lattice: dict[str, np.ndarray]  # owner_id -> (G, G) ints, [iy, ix]
    bounds: tuple[float, float, float, float]
    resolution: int

    def total(self) -> int:
        return int(sum(counts.sum() for counts in self.lattice.values()))

    def combined(self) -> np.ndarray:
        return sum(self.lattice.values())

    def to_jsonable(self) -> dict:
        return {
            "resolution": self.resolution,
            "bounds": list(self.bounds),
            "lattice": {o: c.tolist() for o, c in self.lattice.items()},
        }

    @classmethod
    def from_jsonable(cls, obj: dict) -> "GridCounts":
        lattice = {o: np.array(c, dtype=int) for o, c in obj["lattice"].items()}
        return cls(lattice, tuple(obj["bounds"]), obj["resolution"])


@dataclass
class EmbeddingArtifact:
    task_id: str
    mode: str  # "scatterplot" or "density"
    bounds: tuple[float, float, float, float]
    points: list[EmbeddedPoint]
    owner_counts: dict[str, int]
    grid_counts: GridCounts
    rasters: dict[str, DensityRaster] = field(default_factory=dict)

    def to_json_bytes(self) -> bytes:
        return json.dumps({
            "task_id": self.task_id,
            "mode": self.mode,
            "bounds": list(self.bounds),
            "points": [
                {"point_id": p.point_id, "owner_id": p.owner_id,
                 "x": p.x, "y": p.y, "label": p.label}
                for p in self.points
            ],
            "owner_counts": self.owner_counts,
            "grid_counts": self.grid_counts.to_jsonable(),
            "rasters": {
                scope: base64.b64encode(r.to_bytes()).decode()
                for scope, r in self.rasters.items()
            },
        }).encode()

    @classmethod
    def from_json_bytes(cls, blob: bytes) -> "EmbeddingArtifact":
        obj = json.loads(blob)
        return cls(
            task_id=obj["task_id"],
            mode=obj["mode"],
            bounds=tuple(obj["bounds"]),
            points=[EmbeddedPoint(**p) for p in obj["points"]],
            owner_counts=obj["owner_counts"],
            grid_counts=GridCounts.from_jsonable(obj["grid_counts"]),
            rasters={
                scope: DensityRaster.from_bytes(base64.b64decode(data))
                for scope, data in obj["rasters"].items()
            },
        )


def compute_bounds(points: list[EmbeddedPoint], margin: float = 0.05) -> tuple[float, float, float, float]:
    """Data bounding box with a relative margin; degenerate extents padded."""
    xs = np.array([p.x for p in points])
    ys = np.array([p.y for p in points])
    spans = [max(xs.max() - xs.min(), 1e-9), max(ys.max() - ys.min(), 1e-9)]
    pad = [margin * s for s in spans]
    return (float(xs.min() - pad[0]), float(xs.max() + pad[0]),
            float(ys.min() - pad[1]), float(ys.max() + pad[1]))


def scott_bandwidth(points: list[EmbeddedPoint],
                    bounds: tuple[float, float, float, float]) -> float:
    """Scott's rule for 2-D data: n^(-1/6) times the mean per-axis spread."""
    xs = np.array([p.x for p in points])
    ys = np.array([p.y for p in points])
    spread = np.sqrt((xs.var() + ys.var()) / 2.0)
    if spread <= 0 or len(points) < 2:
        # coincident or single point: one-cell-scale peak
        return max(bounds[1] - bounds[0], bounds[3] - bounds[2]) / DEFAULT_RASTER_RES
    return float(spread * len(points) ** (-1.0 / 6.0))


def _in_scope(points: list[EmbeddedPoint], scope: str) -> list[EmbeddedPoint]:
    return list(points) if scope == SCOPE_ALL else [p for p in points if p.owner_id == scope]


def kde_density(points: list[EmbeddedPoint], scope: str = SCOPE_ALL,
                bandwidth: float | None = None, resolution: int = DEFAULT_RASTER_RES,
                bounds: tuple[float, float, float, float] | None = None) -> DensityRaster:
    """Isotropic-Gaussian density raster for the in-scope points.

    Each kernel is integrated exactly over every cell (difference of
    Gaussian CDFs per axis) and renormalized for the mass falling
    outside the bounds, so the raster carries exactly one unit of mass
    per point.  Pass an explicit bandwidth and bounds when building
    per-owner rasters meant to add up to the global one.
    """
    if bounds is None:
        bounds = compute_bounds(points)
    scoped = _in_scope(points, scope)
    if not scoped:
        log.warning("kde_density: empty scope %r, returning zero raster", scope)
        return DensityRaster(np.zeros((resolution, resolution)), 0.0, scope, bounds)
    if bandwidth is None:
        bandwidth = scott_bandwidth(scoped, bounds)

    xmin, xmax, ymin, ymax = bounds
    x_edges = np.linspace(xmin, xmax, resolution + 1)
    y_edges = np.linspace(ymin, ymax, resolution + 1)
    xs = np.array([p.x for p in scoped])
    ys = np.array([p.y for p in scoped])

    scale = bandwidth * np.sqrt(2.0)
    # (K, R) per-axis cell masses, renormalized so each point sums to 1
    wx = 0.5 * np.diff(erf((x_edges[None, :] - xs[:, None]) / scale), axis=1)
    wy = 0.5 * np.diff(erf((y_edges[None, :] - ys[:, None]) / scale), axis=1)
    wx /= wx.sum(axis=1, keepdims=True)
    wy /= wy.sum(axis=1, keepdims=True)

    cell_area = (xmax - xmin) / resolution * (ymax - ymin) / resolution
    grid = (wy.T @ wx) / cell_area
    return DensityRaster(grid, float(bandwidth), scope, bounds)


def grid_counts(points: list[EmbeddedPoint], resolution: int = DEFAULT_GRID_RES,
                bounds: tuple[float, float, float, float] | None = None) -> GridCounts:
    """Per-owner point counts on a G x G lattice.

    Cells are half-open [lo, hi) along each axis; points on the global
    max edge land in the last cell.
    """
    if bounds is None:
        bounds = compute_bounds(points)
    xmin, xmax, ymin, ymax = bounds
    x_edges = np.linspace(xmin, xmax, resolution + 1)
    y_edges = np.linspace(ymin, ymax, resolution + 1)
    lattice: dict[str, np.ndarray] = {}
    for p in points:
        counts = lattice.setdefault(p.owner_id, np.zeros((resolution, resolution), dtype=int))
        ix = min(int(np.searchsorted(x_edges, p.x, side="right")) - 1, resolution - 1)
        iy = min(int(np.searchsorted(y_edges, p.y, side="right")) - 1, resolution - 1)
        if 0 <= ix < resolution and 0 <= iy < resolution:
            counts[iy, ix] += 1
    return GridCounts(lattice, bounds, resolution)


def export_artifact(points: list[EmbeddedPoint], mode: str, task_id: str = "",
                    for_owner: str | None = None,
                    raster_resolution: int = DEFAULT_RASTER_RES,
                    grid_resolution: int = DEFAULT_GRID_RES,
                    bandwidth: float | None = None) -> EmbeddingArtifact:
    """Build the artifact a given recipient is allowed to see.

    Scatterplot mode ships every point.  Density mode ships per-point
    entries only for `for_owner`, plus the global and per-owner rasters
    and the lattice counts.  One bandwidth (global Scott's rule unless
    overridden) is shared by all rasters so per-owner rasters sum to
    the global one.
    """
    if mode not in ("scatterplot", "density"):
        raise ValueError(f"unknown visualization mode {mode!r}")
    bounds = compute_bounds(points)
    owners = sorted({p.owner_id for p in points})
    owner_counts = {o: sum(1 for p in points if p.owner_id == o) for o in owners}
    counts = grid_counts(points, grid_resolution, bounds)
    if bandwidth is None:
        bandwidth = scott_bandwidth(points, bounds)
    rasters = {SCOPE_ALL: kde_density(points, SCOPE_ALL, bandwidth, raster_resolution, bounds)}
    for owner in owners:
        rasters[owner] = kde_density(points, owner, bandwidth, raster_resolution, bounds)

    if mode == "scatterplot":
        visible = list(points)
    else:
        visible = [p for p in points if for_owner is not None and p.owner_id == for_owner]
    return EmbeddingArtifact(task_id, mode, bounds, visible, owner_counts, counts, rasters)
