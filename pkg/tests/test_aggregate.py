"""Mass conservation, lattice binning, and artifact privacy filtering."""

import numpy as np
import pytest
from scipy.stats import chi2

from mptsne import aggregate as agg


def make_points(rng, n, owners=("A", "B"), spread=5.0):
    pts = []
    for i in range(n):
        pts.append(agg.EmbeddedPoint(
            point_id=i,
            owner_id=owners[i % len(owners)],
            x=float(rng.uniform(-spread, spread)),
            y=float(rng.uniform(-spread, spread)),
        ))
    return pts


class TestKdeDensity:
    def test_single_point_peak(self):
        pts = [agg.EmbeddedPoint(0, "A", 1.0, 2.0)]
        raster = agg.kde_density(pts, bounds=(-5, 5, -5, 5), resolution=64)
        iy, ix = np.unravel_index(np.argmax(raster.grid), raster.grid.shape)
        # cell containing (1, 2): x in [-5,5) over 64 cells
        assert ix == int((1.0 - -5) / 10 * 64)
        assert iy == int((2.0 - -5) / 10 * 64)

    def test_mass_equals_count(self):
        rng = np.random.default_rng(0)
        pts = make_points(rng, 137)
        raster = agg.kde_density(pts)
        assert raster.mass() == pytest.approx(137, rel=1e-6)

    def test_mass_conserved_with_edge_points(self):
        # points jammed against the bounds still contribute full mass
        pts = [agg.EmbeddedPoint(0, "A", -5.0, -5.0), agg.EmbeddedPoint(1, "A", 5.0, 5.0)]
        raster = agg.kde_density(pts, bounds=(-5, 5, -5, 5), bandwidth=2.0)
        assert raster.mass() == pytest.approx(2, rel=1e-6)

    def test_partition_linearity(self):
        rng = np.random.default_rng(1)
        pts = make_points(rng, 80)
        bounds = agg.compute_bounds(pts)
        h = agg.scott_bandwidth(pts, bounds)
        whole = agg.kde_density(pts, "all", h, 128, bounds)
        part_a = agg.kde_density(pts, "A", h, 128, bounds)
        part_b = agg.kde_density(pts, "B", h, 128, bounds)
        np.testing.assert_allclose(part_a.grid + part_b.grid, whole.grid, atol=1e-9)

    def test_empty_scope_zero_raster(self):
        pts = [agg.EmbeddedPoint(0, "A", 0.0, 0.0)]
        raster = agg.kde_density(pts, scope="Z", bounds=(-1, 1, -1, 1))
        assert raster.grid.sum() == 0.0

    def test_raster_bytes_roundtrip(self):
        rng = np.random.default_rng(2)
        raster = agg.kde_density(make_points(rng, 30))
        parsed = agg.DensityRaster.from_bytes(raster.to_bytes())
        np.testing.assert_array_equal(parsed.grid, raster.grid)
        assert parsed.bounds == raster.bounds
        assert parsed.bandwidth == raster.bandwidth
        assert parsed.owner_scope == raster.owner_scope


class TestGridCounts:
    def test_single_point_single_cell(self):
        pts = [agg.EmbeddedPoint(0, "A", 0.35, 0.45)]
        counts = agg.grid_counts(pts, resolution=10, bounds=(0, 1, 0, 1))
        assert counts.total() == 1
        assert counts.lattice["A"][4, 3] == 1

    def test_max_edge_lands_in_last_cell(self):
        pts = [agg.EmbeddedPoint(0, "A", 1.0, 1.0)]
        counts = agg.grid_counts(pts, resolution=5, bounds=(0, 1, 0, 1))
        assert counts.lattice["A"][4, 4] == 1

    def test_totals_conserved_across_owners(self):
        rng = np.random.default_rng(3)
        pts = make_points(rng, 123, owners=("A", "B", "C"))
        counts = agg.grid_counts(pts)
        assert counts.total() == 123
        assert counts.combined().sum() == 123
        per_owner = {o: int(c.sum()) for o, c in counts.lattice.items()}
        assert per_owner == {"A": 41, "B": 41, "C": 41}

    def test_uniform_points_chi_squared(self):
        rng = np.random.default_rng(4)
        n, g = 10_000, 20
        pts = [agg.EmbeddedPoint(i, "A", float(rng.uniform(0, 1)), float(rng.uniform(0, 1)))
               for i in range(n)]
        counts = agg.grid_counts(pts, resolution=g, bounds=(0, 1, 0, 1))
        observed = counts.combined().ravel()
        expected = n / g ** 2
        statistic = float(((observed - expected) ** 2 / expected).sum())
        critical = chi2.ppf(1 - 0.001, df=g ** 2 - 1)
        assert statistic < critical


class TestExportArtifact:
    def make_artifact(self, mode, for_owner=None):
        rng = np.random.default_rng(5)
        pts = make_points(rng, 60)
        return agg.export_artifact(pts, mode, task_id="t1", for_owner=for_owner,
                                   raster_resolution=64, grid_resolution=8)

    def test_scatterplot_has_all_points(self):
        artifact = self.make_artifact("scatterplot")
        assert len(artifact.points) == 60
        assert artifact.owner_counts == {"A": 30, "B": 30}

    def test_density_mode_withholds_foreign_points(self):
        artifact = self.make_artifact("density", for_owner="A")
        assert len(artifact.points) == 30
        assert all(p.owner_id == "A" for p in artifact.points)
        # distribution info still present
        assert set(artifact.rasters) == {"all", "A", "B"}
        assert artifact.grid_counts.total() == 60

    def test_bounds_contain_all_points(self):
        artifact = self.make_artifact("scatterplot")
        xmin, xmax, ymin, ymax = artifact.bounds
        for p in artifact.points:
            assert xmin <= p.x <= xmax and ymin <= p.y <= ymax

    def test_rejects_unknown_mode(self):
        with pytest.raises(ValueError):
            self.make_artifact("hologram")

    def test_json_roundtrip(self):
        artifact = self.make_artifact("density", for_owner="B")
        parsed = agg.EmbeddingArtifact.from_json_bytes(artifact.to_json_bytes())
        assert parsed.task_id == artifact.task_id
        assert parsed.mode == artifact.mode
        assert parsed.bounds == artifact.bounds
        assert parsed.points == artifact.points
        assert parsed.owner_counts == artifact.owner_counts
        assert parsed.grid_counts.resolution == artifact.grid_counts.resolution
        for owner in artifact.grid_counts.lattice:
            np.testing.assert_array_equal(parsed.grid_counts.lattice[owner],
                                          artifact.grid_counts.lattice[owner])
        for scope in artifact.rasters:
            np.testing.assert_array_equal(parsed.rasters[scope].grid,
                                          artifact.rasters[scope].grid)

    def test_per_owner_rasters_sum_to_global(self):
        artifact = self.make_artifact("density", for_owner="A")
        total = artifact.rasters["A"].grid + artifact.rasters["B"].grid
        np.testing.assert_allclose(total, artifact.rasters["all"].grid, atol=1e-9)
