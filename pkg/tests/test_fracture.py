import numpy as np
import pytest

from rubbleforge.fracture import (
    Brick,
    FractureError,
    Planar,
    UniformVoronoi,
    VoronoiSites,
    fracture_solid,
    sample_sites_in_solid,
    voronoi_cell,
)
from rubbleforge.geometry import ConvexPolyhedron, HalfSpace, vec3

SLAB = ConvexPolyhedron.box((0, 0, 0), (4, 1, 4))


class TestVoronoiCell:
    def test_single_site_fills_bounds(self):
        sites = VoronoiSites(np.array([[2.0, 0.5, 2.0]]), seed=0)
        cell = voronoi_cell(0, sites, SLAB)
        assert cell.volume() == pytest.approx(SLAB.volume(), abs=1e-12)

    def test_two_sites_split_in_half(self):
        sites = VoronoiSites(np.array([[1.0, 0.5, 2.0], [3.0, 0.5, 2.0]]), seed=0)
        left = voronoi_cell(0, sites, SLAB)
        right = voronoi_cell(1, sites, SLAB)
        assert left.volume() == pytest.approx(8.0, abs=1e-9)
        assert right.volume() == pytest.approx(8.0, abs=1e-9)
        assert np.max(left.vertices[:, 0]) == pytest.approx(2.0, abs=1e-9)

    def test_bad_index(self):
        sites = VoronoiSites(np.array([[2.0, 0.5, 2.0]]), seed=0)
        with pytest.raises(FractureError):
            voronoi_cell(1, sites, SLAB)

    def test_nearest_site_oracle(self):
        # Independent oracle: a sampled point must fall inside the cell of
        # its nearest site and outside every other cell.
        sites = sample_sites_in_solid(SLAB, 8, seed=99)
        cells = [voronoi_cell(i, sites, SLAB) for i in range(8)]
        pts = np.random.default_rng(1).uniform((0, 0, 0), (4, 1, 4), (20000, 3))
        d = np.linalg.norm(pts[:, None, :] - sites.sites[None, :, :], axis=2)
        order = np.sort(d, axis=1)
        clear = order[:, 1] - order[:, 0] > 1e-6  # skip points on a bisector
        nearest = np.argmin(d, axis=1)
        for i, cell in enumerate(cells):
            mine = clear & (nearest == i)
            assert cell.contains(pts[mine]).all()
            others = clear & (nearest != i)
            assert not cell.contains(pts[others], tol=-1e-6).any()


class TestVoronoiFracture:
    def test_partition_volume(self):
        res = fracture_solid(SLAB, UniformVoronoi(10, seed=7))
        assert len(res.fragments) == 10
        total = sum(f.volume() for f in res.fragments)
        assert total == pytest.approx(16.0, rel=1e-9)
        assert res.discarded_volume == pytest.approx(0.0, abs=1e-9)

    def test_deterministic(self):
        a = fracture_solid(SLAB, UniformVoronoi(6, seed=5))
        b = fracture_solid(SLAB, UniformVoronoi(6, seed=5))
        for fa, fb in zip(a.fragments, b.fragments):
            assert np.array_equal(fa.vertices, fb.vertices)
            assert fa.faces == fb.faces

    def test_seed_changes_output(self):
        a = fracture_solid(SLAB, UniformVoronoi(6, seed=5))
        b = fracture_solid(SLAB, UniformVoronoi(6, seed=6))
        assert not np.array_equal(a.fragments[0].vertices, b.fragments[0].vertices)

    def test_points_land_in_exactly_one_fragment(self):
        res = fracture_solid(SLAB, UniformVoronoi(12, seed=2))
        pts = np.random.default_rng(4).uniform((0, 0, 0), (4, 1, 4), (5000, 3))
        counts = np.zeros(len(pts), dtype=int)
        for frag in res.fragments:
            counts += frag.contains(pts, tol=-1e-9)  # strict interior
        assert np.all(counts <= 1)
        assert counts.mean() > 0.99  # boundary-band points may count zero


class TestPlanar:
    def test_one_plane_two_fragments(self):
        pat = Planar((HalfSpace(vec3(1, 0, 0), 2.0),))
        res = fracture_solid(SLAB, pat)
        assert len(res.fragments) == 2
        assert sum(f.volume() for f in res.fragments) == pytest.approx(16.0, rel=1e-12)

    def test_two_planes_four_fragments(self):
        pat = Planar((HalfSpace(vec3(1, 0, 0), 2.0), HalfSpace(vec3(0, 0, 1), 2.0)))
        res = fracture_solid(SLAB, pat)
        assert len(res.fragments) == 4

    def test_jitter_moves_cut_but_conserves_volume(self):
        base = Planar((HalfSpace(vec3(1, 0, 0), 2.0),), jitter_amplitude=0.3, seed=9)
        res = fracture_solid(SLAB, base)
        vols = sorted(f.volume() for f in res.fragments)
        assert sum(vols) == pytest.approx(16.0, rel=1e-9)
        assert vols[0] != pytest.approx(8.0, abs=1e-6)

    def test_plane_outside_solid(self):
        pat = Planar((HalfSpace(vec3(1, 0, 0), 100.0),))
        res = fracture_solid(SLAB, pat)
        assert len(res.fragments) == 1

    def test_negative_jitter_rejected(self):
        with pytest.raises(FractureError):
            Planar((), jitter_amplitude=-0.1)


class TestBrick:
    def test_exact_wall(self):
        wall = ConvexPolyhedron.box((0, 0, 0), (2.0, 0.5, 0.2))
        res = fracture_solid(wall, Brick((0.5, 0.25, 0.2), row_offset=0.0))
        assert len(res.fragments) == 8
        assert sum(f.volume() for f in res.fragments) == pytest.approx(0.2, rel=1e-9)

    def test_running_bond_offsets_odd_rows(self):
        wall = ConvexPolyhedron.box((0, 0, 0), (2.0, 0.5, 0.2))
        res = fracture_solid(wall, Brick((0.5, 0.25, 0.2)))  # default half offset
        # row 1 starts offset by -0.25 so it has an extra cut brick
        row1 = [f for f in res.fragments if f.aabb()[0][1] > 0.2]
        assert len(row1) == 5
        assert sum(f.volume() for f in res.fragments) == pytest.approx(0.2, rel=1e-9)

    def test_bricks_clipped_to_solid(self):
        res = fracture_solid(SLAB, Brick((0.9, 0.35, 1.1)))
        lo, hi = SLAB.aabb()
        for f in res.fragments:
            flo, fhi = f.aabb()
            assert np.all(flo >= lo - 1e-9) and np.all(fhi <= hi + 1e-9)
        assert sum(f.volume() for f in res.fragments) == pytest.approx(16.0, rel=1e-9)

    def test_bad_dims_rejected(self):
        with pytest.raises(FractureError):
            Brick((0.5, 0.0, 0.5))


class TestSiteSampling:
    def test_sites_inside_solid(self):
        sites = sample_sites_in_solid(SLAB, 25, seed=1)
        assert len(sites.sites) == 25
        assert SLAB.contains(sites.sites).all()

    def test_deterministic(self):
        a = sample_sites_in_solid(SLAB, 10, seed=3)
        b = sample_sites_in_solid(SLAB, 10, seed=3)
        assert np.array_equal(a.sites, b.sites)


def test_unknown_pattern_rejected():
    with pytest.raises(FractureError):
        fracture_solid(SLAB, "not a pattern")


def test_site_count_validation():
    with pytest.raises(FractureError):
        UniformVoronoi(0)
