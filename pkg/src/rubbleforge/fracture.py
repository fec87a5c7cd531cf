"""Fracture a convex solid into fragments: Voronoi, planar or brick patterns.

All patterns are seeded and deterministic: same solid + pattern + seed gives
bit-identical fragment vertex lists.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    ConvexPolyhedron,
    HalfSpace,
    clip_convex,
    clip_many,
    intersect_box,
)
from .rng import SplitMix64


class FractureError(ValueError):
    pass


@dataclass(frozen=True)
class VoronoiSites:
    sites: np.ndarray  # (N, 3) control points
    seed: int

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.sites, dtype=float))
        if len(pts) < 1:
            raise FractureError("need at least one Voronoi site")
        object.__setattr__(self, "sites", pts)


@dataclass(frozen=True)
class UniformVoronoi:
    site_count: int
    seed: int = 0

    def __post_init__(self):
        if self.site_count < 1:
            raise FractureError("site_count must be >= 1")


@dataclass(frozen=True)
class Planar:
    planes: tuple[HalfSpace, ...]
    jitter_amplitude: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "planes", tuple(self.planes))
        if self.jitter_amplitude < 0:
            raise FractureError("jitter_amplitude must be >= 0")


@dataclass(frozen=True)
class Brick:
    brick_dims: tuple[float, float, float]
    row_offset: float | None = None  # None -> half-brick running bond

    def __post_init__(self):
        dims = tuple(float(d) for d in self.brick_dims)
        if any(d <= 0 for d in dims):
            raise FractureError("brick_dims must be positive componentwise")
        object.__setattr__(self, "brick_dims", dims)
        if self.row_offset is None:
            object.__setattr__(self, "row_offset", dims[0] / 2.0)


FracturePattern = UniformVoronoi | Planar | Brick


@dataclass
class FractureResult:
    fragments: list[ConvexPolyhedron]
    source_solid_id: int = 0
    source_volume: float = 0.0
    discarded_volume: float = 0.0


def voronoi_cell(
    i: int, sites: VoronoiSites, bounds: ConvexPolyhedron
) -> ConvexPolyhedron | None:
    """Voronoi region of site i intersected with `bounds`.

    Built by clipping `bounds` with the perpendicular-bisector half-space
    toward site i for every other site.  Sites are visited nearest-first so
    the security-radius cutoff can skip sites that provably cannot cut the
    current cell; the result is identical to clipping by all bisectors.
    """
    pts = sites.sites
    if not 0 <= i < len(pts):
        raise FractureError(f"site index {i} out of range")
    p = pts[i]
    order = np.argsort(np.linalg.norm(pts - p, axis=1), kind="stable")
    cell: ConvexPolyhedron | None = bounds
    for j in order:
        if j == i:
            continue
        dist_j = float(np.linalg.norm(pts[j] - p))
        far = float(np.max(np.linalg.norm(cell.vertices - p, axis=1)))
        if dist_j > 2.0 * far:
            break  # no remaining site can cut the cell
        cell = clip_convex(cell, HalfSpace.bisector(p, pts[j]))
        if cell is None:
            return None
    return cell


def _voronoi_fragments(
    solid: ConvexPolyhedron, sites: VoronoiSites
) -> list[ConvexPolyhedron]:
    out = []
    for i in range(len(sites.sites)):
        cell = voronoi_cell(i, sites, solid)
        if cell is not None:
            out.append(cell)
    return out


def sample_sites_in_solid(
    solid: ConvexPolyhedron, count: int, seed: int
) -> VoronoiSites:
    """Uniform sites inside the solid: AABB sampling with rejection."""
    lo, hi = solid.aabb()
    rng = SplitMix64(seed)
    pts = []
    attempts = 0
    limit = max(10000, count * 10000)
    while len(pts) < count:
        attempts += 1
        if attempts > limit:
            raise FractureError("site sampling failed: solid too thin for rejection")
        p = np.array([rng.uniform(lo[k], hi[k]) for k in range(3)])
        if solid.contains(p)[0]:
            pts.append(p)
    return VoronoiSites(np.array(pts), seed)


def fracture_solid(
    solid: ConvexPolyhedron, pattern: FracturePattern, source_solid_id: int = 0
) -> FractureResult:
    """Break one solid into convex fragments according to a pattern."""
    source_volume = solid.volume()
    if source_volume <= 0:
        raise FractureError("cannot fracture an empty solid")

    if isinstance(pattern, UniformVoronoi):
        sites = sample_sites_in_solid(solid, pattern.site_count, pattern.seed)
        fragments = _voronoi_fragments(solid, sites)
    elif isinstance(pattern, Planar):
        rng = SplitMix64(pattern.seed)
        pieces = [solid]
        for hs in pattern.planes:
            jitter = rng.uniform(-pattern.jitter_amplitude, pattern.jitter_amplitude)
            plane = HalfSpace(hs.normal, hs.offset + jitter)
            nxt = []
            for piece in pieces:
                for side in (plane, plane.flipped()):
                    part = clip_convex(piece, side)
                    if part is not None:
                        nxt.append(part)
            pieces = nxt
        fragments = pieces
    elif isinstance(pattern, Brick):
        fragments = _brick_fragments(solid, pattern)
    else:
        raise FractureError(f"unknown fracture pattern: {pattern!r}")

    fragments = [f for f in fragments if f.volume() > 0]
    if not fragments:
        raise FractureError("pattern produced no non-sliver fragments")
    kept = sum(f.volume() for f in fragments)
    return FractureResult(
        fragments=fragments,
        source_solid_id=source_solid_id,
        source_volume=source_volume,
        discarded_volume=max(0.0, source_volume - kept),
    )


def _brick_fragments(solid: ConvexPolyhedron, pattern: Brick) -> list[ConvexPolyhedron]:
    bx, by, bz = pattern.brick_dims
    lo, hi = solid.aabb()
    ny = max(1, math.ceil((hi[1] - lo[1]) / by - 1e-9))
    nz = max(1, math.ceil((hi[2] - lo[2]) / bz - 1e-9))
    out = []
    for iy in range(ny):
        y0 = lo[1] + iy * by
        x_start = lo[0] - (pattern.row_offset if iy % 2 else 0.0)
        nx = max(1, math.ceil((hi[0] - x_start) / bx - 1e-9))
        for ix in range(nx):
            x0 = x_start + ix * bx
            for iz in range(nz):
                z0 = lo[2] + iz * bz
                cell = intersect_box(
                    solid, (x0, y0, z0), (x0 + bx, y0 + by, z0 + bz)
                )
                if cell is not None:
                    out.append(cell)
    return out
