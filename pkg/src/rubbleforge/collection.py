"""Geometry collections: fragment graphs with joints, strain and release.

A collection holds the fragments of one room plus the joints connecting
neighbouring fragments.  Joints accumulate strain; once any unbroken joint
of a fragment exceeds its threshold, all joints of that fragment break and
the fragment is released as an independent rigid body.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fracture import Brick, FracturePattern, FractureResult, UniformVoronoi
from .geometry import ConvexPolyhedron, shared_face_contact

MIN_JOINT_AREA = 1e-4  # m^2: suppresses numerical sliver contacts
GROUND_TOL = 1e-6      # m: fragments with a face this close to y=0 anchor


@dataclass(frozen=True)
class Material:
    name: str
    density: float            # kg/m^3
    strain_threshold: float   # dimensionless strain units
    default_pattern: FracturePattern | None = None

    def __post_init__(self):
        if self.density <= 0:
            raise ValueError("density must be > 0")
        if self.strain_threshold <= 0:
            raise ValueError("strain_threshold must be > 0")


# Default thresholds are a configurable ordering choice (wood weakest,
# concrete strongest); densities are nominal bulk values.
MATERIALS: dict[str, Material] = {
    "brick": Material("brick", 1800.0, 8.0, Brick((0.5, 0.325, 0.5))),
    "concrete": Material("concrete", 2400.0, 15.0, UniformVoronoi(12)),
    "wood": Material("wood", 600.0, 4.0, None),  # planar cuts, built per solid
}


@dataclass
class Fragment:
    id: int
    polyhedron: ConvexPolyhedron
    material: Material
    room_id: int = 0
    anchored: bool = False
    released: bool = False


@dataclass
class Joint:
    frag_a: int
    frag_b: int
    contact_area: float
    threshold: float
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    accumulated_strain: float = 0.0
    broken: bool = False

    def other(self, frag_id: int) -> int:
        return self.frag_b if frag_id == self.frag_a else self.frag_a


class GeometryCollection:
    """Fragments + joint graph of one room."""

    def __init__(self, fragments: list[Fragment], joints: list[Joint],
                 room_id: int = 0, archetype: str = ""):
        self.fragments: dict[int, Fragment] = {f.id: f for f in fragments}
        self.joints = joints
        self.room_id = room_id
        self.archetype = archetype
        self.adjacency: dict[int, list[int]] = {f.id: [] for f in fragments}
        for idx, j in enumerate(joints):
            if j.frag_a not in self.fragments or j.frag_b not in self.fragments:
                raise ValueError("joint references a missing fragment")
            self.adjacency[j.frag_a].append(idx)
            self.adjacency[j.frag_b].append(idx)

    def reset_strain(self):
        """Zero all accumulators (a new destruction event begins)."""
        for j in self.joints:
            j.accumulated_strain = 0.0

    def broken_joint_count(self) -> int:
        return sum(1 for j in self.joints if j.broken)


def build_collection(
    results: FractureResult | list[FractureResult],
    material: Material,
    room_id: int = 0,
    archetype: str = "",
    min_joint_area: float = MIN_JOINT_AREA,
    first_fragment_id: int = 0,
) -> GeometryCollection:
    """Assemble fragments into a collection with joints on shared faces.

    A joint is created for every fragment pair whose coplanar face overlap
    exceeds `min_joint_area`; fragments with a face on the ground plane
    (y = 0) are marked anchored.
    """
    if isinstance(results, FractureResult):
        results = [results]
    fragments: list[Fragment] = []
    fid = first_fragment_id
    for res in results:
        for poly in res.fragments:
            anchored = _touches_ground(poly)
            fragments.append(Fragment(fid, poly, material, room_id, anchored))
            fid += 1

    # AABB prefilter keeps the pairwise contact test near-linear in practice.
    joints: list[Joint] = []
    boxes = [f.polyhedron.aabb() for f in fragments]
    pad = 1e-5
    for i in range(len(fragments)):
        lo_i, hi_i = boxes[i]
        for k in range(i + 1, len(fragments)):
            lo_k, hi_k = boxes[k]
            if np.any(lo_i - pad > hi_k) or np.any(lo_k - pad > hi_i):
                continue
            area, center = shared_face_contact(
                fragments[i].polyhedron, fragments[k].polyhedron
            )
            if area > min_joint_area:
                joints.append(Joint(
                    fragments[i].id, fragments[k].id, area,
                    material.strain_threshold, center,
                ))
    return GeometryCollection(fragments, joints, room_id, archetype)


def _touches_ground(poly: ConvexPolyhedron, tol: float = GROUND_TOL) -> bool:
    ys = poly.vertices[:, 1]
    for face in poly.faces:
        if np.all(np.abs(ys[list(face)]) <= tol):
            return True
    return False


def apply_strain(gc: GeometryCollection, strain: dict[int, float]) -> set[int]:
    """Accumulate a strain field (joint index -> strain) and release.

    Release rule, iterated to fixpoint in simultaneous rounds so the outcome
    is independent of joint ordering: any fragment owning an unbroken joint
    whose accumulated strain strictly exceeds its threshold has ALL of its
    joints broken and is released.  Returns the newly released fragment ids.
    """
    for idx, s in strain.items():
        if s < 0:
            raise ValueError("strain values must be >= 0")
        gc.joints[idx].accumulated_strain += s

    released: set[int] = set()
    while True:
        triggered = [
            f.id for f in gc.fragments.values()
            if not f.released and any(
                not gc.joints[j].broken
                and gc.joints[j].accumulated_strain > gc.joints[j].threshold
                for j in gc.adjacency[f.id]
            )
        ]
        if not triggered:
            break
        for fid in triggered:
            release_fragment(gc, fid)
            released.add(fid)
    return released


def release_fragment(gc: GeometryCollection, fid: int):
    frag = gc.fragments[fid]
    frag.released = True
    for j in gc.adjacency[fid]:
        gc.joints[j].broken = True


def structural_support_pass(gc: GeometryCollection) -> set[int]:
    """Release fragments not connected to any anchored fragment.

    Connectivity runs over unbroken joints only; already-released fragments
    are ignored.  Returns the newly released fragment ids.
    """
    supported: set[int] = set()
    stack = [f.id for f in gc.fragments.values() if f.anchored and not f.released]
    supported.update(stack)
    while stack:
        fid = stack.pop()
        for j in gc.adjacency[fid]:
            joint = gc.joints[j]
            if joint.broken:
                continue
            other = joint.other(fid)
            if other not in supported and not gc.fragments[other].released:
                supported.add(other)
                stack.append(other)
    released = set()
    for f in gc.fragments.values():
        if not f.released and f.id not in supported:
            release_fragment(gc, f.id)
            released.add(f.id)
    return released
