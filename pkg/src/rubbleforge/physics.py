"""Deterministic rigid-body settling of released fragments under gravity.

Semi-implicit Euler with positional ground projection, bounding-sphere
body-body contacts and global damping.  Iteration order is fixed by
fragment id and no parallel contact resolution is used, so identical
inputs give identical trajectories.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .collection import GeometryCollection
from .geometry import ConvexPolyhedron, Transform, quat_identity, quats_to_matrices

DEFAULT_DT = 1.0 / 120.0
LINEAR_DAMPING = 0.999       # per step
ANGULAR_DAMPING = 0.995      # per step
RESTITUTION = 0.1
RESTITUTION_MIN_SPEED = 0.5  # m/s: slower impacts stick instead of bouncing
GROUND_FRICTION = 0.2        # tangential velocity lost per contacting step
CONTACT_BETA = 0.5           # fraction of sphere overlap corrected per step
SLEEP_SPEED = 0.15           # m/s: contacting bodies slower than this stop
SETTLE_ENERGY_EPS = 1e-4     # J
SETTLE_MAX_STEPS = 20000
SETTLE_QUIET_STEPS = 10


class PhysicsError(RuntimeError):
    pass


@dataclass
class RigidBody:
    fragment_id: int
    local_vertices: np.ndarray            # centered on the centroid
    faces: list[tuple[int, ...]]
    pose: Transform
    mass: float
    linear_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    bounding_radius: float = 0.0

    def __post_init__(self):
        if self.mass <= 0:
            raise PhysicsError("mass must be > 0")
        if self.bounding_radius <= 0:
            self.bounding_radius = float(
                np.max(np.linalg.norm(self.local_vertices, axis=1))
            )

    @classmethod
    def from_fragment(cls, fragment) -> "RigidBody":
        poly = fragment.polyhedron
        c = poly.centroid()
        return cls(
            fragment_id=fragment.id,
            local_vertices=poly.vertices - c,
            faces=poly.faces,
            pose=Transform(quat_identity(), c.copy()),
            mass=poly.volume() * fragment.material.density,
        )

    def world_vertices(self) -> np.ndarray:
        return self.pose.apply(self.local_vertices)

    def world_centroid(self) -> np.ndarray:
        return self.pose.translation

    def world_polyhedron(self) -> ConvexPolyhedron:
        return ConvexPolyhedron(self.world_vertices(), self.faces)

    def kinetic_energy(self) -> float:
        inertia = 0.4 * self.mass * self.bounding_radius**2
        return 0.5 * self.mass * float(self.linear_velocity @ self.linear_velocity) \
            + 0.5 * inertia * float(self.angular_velocity @ self.angular_velocity)


class WorldState:
    """Geometry collections plus the rigid bodies of released fragments."""

    def __init__(self, gravity=(0.0, -9.81, 0.0), seed: int = 0):
        self.collections: list[GeometryCollection] = []
        self.bodies: dict[int, RigidBody] = {}
        self.gravity = np.asarray(gravity, dtype=float)
        self.seed = seed
        self.robot = None  # set by the bridge when serving
        self._cache = None

    # -- fragment / body bookkeeping ------------------------------------

    def fragment(self, fid: int):
        for gc in self.collections:
            if fid in gc.fragments:
                return gc.fragments[fid]
        raise KeyError(f"unknown fragment id {fid}")

    def body(self, fid: int) -> RigidBody:
        return self.bodies[fid]

    def create_bodies(self, fragment_ids):
        """Create rigid bodies for newly released fragments (idempotent)."""
        for fid in fragment_ids:
            if fid in self.bodies:
                continue
            self.bodies[fid] = RigidBody.from_fragment(self.fragment(fid))
            self._cache = None

    def bounds(self):
        """World AABB over all fragments, or (None, None) when empty."""
        los, his = [], []
        for gc in self.collections:
            for f in gc.fragments.values():
                poly = (self.bodies[f.id].world_polyhedron()
                        if f.id in self.bodies else f.polyhedron)
                lo, hi = poly.aabb()
                los.append(lo)
                his.append(hi)
        if not los:
            return None, None
        return np.min(los, axis=0), np.max(his, axis=0)

    def total_kinetic_energy(self) -> float:
        self._sync_arrays()
        c = self._cache
        if c is None:
            return 0.0
        lin = 0.5 * c["mass"] * np.sum(c["vel"] ** 2, axis=1)
        ang = 0.5 * c["inertia"] * np.sum(c["angvel"] ** 2, axis=1)
        return float(np.sum(lin + ang))

    # -- array cache ------------------------------------------------------

    def _sync_arrays(self):
        if self._cache is not None or not self.bodies:
            return
        order = sorted(self.bodies)
        bodies = [self.bodies[fid] for fid in order]
        vmax = max(len(b.local_vertices) for b in bodies)
        local = np.zeros((len(bodies), vmax, 3))
        for i, b in enumerate(bodies):
            n = len(b.local_vertices)
            local[i, :n] = b.local_vertices
            local[i, n:] = b.local_vertices[0]  # pad with a real vertex
        self._cache = {
            "order": order,
            "local": local,
            "pos": np.array([b.pose.translation for b in bodies]),
            "quat": np.array([b.pose.rotation for b in bodies]),
            "vel": np.array([b.linear_velocity for b in bodies]),
            "angvel": np.array([b.angular_velocity for b in bodies]),
            "mass": np.array([b.mass for b in bodies]),
            "inv_mass": np.array([1.0 / b.mass for b in bodies]),
            "radius": np.array([b.bounding_radius for b in bodies]),
            "inertia": np.array(
                [0.4 * b.mass * b.bounding_radius**2 for b in bodies]
            ),
        }

    def _write_back(self):
        c = self._cache
        if c is None:
            return
        for i, fid in enumerate(c["order"]):
            b = self.bodies[fid]
            b.pose = Transform(c["quat"][i], c["pos"][i])
            b.linear_velocity = c["vel"][i].copy()
            b.angular_velocity = c["angvel"][i].copy()


def _integrate_quats(quat: np.ndarray, angvel: np.ndarray, dt: float) -> np.ndarray:
    mags = np.linalg.norm(angvel, axis=1)
    moving = mags > 1e-12
    if not np.any(moving):
        return quat
    out = quat.copy()
    half = 0.5 * dt * mags[moving]
    axes = angvel[moving] / mags[moving, None]
    s = np.sin(half)
    dq = np.column_stack([np.cos(half), axes * s[:, None]])
    w, x, y, z = quat[moving].T
    dw, dx, dy, dz = dq.T
    out[moving, 0] = dw * w - dx * x - dy * y - dz * z
    out[moving, 1] = dw * x + dx * w + dy * z - dz * y
    out[moving, 2] = dw * y - dx * z + dy * w + dz * x
    out[moving, 3] = dw * z + dx * y - dy * x + dz * w
    norms = np.linalg.norm(out[moving], axis=1)
    out[moving] /= norms[:, None]
    return out


def _step_arrays(world: WorldState, dt: float):
    c = world._cache
    pos, vel, quat, angvel = c["pos"], c["vel"], c["quat"], c["angvel"]
    n = len(pos)

    vel += world.gravity * dt
    vel *= LINEAR_DAMPING
    angvel *= ANGULAR_DAMPING
    pos += vel * dt
    c["quat"] = quat = _integrate_quats(quat, angvel, dt)

    # Body-body contacts: bounding spheres, simultaneous equal-and-opposite
    # impulses (order-free, hence deterministic).
    touching = np.zeros(n, dtype=bool)
    if n > 1:
        diff = pos[None, :, :] - pos[:, None, :]
        dist = np.linalg.norm(diff, axis=2)
        rsum = c["radius"][:, None] + c["radius"][None, :]
        ii, kk = np.triu_indices(n, k=1)
        hit = dist[ii, kk] < rsum[ii, kk]
        if np.any(hit):
            ai, bi = ii[hit], kk[hit]
            touching[ai] = True
            touching[bi] = True
            d = dist[ai, bi]
            normal = np.where(
                d[:, None] > 1e-9,
                diff[ai, bi] / np.maximum(d, 1e-9)[:, None],
                np.array([1.0, 0.0, 0.0]),
            )
            pen = rsum[ai, bi] - d
            inv_a, inv_b = c["inv_mass"][ai], c["inv_mass"][bi]
            inv_sum = inv_a + inv_b
            corr = CONTACT_BETA * pen / inv_sum
            np.add.at(pos, ai, -normal * (corr * inv_a)[:, None])
            np.add.at(pos, bi, normal * (corr * inv_b)[:, None])
            rel = np.einsum("ij,ij->i", vel[bi] - vel[ai], normal)
            closing = rel < 0
            j = np.where(closing, -(1.0 + RESTITUTION) * rel / inv_sum, 0.0)
            np.add.at(vel, ai, -normal * (j * inv_a)[:, None])
            np.add.at(vel, bi, normal * (j * inv_b)[:, None])

    # Ground plane y=0: positional projection + restitution + friction.
    rot = quats_to_matrices(quat)
    ys = np.einsum("nj,nvj->nv", rot[:, 1, :], c["local"]) + pos[:, 1:2]
    pen = -ys.min(axis=1)
    contact = pen > 0
    if np.any(contact):
        pos[contact, 1] += pen[contact]
        vy = vel[contact, 1]
        vel[contact, 1] = np.where(
            vy < -RESTITUTION_MIN_SPEED, -RESTITUTION * vy, np.where(vy < 0, 0.0, vy)
        )
        vel[contact, 0] *= 1.0 - GROUND_FRICTION
        vel[contact, 2] *= 1.0 - GROUND_FRICTION
        angvel[contact] *= 1.0 - GROUND_FRICTION
        touching |= contact

    # Sleeping: contacting bodies slower than the per-step gravity kick
    # would jitter forever; snap them to rest so piles settle.
    asleep = touching & (np.linalg.norm(vel, axis=1) < SLEEP_SPEED)
    if np.any(asleep):
        vel[asleep] = 0.0
        angvel[asleep] = 0.0

    if not (np.isfinite(pos).all() and np.isfinite(vel).all()
            and np.isfinite(quat).all()):
        bad = np.flatnonzero(~np.isfinite(pos).all(axis=1)
                             | ~np.isfinite(vel).all(axis=1))
        fid = c["order"][int(bad[0])] if len(bad) else c["order"][0]
        raise PhysicsError(f"NaN detected in body state of fragment {fid}")


def step(world: WorldState, dt: float) -> WorldState:
    """Advance the world by one fixed step.  dt must be in (0, 0.05]."""
    if not 0.0 < dt <= 0.05:
        raise PhysicsError("dt must be in (0, 0.05]")
    if not world.bodies:
        return world
    world._cache = None  # pick up any external pose/velocity edits
    world._sync_arrays()
    _step_arrays(world, dt)
    world._write_back()
    return world


def settle(
    world: WorldState,
    max_steps: int = SETTLE_MAX_STEPS,
    energy_eps: float = SETTLE_ENERGY_EPS,
    dt: float = DEFAULT_DT,
) -> bool:
    """Step until kinetic energy stays below energy_eps for 10 consecutive
    steps or max_steps elapse.  Returns True when the world settled."""
    if max_steps < 1:
        raise PhysicsError("max_steps must be >= 1")
    if not world.bodies:
        return True
    world._cache = None
    world._sync_arrays()
    quiet = 0
    for _ in range(max_steps):
        _step_arrays(world, dt)
        c = world._cache
        energy = float(np.sum(
            0.5 * c["mass"] * np.sum(c["vel"] ** 2, axis=1)
            + 0.5 * c["inertia"] * np.sum(c["angvel"] ** 2, axis=1)
        ))
        quiet = quiet + 1 if energy < energy_eps else 0
        if quiet >= SETTLE_QUIET_STEPS:
            world._write_back()
            return True
    world._write_back()
    return False
