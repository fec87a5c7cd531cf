"""Destruction events: strain-field and impulse generators plus orchestration.

Three event kinds are modelled: a universal (earthquake-style) strain, an
explosion with distance falloff and outward impulses, and an incremental
strain buildup confined to a spherical region.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .collection import GeometryCollection, apply_strain, structural_support_pass
from . import physics

log = logging.getLogger(__name__)

EXPLOSION_MIN_DISTANCE = 0.01  # m: clamps the 1/d falloff singularity
BUILDUP_SUBSTEPS = 30          # physics sub-steps between buildup increments


@dataclass(frozen=True)
class UniversalStrain:
    magnitude: float

    def __post_init__(self):
        if self.magnitude < 0:
            raise ValueError("magnitude must be >= 0")


@dataclass(frozen=True)
class Explosion:
    center: np.ndarray
    strain_magnitude: float
    force_magnitude: float  # N*s impulse scale
    radius: float
    falloff: str = "squared"  # "linear" or "squared"

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.strain_magnitude < 0 or self.force_magnitude < 0:
            raise ValueError("magnitudes must be >= 0")
        if self.radius <= 0:
            raise ValueError("radius must be > 0")
        if self.falloff not in ("linear", "squared"):
            raise ValueError("falloff must be 'linear' or 'squared'")


@dataclass(frozen=True)
class StrainBuildup:
    center: np.ndarray
    radius: float
    per_step_magnitude: float
    duration: int  # number of strain steps

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.per_step_magnitude < 0:
            raise ValueError("per_step_magnitude must be >= 0")
        if self.radius <= 0:
            raise ValueError("radius must be > 0")
        if self.duration < 1:
            raise ValueError("duration must be >= 1")


DestructionEvent = UniversalStrain | Explosion | StrainBuildup


@dataclass
class EventReport:
    released: set[int]
    broken_joints: int
    applied: bool = True


def strain_field_universal(
    event: UniversalStrain, gc: GeometryCollection
) -> dict[int, float]:
    """Constant strain on every joint."""
    return {i: event.magnitude for i in range(len(gc.joints))}


def strain_field_explosion(
    event: Explosion, gc: GeometryCollection
) -> dict[int, float]:
    """Falloff strain on joints inside the culling radius, 0 outside."""
    field: dict[int, float] = {}
    for i, joint in enumerate(gc.joints):
        d = float(np.linalg.norm(joint.position - event.center))
        if d > event.radius:
            field[i] = 0.0
            continue
        d = max(d, EXPLOSION_MIN_DISTANCE)
        if event.falloff == "squared":
            field[i] = event.strain_magnitude / (d * d)
        else:
            field[i] = event.strain_magnitude / d
    return field


def strain_field_buildup(
    event: StrainBuildup, gc: GeometryCollection, t: int
) -> dict[int, float]:
    """Per-step increment on joints inside the region for step t."""
    if not 0 <= t < event.duration:
        raise ValueError("step index out of range")
    field: dict[int, float] = {}
    for i, joint in enumerate(gc.joints):
        d = float(np.linalg.norm(joint.position - event.center))
        field[i] = event.per_step_magnitude if d <= event.radius else 0.0
    return field


def explosion_impulse(event: Explosion, centroid: np.ndarray) -> np.ndarray:
    """Outward impulse for a fragment released by this explosion.

    The caller guarantees the release condition; fragments whose centroid
    lies outside the culling radius, or coincides with the center, get zero.
    """
    delta = np.asarray(centroid, float) - event.center
    dist = float(np.linalg.norm(delta))
    if dist > event.radius:
        return np.zeros(3)
    if dist < 1e-9:
        log.warning("explosion impulse direction degenerate at center; zeroed")
        return np.zeros(3)
    return event.force_magnitude * (delta / dist)


def _region_outside_world(event: DestructionEvent, world) -> bool:
    if isinstance(event, UniversalStrain):
        return False
    lo, hi = world.bounds()
    if lo is None:
        return True
    c, r = event.center, event.radius
    nearest = np.minimum(np.maximum(c, lo), hi)
    return float(np.linalg.norm(nearest - c)) > r


def apply_event(world, event: DestructionEvent) -> EventReport:
    """Run one destruction event against the world.

    Strain accumulators are reset at event start.  Universal/explosion
    events apply one strain field, release, add explosion impulses, run the
    structural support pass, then settle; strain buildup repeats the
    strain/support cycle with short physics bursts between increments.
    """
    if _region_outside_world(event, world):
        log.warning("event region entirely outside world bounds; no-op")
        return EventReport(released=set(), broken_joints=0, applied=False)

    for gc in world.collections:
        gc.reset_strain()

    released_total: set[int] = set()

    def strain_round(field_fn) -> set[int]:
        newly: set[int] = set()
        for gc in world.collections:
            newly |= apply_strain(gc, field_fn(gc))
        return newly

    if isinstance(event, UniversalStrain):
        strain_released = strain_round(lambda gc: strain_field_universal(event, gc))
        released_total |= strain_released
    elif isinstance(event, Explosion):
        strain_released = strain_round(lambda gc: strain_field_explosion(event, gc))
        released_total |= strain_released
    else:
        strain_released = set()

    if isinstance(event, Explosion):
        world.create_bodies(sorted(strain_released))
        for fid in sorted(strain_released):
            body = world.body(fid)
            impulse = explosion_impulse(event, body.world_centroid())
            body.linear_velocity = body.linear_velocity + impulse / body.mass

    if isinstance(event, StrainBuildup):
        for t in range(event.duration):
            newly = strain_round(lambda gc: strain_field_buildup(event, gc, t))
            for gc in world.collections:
                newly |= structural_support_pass(gc)
            released_total |= newly
            world.create_bodies(sorted(newly))
            for _ in range(BUILDUP_SUBSTEPS):
                physics.step(world, physics.DEFAULT_DT)
    else:
        for gc in world.collections:
            released_total |= structural_support_pass(gc)
        world.create_bodies(sorted(released_total))

    physics.settle(world)

    broken = sum(gc.broken_joint_count() for gc in world.collections)
    return EventReport(released=released_total, broken_joints=broken)
