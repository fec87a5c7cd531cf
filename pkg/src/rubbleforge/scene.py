"""Scene definition: room archetypes, grid placement, environment, parsing.

Scene files are JSON documents with top-level keys `grid_cell_size`, `seed`,
`environment`, `rooms`, `events` and `cameras`.  Unknown keys are rejected
everywhere.  See README for the full format.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import events as ev
from .collection import MATERIALS, GeometryCollection, Material, build_collection
from .fracture import Brick, FracturePattern, Planar, UniformVoronoi, fracture_solid
from .geometry import ConvexPolyhedron, HalfSpace, Transform, _unit
from .physics import WorldState
from .rng import SplitMix64, derive_seed

GRID_CELL_SIZE = 5.0  # m, fits 4 m rooms with clearance

# Room archetype dimensions (the shapes come with no canonical sizes; these
# are the shipped parametric defaults).
ROOM_SIZE = 4.0
ROOM_HEIGHT = 3.0
WALL_T = 0.2
DOOR_W, DOOR_H = 1.0, 2.2
WINDOW_W, WINDOW_H, WINDOW_SILL = 1.0, 1.0, 1.0


# -- errors ------------------------------------------------------------------

class SceneError(ValueError):
    pass


class SceneSyntaxError(SceneError):
    def __init__(self, msg: str, line: int, column: int):
        super().__init__(f"syntax error at line {line}, column {column}: {msg}")
        self.line = line
        self.column = column


class SceneValidationError(SceneError):
    pass


class UnknownKeyError(SceneValidationError):
    pass


class UnknownNameError(SceneValidationError):
    pass


class ValueRangeError(SceneValidationError):
    pass


class OverlapError(SceneValidationError):
    pass


# -- environment & cameras ---------------------------------------------------

@dataclass(frozen=True)
class Fog:
    density: float  # 1/m

    def __post_init__(self):
        if self.density < 0:
            raise ValueRangeError("fog density must be >= 0")


@dataclass(frozen=True)
class Rain:
    intensity: float  # 0..1

    def __post_init__(self):
        if not 0.0 <= self.intensity <= 1.0:
            raise ValueRangeError("rain intensity must be in [0, 1]")


@dataclass(frozen=True)
class Sunshine:
    pass


Weather = Fog | Rain | Sunshine


@dataclass(frozen=True)
class EnvironmentConfig:
    weather: Weather = Sunshine()
    time_of_day: float = 12.0  # hours, [0, 24)

    def __post_init__(self):
        if not 0.0 <= self.time_of_day < 24.0:
            raise ValueRangeError("time_of_day must be in [0, 24)")


@dataclass(frozen=True)
class CameraIntrinsics:
    width: int
    height: int
    horizontal_fov: float  # radians
    near: float
    far: float

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueRangeError("image dimensions must be >= 1")
        if not 0.0 < self.near < self.far:
            raise ValueRangeError("require 0 < near < far")
        if not 0.0 < self.horizontal_fov < math.pi:
            raise ValueRangeError("horizontal_fov must be in (0, pi)")


@dataclass(frozen=True)
class SceneCamera:
    position: tuple[float, float, float]
    look_at: tuple[float, float, float]
    up: tuple[float, float, float] = (0.0, 1.0, 0.0)
    width: int = 320
    height: int = 240
    horizontal_fov_deg: float = 70.0
    near: float = 0.1
    far: float = 50.0

    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(
            self.width, self.height, math.radians(self.horizontal_fov_deg),
            self.near, self.far,
        )

    def pose(self) -> Transform:
        """World-from-camera transform; camera looks along its local -z."""
        pos = np.asarray(self.position, float)
        fwd = _unit(np.asarray(self.look_at, float) - pos)
        right = _unit(np.cross(fwd, np.asarray(self.up, float)))
        up = np.cross(right, fwd)
        m = np.column_stack([right, up, -fwd])
        return Transform(_matrix_to_quat(m), pos)


def _matrix_to_quat(m: np.ndarray) -> np.ndarray:
    t = np.trace(m)
    if t > 0:
        s = math.sqrt(t + 1.0) * 2
        q = np.array([0.25 * s, (m[2, 1] - m[1, 2]) / s,
                      (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s])
    else:
        i = int(np.argmax(np.diag(m)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = math.sqrt(max(1e-12, 1.0 + m[i, i] - m[j, j] - m[k, k])) * 2
        q = np.empty(4)
        q[0] = (m[k, j] - m[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (m[j, i] + m[i, j]) / s
        q[1 + k] = (m[k, i] + m[i, k]) / s
    return q / np.linalg.norm(q)


# -- archetypes ---------------------------------------------------------------

@dataclass(frozen=True)
class RoomArchetype:
    name: str
    solids: tuple[ConvexPolyhedron, ...]
    footprint: frozenset[tuple[int, int]] = frozenset({(0, 0)})


def _box(x0, y0, z0, x1, y1, z1) -> ConvexPolyhedron:
    return ConvexPolyhedron.box((x0, y0, z0), (x1, y1, z1))


def _door_wall(z0, z1):
    """South wall with a centered doorway, as three boxes."""
    half = ROOM_SIZE / 2
    top = ROOM_HEIGHT - WALL_T
    lintel_y = WALL_T + DOOR_H
    return [
        _box(-half + WALL_T, WALL_T, z0, -DOOR_W / 2, top, z1),
        _box(DOOR_W / 2, WALL_T, z0, half - WALL_T, top, z1),
        _box(-DOOR_W / 2, lintel_y, z0, DOOR_W / 2, top, z1),
    ]


def _simple_door_solids():
    half = ROOM_SIZE / 2
    top = ROOM_HEIGHT - WALL_T
    return [
        _box(-half, 0, -half, half, WALL_T, half),                 # floor
        _box(-half, top, -half, half, ROOM_HEIGHT, half),          # roof
        _box(-half, WALL_T, -half, -half + WALL_T, top, half),     # west
        _box(half - WALL_T, WALL_T, -half, half, top, half),       # east
        _box(-half + WALL_T, WALL_T, -half, half - WALL_T, top, -half + WALL_T),
    ] + _door_wall(half - WALL_T, half)


def _l_shaped_solids():
    half = ROOM_SIZE / 2
    top = ROOM_HEIGHT - WALL_T
    sill_top = WALL_T + WINDOW_SILL
    win_top = sill_top + WINDOW_H
    solids = [
        # L-shaped floor and roof: full south strip + west north strip
        _box(-half, 0, -half, half, WALL_T, 0),
        _box(-half, 0, 0, 0, WALL_T, half),
        _box(-half, top, -half, half, ROOM_HEIGHT, 0),
        _box(-half, top, 0, 0, ROOM_HEIGHT, half),
        # outer walls
        _box(-half, WALL_T, -half, -half + WALL_T, top, half),      # west, full
        _box(half - WALL_T, WALL_T, -half + WALL_T, half, top, 0),  # east, short
        # north wall with a window
        _box(-half + WALL_T, WALL_T, -half, -WINDOW_W / 2, top, -half + WALL_T),
        _box(WINDOW_W / 2, WALL_T, -half, half, top, -half + WALL_T),
        _box(-WINDOW_W / 2, WALL_T, -half, WINDOW_W / 2, sill_top, -half + WALL_T),
        _box(-WINDOW_W / 2, win_top, -half, WINDOW_W / 2, top, -half + WALL_T),
        # inner corner walls
        _box(0, WALL_T, -WALL_T, half - WALL_T, top, 0),            # along z = 0
        _box(-WALL_T, WALL_T, 0, 0, top, half - WALL_T),            # along x = 0
        # south wall (west half) with a doorway centered at x = -1
        _box(-half + WALL_T, WALL_T, half - WALL_T, -1 - DOOR_W / 2, top, half),
        _box(-1 + DOOR_W / 2, WALL_T, half - WALL_T, 0, top, half),
        _box(-1 - DOOR_W / 2, WALL_T + DOOR_H, half - WALL_T, -1 + DOOR_W / 2, top, half),
    ]
    return solids


def _pillar_solids():
    top = ROOM_HEIGHT - WALL_T
    return _simple_door_solids() + [
        _box(-1.0, WALL_T, -1.0, -0.7, top, -0.7),
        _box(0.7, WALL_T, 0.7, 1.0, top, 1.0),
    ]


def _beam_solids():
    half = ROOM_SIZE / 2
    top = ROOM_HEIGHT - WALL_T
    beam_y = top - 0.3
    return _simple_door_solids() + [
        _box(-half + WALL_T, beam_y, -0.15, half - WALL_T, top, 0.15),  # beam
        _box(-half + WALL_T, WALL_T, -0.15, -half + WALL_T + 0.3, beam_y, 0.15),
        _box(half - WALL_T - 0.3, WALL_T, -0.15, half - WALL_T, beam_y, 0.15),
    ]


ARCHETYPES: dict[str, RoomArchetype] = {
    "simple_door": RoomArchetype("simple_door", tuple(_simple_door_solids())),
    "l_shaped_window": RoomArchetype("l_shaped_window", tuple(_l_shaped_solids())),
    "pillar_room": RoomArchetype("pillar_room", tuple(_pillar_solids())),
    "beam_room": RoomArchetype("beam_room", tuple(_beam_solids())),
}


def rotate_quarter_y(poly: ConvexPolyhedron, k: int) -> ConvexPolyhedron:
    """Rotate about the local y axis by k*90 degrees, exactly (no rounding)."""
    k %= 4
    if k == 0:
        return poly
    v = poly.vertices
    x, y, z = v[:, 0], v[:, 1], v[:, 2]
    if k == 1:
        nv = np.column_stack([z, y, -x])
    elif k == 2:
        nv = np.column_stack([-x, y, -z])
    else:
        nv = np.column_stack([-z, y, x])
    return ConvexPolyhedron(nv, poly.faces)


# -- scene dataclasses --------------------------------------------------------

@dataclass
class RoomInstance:
    archetype: str
    position: tuple[int, int]
    rotation: int = 0  # degrees: 0, 90, 180, 270
    material: str = "concrete"
    pattern_override: FracturePattern | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.archetype not in ARCHETYPES:
            raise UnknownNameError(f"unknown archetype {self.archetype!r}")
        if self.material not in MATERIALS:
            raise UnknownNameError(f"unknown material {self.material!r}")
        if self.rotation not in (0, 90, 180, 270):
            raise ValueRangeError("rotation must be one of 0, 90, 180, 270")
        self.position = (int(self.position[0]), int(self.position[1]))

    def cells(self) -> set[tuple[int, int]]:
        k = self.rotation // 90
        i0, j0 = self.position
        out = set()
        for di, dj in ARCHETYPES[self.archetype].footprint:
            for _ in range(k):
                di, dj = dj, -di
            out.add((i0 + di, j0 + dj))
        return out


@dataclass
class Scene:
    rooms: list[RoomInstance] = field(default_factory=list)
    events: list[ev.DestructionEvent] = field(default_factory=list)
    cameras: list[SceneCamera] = field(default_factory=list)
    environment: EnvironmentConfig = field(default_factory=EnvironmentConfig)
    grid_cell_size: float = GRID_CELL_SIZE
    seed: int = 0

    def __post_init__(self):
        if self.grid_cell_size <= 0:
            raise ValueRangeError("grid_cell_size must be > 0")
        occupied: dict[tuple[int, int], int] = {}
        for idx, room in enumerate(self.rooms):
            for cell in room.cells():
                if cell in occupied:
                    raise OverlapError(
                        f"rooms {occupied[cell]} and {idx} both occupy grid cell {cell}"
                    )
                occupied[cell] = idx

    def __eq__(self, other):
        return isinstance(other, Scene) and scene_to_dict(self) == scene_to_dict(other)


# -- JSON parsing -------------------------------------------------------------

def _check_keys(obj: dict, allowed: set[str], context: str):
    unknown = set(obj) - allowed
    if unknown:
        raise UnknownKeyError(
            f"unknown key(s) {sorted(unknown)} in {context}; allowed: {sorted(allowed)}"
        )


def _parse_pattern(obj: dict) -> FracturePattern:
    if "type" not in obj:
        raise UnknownKeyError("fracture pattern requires a 'type' key")
    kind = obj["type"]
    if kind == "uniform_voronoi":
        _check_keys(obj, {"type", "site_count", "seed"}, "uniform_voronoi pattern")
        return UniformVoronoi(int(obj["site_count"]), int(obj.get("seed", 0)))
    if kind == "planar":
        _check_keys(obj, {"type", "planes", "jitter_amplitude", "seed"}, "planar pattern")
        planes = []
        for p in obj["planes"]:
            _check_keys(p, {"normal", "offset"}, "planar plane")
            planes.append(HalfSpace(_unit(np.asarray(p["normal"], float)),
                                    float(p["offset"])))
        return Planar(tuple(planes), float(obj.get("jitter_amplitude", 0.0)),
                      int(obj.get("seed", 0)))
    if kind == "brick":
        _check_keys(obj, {"type", "brick_dims", "row_offset"}, "brick pattern")
        dims = tuple(float(d) for d in obj["brick_dims"])
        row = obj.get("row_offset")
        return Brick(dims, None if row is None else float(row))
    raise UnknownNameError(f"unknown fracture pattern type {kind!r}")


def _parse_event(obj: dict) -> ev.DestructionEvent:
    if "type" not in obj:
        raise UnknownKeyError("event requires a 'type' key")
    kind = obj["type"]
    try:
        if kind == "universal_strain":
            _check_keys(obj, {"type", "magnitude"}, "universal_strain event")
            return ev.UniversalStrain(float(obj["magnitude"]))
        if kind == "explosion":
            _check_keys(obj, {"type", "center", "strain_magnitude",
                              "force_magnitude", "radius", "falloff"},
                        "explosion event")
            return ev.Explosion(
                np.asarray(obj["center"], float),
                float(obj["strain_magnitude"]),
                float(obj["force_magnitude"]),
                float(obj["radius"]),
                str(obj.get("falloff", "squared")),
            )
        if kind == "strain_buildup":
            _check_keys(obj, {"type", "center", "radius",
                              "per_step_magnitude", "duration"},
                        "strain_buildup event")
            return ev.StrainBuildup(
                np.asarray(obj["center"], float),
                float(obj["radius"]),
                float(obj["per_step_magnitude"]),
                int(obj["duration"]),
            )
    except ValueError as exc:
        if isinstance(exc, SceneError):
            raise
        raise ValueRangeError(str(exc)) from exc
    raise UnknownNameError(f"unknown event type {kind!r}")


def _parse_environment(obj: dict) -> EnvironmentConfig:
    _check_keys(obj, {"weather", "time_of_day"}, "environment")
    weather: Weather = Sunshine()
    if "weather" in obj:
        w = obj["weather"]
        kind = w.get("type")
        if kind == "fog":
            _check_keys(w, {"type", "density"}, "fog weather")
            weather = Fog(float(w["density"]))
        elif kind == "rain":
            _check_keys(w, {"type", "intensity"}, "rain weather")
            weather = Rain(float(w["intensity"]))
        elif kind == "sunshine":
            _check_keys(w, {"type"}, "sunshine weather")
        else:
            raise UnknownNameError(f"unknown weather type {kind!r}")
    return EnvironmentConfig(weather, float(obj.get("time_of_day", 12.0)))


def _parse_camera(obj: dict) -> SceneCamera:
    allowed = {"position", "look_at", "up", "width", "height",
               "horizontal_fov_deg", "near", "far"}
    _check_keys(obj, allowed, "camera")
    cam = SceneCamera(
        tuple(float(v) for v in obj["position"]),
        tuple(float(v) for v in obj["look_at"]),
        tuple(float(v) for v in obj.get("up", (0.0, 1.0, 0.0))),
        int(obj.get("width", 320)),
        int(obj.get("height", 240)),
        float(obj.get("horizontal_fov_deg", 70.0)),
        float(obj.get("near", 0.1)),
        float(obj.get("far", 50.0)),
    )
    cam.intrinsics()  # validate ranges eagerly
    return cam


def _parse_room(obj: dict) -> RoomInstance:
    allowed = {"archetype", "position", "rotation", "material", "pattern", "seed"}
    _check_keys(obj, allowed, "room")
    pattern = _parse_pattern(obj["pattern"]) if "pattern" in obj else None
    seed = obj.get("seed")
    return RoomInstance(
        str(obj["archetype"]),
        (int(obj["position"][0]), int(obj["position"][1])),
        int(obj.get("rotation", 0)),
        str(obj.get("material", "concrete")),
        pattern,
        None if seed is None else int(seed),
    )


def parse_scene(document: bytes | str) -> Scene:
    """Parse and fully validate a scene document."""
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SceneSyntaxError(exc.msg, exc.lineno, exc.colno) from exc
    if not isinstance(data, dict):
        raise SceneSyntaxError("top-level value must be an object", 1, 1)
    allowed = {"grid_cell_size", "seed", "environment", "rooms", "events", "cameras"}
    _check_keys(data, allowed, "scene")
    try:
        return Scene(
            rooms=[_parse_room(r) for r in data.get("rooms", [])],
            events=[_parse_event(e) for e in data.get("events", [])],
            cameras=[_parse_camera(c) for c in data.get("cameras", [])],
            environment=_parse_environment(data.get("environment", {})),
            grid_cell_size=float(data.get("grid_cell_size", GRID_CELL_SIZE)),
            seed=int(data.get("seed", 0)),
        )
    except SceneError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise SceneValidationError(f"invalid scene document: {exc}") from exc


# -- serialization ------------------------------------------------------------

def _pattern_to_dict(p: FracturePattern) -> dict:
    if isinstance(p, UniformVoronoi):
        return {"type": "uniform_voronoi", "site_count": p.site_count, "seed": p.seed}
    if isinstance(p, Planar):
        return {
            "type": "planar",
            "planes": [{"normal": list(hs.normal), "offset": hs.offset}
                       for hs in p.planes],
            "jitter_amplitude": p.jitter_amplitude,
            "seed": p.seed,
        }
    return {"type": "brick", "brick_dims": list(p.brick_dims),
            "row_offset": p.row_offset}


def _event_to_dict(e: ev.DestructionEvent) -> dict:
    if isinstance(e, ev.UniversalStrain):
        return {"type": "universal_strain", "magnitude": e.magnitude}
    if isinstance(e, ev.Explosion):
        return {
            "type": "explosion", "center": list(e.center),
            "strain_magnitude": e.strain_magnitude,
            "force_magnitude": e.force_magnitude,
            "radius": e.radius, "falloff": e.falloff,
        }
    return {
        "type": "strain_buildup", "center": list(e.center), "radius": e.radius,
        "per_step_magnitude": e.per_step_magnitude, "duration": e.duration,
    }


def scene_to_dict(scene: Scene) -> dict:
    env: dict = {"time_of_day": scene.environment.time_of_day}
    w = scene.environment.weather
    if isinstance(w, Fog):
        env["weather"] = {"type": "fog", "density": w.density}
    elif isinstance(w, Rain):
        env["weather"] = {"type": "rain", "intensity": w.intensity}
    else:
        env["weather"] = {"type": "sunshine"}
    rooms = []
    for r in scene.rooms:
        d: dict = {
            "archetype": r.archetype, "position": list(r.position),
            "rotation": r.rotation, "material": r.material,
        }
        if r.pattern_override is not None:
            d["pattern"] = _pattern_to_dict(r.pattern_override)
        if r.seed is not None:
            d["seed"] = r.seed
        rooms.append(d)
    cameras = [{
        "position": list(c.position), "look_at": list(c.look_at),
        "up": list(c.up), "width": c.width, "height": c.height,
        "horizontal_fov_deg": c.horizontal_fov_deg, "near": c.near, "far": c.far,
    } for c in scene.cameras]
    return {
        "grid_cell_size": scene.grid_cell_size,
        "seed": scene.seed,
        "environment": env,
        "rooms": rooms,
        "events": [_event_to_dict(e) for e in scene.events],
        "cameras": cameras,
    }


def serialize_scene(scene: Scene) -> str:
    return json.dumps(scene_to_dict(scene), indent=2, sort_keys=True) + "\n"


# -- instantiation ------------------------------------------------------------

def room_seed(scene: Scene, room: RoomInstance) -> int:
    if room.seed is not None:
        return room.seed
    i, j = room.position
    return derive_seed(scene.seed, i, j, room.rotation // 90)


def _default_wood_pattern(solid: ConvexPolyhedron, seed: int) -> Planar:
    """Planar cuts along the solid's two longest axes (wood splits in slats)."""
    lo, hi = solid.aabb()
    ext = hi - lo
    axes = list(np.argsort(-ext))
    planes = []
    for axis in axes[:2]:
        n_cuts = max(1, int(round(ext[axis] / 0.8)))
        normal = np.zeros(3)
        normal[axis] = 1.0
        for c in range(1, n_cuts + 1):
            off = lo[axis] + ext[axis] * c / (n_cuts + 1)
            planes.append(HalfSpace(normal, float(off)))
    return Planar(tuple(planes), jitter_amplitude=0.05, seed=seed)


def _pattern_for_solid(
    room: RoomInstance, material: Material, solid: ConvexPolyhedron, seed: int
) -> FracturePattern:
    base = room.pattern_override or material.default_pattern
    if base is None:  # wood default: per-solid planar cuts
        return _default_wood_pattern(solid, seed)
    if isinstance(base, UniformVoronoi):
        return UniformVoronoi(base.site_count, derive_seed(seed, base.seed))
    if isinstance(base, Planar):
        return Planar(base.planes, base.jitter_amplitude, derive_seed(seed, base.seed))
    return base


def instantiate(scene: Scene) -> WorldState:
    """Build the world: place, rotate, fracture and link every room."""
    world = WorldState(seed=scene.seed)
    next_fid = 0
    for idx, room in enumerate(scene.rooms):
        arch = ARCHETYPES[room.archetype]
        material = MATERIALS[room.material]
        i, j = room.position
        cell = scene.grid_cell_size
        center = np.array([(i + 0.5) * cell, 0.0, (j + 0.5) * cell])
        base_seed = room_seed(scene, room)
        results = []
        for s_idx, local_solid in enumerate(arch.solids):
            solid = rotate_quarter_y(local_solid, room.rotation // 90)
            solid = solid.translated(center)
            pattern = _pattern_for_solid(
                room, material, solid, derive_seed(base_seed, s_idx)
            )
            try:
                results.append(fracture_solid(solid, pattern, s_idx))
            except Exception as exc:
                raise SceneError(
                    f"fracturing solid {s_idx} of room {idx} "
                    f"({room.archetype} at {room.position}) failed: {exc}"
                ) from exc
        gc = build_collection(
            results, material, room_id=idx, archetype=room.archetype,
            first_fragment_id=next_fid,
        )
        next_fid += len(gc.fragments)
        world.collections.append(gc)
    return world
