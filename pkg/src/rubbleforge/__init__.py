"""rubbleforge: deterministic destructible urban scenes for robot training.

Procedurally builds room-based scenes, fractures them with Voronoi, planar
or brick patterns, destroys them with parametrized events, settles the
rubble with deterministic rigid-body physics, and exports color/depth/
segmentation sensor frames locally or over a TCP bridge.
"""
from .collection import (
    GeometryCollection,
    Joint,
    Material,
    MATERIALS,
    apply_strain,
    build_collection,
    structural_support_pass,
)
from .events import (
    DestructionEvent,
    EventReport,
    Explosion,
    StrainBuildup,
    UniversalStrain,
    apply_event,
)
from .fracture import (
    Brick,
    FractureResult,
    Planar,
    UniformVoronoi,
    VoronoiSites,
    fracture_solid,
    voronoi_cell,
)
from .geometry import (
    ConvexPolyhedron,
    HalfSpace,
    Transform,
    clip_convex,
    shared_face_area,
    vec3,
)
from .physics import RigidBody, WorldState, settle, step
from .scene import (
    EnvironmentConfig,
    RoomInstance,
    Scene,
    instantiate,
    parse_scene,
    serialize_scene,
)
from .sensors import SensorFrame, export_frame, render

__version__ = "0.1.0"

__all__ = [
    "Brick", "ConvexPolyhedron", "DestructionEvent", "EnvironmentConfig",
    "EventReport", "Explosion", "FractureResult", "GeometryCollection",
    "HalfSpace", "Joint", "MATERIALS", "Material", "Planar", "RigidBody",
    "RoomInstance", "Scene", "SensorFrame", "StrainBuildup", "Transform",
    "UniformVoronoi", "UniversalStrain", "VoronoiSites", "WorldState",
    "apply_event", "apply_strain", "build_collection", "clip_convex",
    "export_frame", "fracture_solid", "instantiate", "parse_scene",
    "render", "serialize_scene", "settle", "shared_face_area", "step",
    "structural_support_pass", "vec3", "voronoi_cell",
]
