"""Ray-casting camera: color, depth and semantic segmentation rasters.

Rendering is pure: the same world snapshot, camera and environment always
produce identical frame bytes.  Primary rays traverse a BVH over fragment
AABBs and intersect convex fragments with a plane slab test; depth is
measured along the optical axis; lighting is Lambert plus one shadow ray
toward the sun, with fog/rain/time-of-day affecting color only.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .geometry import Transform
from .physics import WorldState
from .scene import CameraIntrinsics, EnvironmentConfig, Fog, Rain

DEPTH_SENTINEL = np.inf
DEPTH_QUANT_MAX = 65534        # quantization steps over [near, far]
DEPTH_MISS_CODE = 65535
AMBIENT = 0.25
HORIZON_COLOR = np.array([0.70, 0.75, 0.80])
RAIN_DIM = 0.4                 # full rain multiplies color by 1 - RAIN_DIM

ARCHETYPE_ORDER = ["simple_door", "l_shaped_window", "pillar_room", "beam_room"]
MATERIAL_ORDER = ["brick", "concrete", "wood"]
ALBEDO = {
    "brick": np.array([0.70, 0.35, 0.30]),
    "concrete": np.array([0.62, 0.62, 0.60]),
    "wood": np.array([0.55, 0.40, 0.25]),
}


def class_id(archetype: str, material: str, released: bool) -> int:
    """Semantic label: (archetype, material, intact-vs-released), 0 = background."""
    a = ARCHETYPE_ORDER.index(archetype) if archetype in ARCHETYPE_ORDER else 0
    m = MATERIAL_ORDER.index(material)
    return 1 + a * len(MATERIAL_ORDER) * 2 + m * 2 + int(released)


def class_table() -> list[dict]:
    rows = [{"label": 0, "archetype": None, "material": None, "state": "background"}]
    for a in ARCHETYPE_ORDER:
        for m in MATERIAL_ORDER:
            for released in (False, True):
                rows.append({
                    "label": class_id(a, m, released),
                    "archetype": a,
                    "material": m,
                    "state": "released" if released else "intact",
                })
    return rows


@dataclass
class SensorFrame:
    color: np.ndarray         # (H, W, 3) uint8
    depth: np.ndarray         # (H, W) float64 m, inf for misses
    segmentation: np.ndarray  # (H, W) uint16
    instance: np.ndarray      # (H, W) uint16, fragment index + 1, 0 = none
    pose: Transform
    intrinsics: CameraIntrinsics
    index: int = 0


# -- world snapshot ----------------------------------------------------------

@dataclass
class _FragmentView:
    normals: np.ndarray  # (F, 3)
    offsets: np.ndarray  # (F,)
    lo: np.ndarray
    hi: np.ndarray
    label: int
    albedo: np.ndarray


def world_snapshot(world: WorldState) -> list[_FragmentView]:
    views = []
    for gc in world.collections:
        for fid in sorted(gc.fragments):
            frag = gc.fragments[fid]
            if frag.released and fid in world.bodies:
                poly = world.bodies[fid].world_polyhedron()
            else:
                poly = frag.polyhedron
            planes = poly.planes
            lo, hi = poly.aabb()
            views.append(_FragmentView(
                normals=np.array([hs.normal for hs in planes]),
                offsets=np.array([hs.offset for hs in planes]),
                lo=lo, hi=hi,
                label=class_id(gc.archetype, frag.material.name, frag.released),
                albedo=ALBEDO[frag.material.name],
            ))
    return views


# -- BVH ----------------------------------------------------------------------

class _BVHNode:
    __slots__ = ("lo", "hi", "left", "right", "items")

    def __init__(self, lo, hi, left=None, right=None, items=None):
        self.lo, self.hi = lo, hi
        self.left, self.right = left, right
        self.items = items


def build_bvh(views: list[_FragmentView], leaf_size: int = 8) -> _BVHNode | None:
    if not views:
        return None
    centers = np.array([(v.lo + v.hi) * 0.5 for v in views])

    def build(idx: np.ndarray) -> _BVHNode:
        lo = np.min([views[i].lo for i in idx], axis=0)
        hi = np.max([views[i].hi for i in idx], axis=0)
        if len(idx) <= leaf_size:
            return _BVHNode(lo, hi, items=list(idx))
        axis = int(np.argmax(hi - lo))
        order = idx[np.argsort(centers[idx, axis], kind="stable")]
        mid = len(order) // 2
        return _BVHNode(lo, hi, left=build(order[:mid]), right=build(order[mid:]))

    return build(np.arange(len(views)))


def raycast(
    origins: np.ndarray,
    dirs: np.ndarray,
    views: list[_FragmentView],
    bvh: _BVHNode | None,
    t_min: np.ndarray,
    t_max: np.ndarray,
):
    """Nearest convex-fragment hit per ray.

    Returns (t, fragment index or -1, surface normal) arrays.  `t` is the
    parametric distance along `dirs`; misses hold +inf.
    """
    m = len(origins)
    best_t = np.full(m, np.inf)
    best_idx = np.full(m, -1, dtype=np.int64)
    best_n = np.zeros((m, 3))
    if bvh is None:
        return best_t, best_idx, best_n
    # Avoid 0*inf = nan in the slab test: clamp zero components before inverting.
    safe = np.where(np.abs(dirs) < 1e-300, 1e-300, dirs)
    inv = 1.0 / safe

    def aabb_mask(node, sub):
        t0 = (node.lo[None, :] - origins[sub]) * inv[sub]
        t1 = (node.hi[None, :] - origins[sub]) * inv[sub]
        tn = np.minimum(t0, t1).max(axis=1)
        tf = np.maximum(t0, t1).min(axis=1)
        return (tf >= np.maximum(tn, t_min[sub])) & \
               (tn <= np.minimum(best_t[sub], t_max[sub]))

    stack = [(bvh, np.arange(m))]
    while stack:
        node, sub = stack.pop()
        keep = aabb_mask(node, sub)
        sub = sub[keep]
        if len(sub) == 0:
            continue
        if node.items is None:
            stack.append((node.left, sub))
            stack.append((node.right, sub))
            continue
        o, d = origins[sub], dirs[sub]
        for vi in node.items:
            view = views[vi]
            denom = d @ view.normals.T                      # (m, F)
            num = view.offsets[None, :] - o @ view.normals.T
            with np.errstate(divide="ignore", invalid="ignore"):
                tp = num / denom
            entering = denom < -1e-12
            exiting = denom > 1e-12
            tn = np.where(entering, tp, -np.inf).max(axis=1)
            tf = np.where(exiting, tp, np.inf).min(axis=1)
            parallel_out = np.any((np.abs(denom) <= 1e-12) & (num < 0), axis=1)
            hit = (~parallel_out) & (tn <= tf) & (tn >= t_min[sub]) & \
                  (tn <= t_max[sub]) & (tn < best_t[sub])
            if not np.any(hit):
                continue
            rows = sub[hit]
            plane = np.where(entering[hit], tp[hit], -np.inf).argmax(axis=1)
            best_t[rows] = tn[hit]
            best_idx[rows] = vi
            best_n[rows] = view.normals[plane]
    return best_t, best_idx, best_n


# -- lighting -----------------------------------------------------------------

def sun_from_time(time_of_day: float) -> tuple[np.ndarray, float]:
    """Direction to the sun and its intensity as a function of the hour.

    Azimuth sweeps 15 deg/hour from east (+x) at 6 h toward +z; elevation is
    a sinusoid peaking at 60 deg at noon.  Negative elevation means night:
    intensity clamps to 0 and only ambient light remains.
    """
    az = math.radians(15.0 * (time_of_day - 6.0))
    elev = math.radians(60.0) * math.sin(math.pi * (time_of_day - 6.0) / 12.0)
    direction = np.array([
        math.cos(elev) * math.cos(az),
        math.sin(elev),
        math.cos(elev) * math.sin(az),
    ])
    return direction, max(0.0, math.sin(elev))


# -- rendering ----------------------------------------------------------------

def _camera_rays(pose: Transform, intr: CameraIntrinsics):
    w, h = intr.width, intr.height
    tan_h = math.tan(intr.horizontal_fov / 2.0)
    tan_v = tan_h * h / w
    xs = ((np.arange(w) + 0.5) / w * 2.0 - 1.0) * tan_h
    ys = (1.0 - (np.arange(h) + 0.5) / h * 2.0) * tan_v
    gx, gy = np.meshgrid(xs, ys)
    cam = np.stack([gx, gy, -np.ones_like(gx)], axis=-1).reshape(-1, 3)
    cam /= np.linalg.norm(cam, axis=1, keepdims=True)
    rot = pose.matrix()
    dirs = cam @ rot.T
    forward = -rot[:, 2]
    return dirs, forward


def render(
    world: WorldState,
    pose: Transform,
    intr: CameraIntrinsics,
    env: EnvironmentConfig,
    index: int = 0,
) -> SensorFrame:
    views = world_snapshot(world)
    bvh = build_bvh(views)
    w, h = intr.width, intr.height
    dirs, forward = _camera_rays(pose, intr)
    m = len(dirs)
    origins = np.broadcast_to(pose.translation, (m, 3))
    cos = dirs @ forward
    t_min = intr.near / cos
    t_max = intr.far / cos

    t, idx, normals = raycast(origins, dirs, views, bvh, t_min, t_max)
    hit = idx >= 0
    depth = np.full(m, DEPTH_SENTINEL)
    depth[hit] = t[hit] * cos[hit]

    seg = np.zeros(m, dtype=np.uint16)
    inst = np.zeros(m, dtype=np.uint16)
    labels = np.array([v.label for v in views], dtype=np.uint16) if views else \
        np.zeros(0, dtype=np.uint16)
    if np.any(hit):
        seg[hit] = labels[idx[hit]]
        inst[hit] = (idx[hit] + 1).astype(np.uint16)

    sun_dir, sun_intensity = sun_from_time(env.time_of_day)
    color = np.empty((m, 3))
    color[:] = HORIZON_COLOR * (0.3 + 0.7 * sun_intensity)
    if np.any(hit):
        albedos = np.array([v.albedo for v in views])
        lambert = np.maximum(0.0, normals[hit] @ sun_dir)
        lit = np.ones(int(hit.sum()))
        if sun_intensity > 0.0:
            shade = lambert > 0.0
            if np.any(shade):
                hp = origins[hit][shade] + t[hit][shade, None] * dirs[hit][shade]
                hp = hp + sun_dir * 1e-4
                ns = len(hp)
                st, sidx, _ = raycast(
                    hp, np.broadcast_to(sun_dir, (ns, 3)).copy(), views, bvh,
                    np.zeros(ns), np.full(ns, np.inf),
                )
                occluded = sidx >= 0
                lit_vals = np.ones(ns)
                lit_vals[occluded] = 0.0
                lit[shade] = lit_vals
        shading = AMBIENT + sun_intensity * lambert * lit
        color[hit] = albedos[idx[hit]] * shading[:, None]

    weather = env.weather
    if isinstance(weather, Fog) and weather.density > 0.0:
        att = np.exp(-weather.density * np.where(hit, depth, intr.far))
        color = color * att[:, None] + HORIZON_COLOR * (1.0 - att)[:, None]
    elif isinstance(weather, Rain):
        color = color * (1.0 - RAIN_DIM * weather.intensity)

    color_u8 = np.clip(np.rint(color * 255.0), 0, 255).astype(np.uint8)
    return SensorFrame(
        color=color_u8.reshape(h, w, 3),
        depth=depth.reshape(h, w),
        segmentation=seg.reshape(h, w),
        instance=inst.reshape(h, w),
        pose=pose,
        intrinsics=intr,
        index=index,
    )


# -- file export --------------------------------------------------------------

def quantize_depth(depth: np.ndarray, near: float, far: float) -> np.ndarray:
    """Linear 16-bit quantization over [near, far]; misses map to 65535."""
    miss = ~np.isfinite(depth)
    clipped = np.clip(np.where(miss, near, depth), near, far)
    q = np.rint((clipped - near) / (far - near) * DEPTH_QUANT_MAX)
    q = q.astype(np.uint16)
    q[miss] = DEPTH_MISS_CODE
    return q


def dequantize_depth(q: np.ndarray, near: float, far: float) -> np.ndarray:
    depth = near + q.astype(np.float64) / DEPTH_QUANT_MAX * (far - near)
    depth[q == DEPTH_MISS_CODE] = DEPTH_SENTINEL
    return depth


def write_ppm(path, rgb: np.ndarray):
    h, w, _ = rgb.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode())
        f.write(np.ascontiguousarray(rgb, dtype=np.uint8).tobytes())


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    magic, dims, maxval, pixels = data.split(b"\n", 3)
    if magic != b"P6":
        raise ValueError(f"{path}: not a binary PPM")
    w, h = (int(v) for v in dims.split())
    return np.frombuffer(pixels, dtype=np.uint8, count=w * h * 3).reshape(h, w, 3)


def write_pgm16(path, gray: np.ndarray):
    h, w = gray.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n65535\n".encode())
        f.write(gray.astype(">u2").tobytes())


def read_pgm16(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    magic, dims, maxval, pixels = data.split(b"\n", 3)
    if magic != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h = (int(v) for v in dims.split())
    return np.frombuffer(pixels, dtype=">u2", count=w * h).reshape(h, w).astype(np.uint16)


def export_frame(frame: SensorFrame, directory, index: int) -> dict:
    """Write the color/depth/segmentation triple plus a metadata sidecar.

    Returns the metadata dict (also written to frame_%06d.json).
    """
    import os

    intr = frame.intrinsics
    names = {
        "color": f"color_{index:06d}.ppm",
        "depth": f"depth_{index:06d}.pgm",
        "segmentation": f"seg_{index:06d}.pgm",
    }
    try:
        write_ppm(os.path.join(directory, names["color"]), frame.color)
        write_pgm16(
            os.path.join(directory, names["depth"]),
            quantize_depth(frame.depth, intr.near, intr.far),
        )
        write_pgm16(os.path.join(directory, names["segmentation"]), frame.segmentation)
        meta = {
            "index": index,
            "files": names,
            "pose": {
                "rotation": list(frame.pose.rotation),
                "translation": list(frame.pose.translation),
            },
            "intrinsics": {
                "width": intr.width, "height": intr.height,
                "horizontal_fov": intr.horizontal_fov,
                "near": intr.near, "far": intr.far,
            },
            "depth_quantization": {
                "near": intr.near, "far": intr.far,
                "max_code": DEPTH_QUANT_MAX, "miss_code": DEPTH_MISS_CODE,
            },
        }
        with open(os.path.join(directory, f"frame_{index:06d}.json"), "w") as f:
            json.dump(meta, f, indent=2, sort_keys=True)
            f.write("\n")
    except OSError as exc:
        raise OSError(f"failed writing frame {index} under {directory}: {exc}") from exc
    return meta
