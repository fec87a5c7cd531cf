"""Convex-solid primitives: half-space clipping, volumes, shared faces, transforms.

Polyhedra are stored as explicit vertex arrays plus face index loops
(counter-clockwise seen from outside).  Clipping works face by face with a
shared edge-intersection cache so the result stays closed, then adds a cap
face on the cutting plane.  All operations are pure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Tolerances: below scene feature scale (walls are >= 0.1 m thick).
SLIVER_VOLUME = 1e-12   # m^3: clip results thinner than this count as empty
COPLANAR_TOL = 1e-6     # m:   face pairs closer than this may share area
NORMAL_ALIGN_TOL = 1e-4  # allowed deviation from exact anti-alignment
_PLANE_TOL = 1e-9       # m:   vertex-on-plane classification during clipping


class GeometryError(ValueError):
    pass


def vec3(x: float, y: float, z: float) -> np.ndarray:
    return np.array([x, y, z], dtype=float)


def _unit(v: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(v))
    if n < 1e-15:
        raise GeometryError("cannot normalize zero vector")
    return v / n


@dataclass(frozen=True)
class HalfSpace:
    """Points p with dot(normal, p) <= offset are inside."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        if abs(float(np.linalg.norm(n)) - 1.0) > 1e-9:
            raise GeometryError("half-space normal must be unit length")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    def flipped(self) -> "HalfSpace":
        return HalfSpace(-self.normal, -self.offset)

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.normal - self.offset

    @staticmethod
    def bisector(toward: np.ndarray, away: np.ndarray) -> "HalfSpace":
        """Half-space of points at least as close to `toward` as to `away`."""
        normal = _unit(np.asarray(away, float) - np.asarray(toward, float))
        mid = 0.5 * (np.asarray(toward, float) + np.asarray(away, float))
        return HalfSpace(normal, float(normal @ mid))


def _newell_normal(pts: np.ndarray) -> np.ndarray:
    nxt = np.roll(pts, -1, axis=0)
    n = np.array([
        np.sum((pts[:, 1] - nxt[:, 1]) * (pts[:, 2] + nxt[:, 2])),
        np.sum((pts[:, 2] - nxt[:, 2]) * (pts[:, 0] + nxt[:, 0])),
        np.sum((pts[:, 0] - nxt[:, 0]) * (pts[:, 1] + nxt[:, 1])),
    ])
    return n


class ConvexPolyhedron:
    """Closed convex solid: vertices + CCW-from-outside face loops."""

    __slots__ = ("vertices", "faces", "_planes", "_volume", "_centroid", "_aabb")

    def __init__(self, vertices, faces):
        self.vertices = np.asarray(vertices, dtype=float)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise GeometryError("vertices must be an (N, 3) array")
        if not np.isfinite(self.vertices).all():
            raise GeometryError("non-finite vertex coordinates")
        self.faces = [tuple(int(i) for i in f) for f in faces]
        self._planes = None
        self._volume = None
        self._centroid = None
        self._aabb = None

    @classmethod
    def box(cls, lo, hi) -> "ConvexPolyhedron":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if not np.all(hi > lo):
            raise GeometryError("box requires hi > lo componentwise")
        x0, y0, z0 = lo
        x1, y1, z1 = hi
        verts = [
            (x0, y0, z0), (x1, y0, z0), (x1, y1, z0), (x0, y1, z0),
            (x0, y0, z1), (x1, y0, z1), (x1, y1, z1), (x0, y1, z1),
        ]
        faces = [
            (0, 3, 2, 1),  # z = z0
            (4, 5, 6, 7),  # z = z1
            (0, 1, 5, 4),  # y = y0
            (2, 3, 7, 6),  # y = y1
            (0, 4, 7, 3),  # x = x0
            (1, 2, 6, 5),  # x = x1
        ]
        return cls(verts, faces)

    # -- cached derived quantities -------------------------------------

    @property
    def planes(self) -> list[HalfSpace]:
        if self._planes is None:
            planes = []
            for face in self.faces:
                pts = self.vertices[list(face)]
                n = _unit(_newell_normal(pts))
                planes.append(HalfSpace(n, float(n @ pts.mean(axis=0))))
            self._planes = planes
        return self._planes

    def volume(self) -> float:
        if self._volume is None:
            self._compute_volume_centroid()
        return self._volume

    def centroid(self) -> np.ndarray:
        if self._centroid is None:
            self._compute_volume_centroid()
        return self._centroid

    def _compute_volume_centroid(self):
        # Divergence theorem over the fan triangulation of each face.
        vol = 0.0
        moment = np.zeros(3)
        for face in self.faces:
            pts = self.vertices[list(face)]
            a = pts[0]
            for k in range(1, len(pts) - 1):
                b, c = pts[k], pts[k + 1]
                v6 = float(a @ np.cross(b, c))
                vol += v6
                moment += v6 * (a + b + c)
        self._volume = vol / 6.0
        if abs(vol) > 1e-300:
            self._centroid = moment / (4.0 * vol)
        else:
            self._centroid = self.vertices.mean(axis=0)

    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        if self._aabb is None:
            self._aabb = (self.vertices.min(axis=0), self.vertices.max(axis=0))
        return self._aabb

    # -- queries --------------------------------------------------------

    def contains(self, points: np.ndarray, tol: float = 1e-7) -> np.ndarray:
        """Boolean mask: point inside (or on) every face plane within tol."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        inside = np.ones(len(points), dtype=bool)
        for hs in self.planes:
            inside &= hs.signed_distance(points) <= tol
        return inside

    def translated(self, t) -> "ConvexPolyhedron":
        return ConvexPolyhedron(self.vertices + np.asarray(t, float), self.faces)

    def validate(self, tol: float = 1e-7):
        """Raise GeometryError unless convex, closed and non-negative volume."""
        if len(self.faces) < 4:
            raise GeometryError("fewer than 4 faces")
        for hs in self.planes:
            if np.any(hs.signed_distance(self.vertices) > tol):
                raise GeometryError("vertex outside a face plane: not convex")
        edge_count: dict[tuple[int, int], int] = {}
        for face in self.faces:
            for k in range(len(face)):
                i, j = face[k], face[(k + 1) % len(face)]
                if i == j:
                    raise GeometryError("degenerate edge in face loop")
                key = (i, j) if i < j else (j, i)
                edge_count[key] = edge_count.get(key, 0) + 1
        if any(c != 2 for c in edge_count.values()):
            raise GeometryError("not closed: an edge is not shared by exactly 2 faces")
        if self.volume() < 0:
            raise GeometryError("negative volume")
        return self


def clip_convex(poly: ConvexPolyhedron, hs: HalfSpace) -> ConvexPolyhedron | None:
    """Intersect a convex polyhedron with a half-space.

    Returns None when the intersection is empty or a sliver below
    SLIVER_VOLUME.  When the polyhedron already lies entirely inside the
    half-space the input object is returned unchanged.
    """
    d = hs.signed_distance(poly.vertices)
    if np.all(d <= _PLANE_TOL):
        return poly
    if np.all(d >= -_PLANE_TOL):
        return None

    side = np.zeros(len(d), dtype=int)
    side[d > _PLANE_TOL] = 1
    side[d < -_PLANE_TOL] = -1

    new_verts: list[np.ndarray] = []
    kept: dict[int, int] = {}
    crossings: dict[tuple[int, int], int] = {}

    def keep(i: int) -> int:
        idx = kept.get(i)
        if idx is None:
            idx = len(new_verts)
            new_verts.append(poly.vertices[i])
            kept[i] = idx
        return idx

    def cross(i: int, j: int) -> int:
        key = (i, j) if i < j else (j, i)
        idx = crossings.get(key)
        if idx is None:
            t = d[i] / (d[i] - d[j])
            p = poly.vertices[i] + t * (poly.vertices[j] - poly.vertices[i])
            idx = len(new_verts)
            new_verts.append(p)
            crossings[key] = idx
        return idx

    new_faces: list[list[int]] = []
    for face in poly.faces:
        out: list[int] = []
        n = len(face)
        for k in range(n):
            i, j = face[k], face[(k + 1) % n]
            if side[i] <= 0:
                out.append(keep(i))
            if side[i] * side[j] < 0:
                out.append(cross(i, j))
        cleaned = [v for k, v in enumerate(out) if v != out[k - 1]]
        if len(cleaned) >= 3:
            new_faces.append(cleaned)

    if not new_faces:
        return None

    verts = np.array(new_verts)
    # Cap face: every new vertex sitting on the cutting plane, ordered CCW
    # around the outward normal.
    on_plane = np.flatnonzero(np.abs(hs.signed_distance(verts)) <= 1e-8)
    if len(on_plane) >= 3:
        c = verts[on_plane].mean(axis=0)
        axis = np.argmin(np.abs(hs.normal))
        ref = np.zeros(3)
        ref[axis] = 1.0
        u = _unit(np.cross(hs.normal, ref))
        v = np.cross(hs.normal, u)
        rel = verts[on_plane] - c
        ang = np.arctan2(rel @ v, rel @ u)
        cap = [int(on_plane[i]) for i in np.argsort(ang, kind="stable")]
        new_faces.append(cap)

    # Prune vertices orphaned by dropped faces.
    used = sorted({i for f in new_faces for i in f})
    if len(used) < len(verts):
        remap = {old: new for new, old in enumerate(used)}
        verts = verts[used]
        new_faces = [[remap[i] for i in f] for f in new_faces]

    result = ConvexPolyhedron(verts, new_faces)
    if result.volume() < SLIVER_VOLUME:
        return None
    return result


def clip_many(poly: ConvexPolyhedron, half_spaces) -> ConvexPolyhedron | None:
    for hs in half_spaces:
        poly = clip_convex(poly, hs)
        if poly is None:
            return None
    return poly


def intersect_box(poly: ConvexPolyhedron, lo, hi) -> ConvexPolyhedron | None:
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    planes = []
    for axis in range(3):
        n = np.zeros(3)
        n[axis] = 1.0
        planes.append(HalfSpace(n, float(hi[axis])))
        planes.append(HalfSpace(-n, float(-lo[axis])))
    return clip_many(poly, planes)


# -- shared-face contact ---------------------------------------------------

def _plane_basis(n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    axis = np.argmin(np.abs(n))
    ref = np.zeros(3)
    ref[axis] = 1.0
    u = _unit(np.cross(n, ref))
    return u, np.cross(n, u)


def _area_2d(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _clip_poly_2d(subject: list[np.ndarray], clip: np.ndarray) -> list[np.ndarray]:
    """Sutherland-Hodgman: clip a polygon by a CCW convex polygon."""
    out = subject
    m = len(clip)
    for k in range(m):
        a, b = clip[k], clip[(k + 1) % m]
        edge = b - a
        inp, out = out, []
        if not inp:
            break
        prev = inp[-1]
        d_prev = edge[0] * (prev[1] - a[1]) - edge[1] * (prev[0] - a[0])
        for cur in inp:
            d_cur = edge[0] * (cur[1] - a[1]) - edge[1] * (cur[0] - a[0])
            if (d_cur >= 0) != (d_prev >= 0):
                denom = d_prev - d_cur
                if abs(denom) > 1e-15:
                    t = d_prev / denom
                    out.append(prev + t * (cur - prev))
            if d_cur >= 0:
                out.append(cur)
            prev, d_prev = cur, d_cur
    return out


def shared_face_contact(
    a: ConvexPolyhedron,
    b: ConvexPolyhedron,
    dist_tol: float = COPLANAR_TOL,
    normal_tol: float = NORMAL_ALIGN_TOL,
) -> tuple[float, np.ndarray | None]:
    """Total overlap area of coplanar opposite-facing face pairs, plus the
    area-weighted centroid of the contact (None when area is zero)."""
    total = 0.0
    moment = np.zeros(3)
    for fa, pa in zip(a.faces, a.planes):
        pts_a = a.vertices[list(fa)]
        for fb, pb in zip(b.faces, b.planes):
            if float(pa.normal @ pb.normal) > -(1.0 - normal_tol):
                continue
            # pb.normal ~ -pa.normal, so coplanarity means offsets cancel
            if abs(pa.offset + pb.offset) > dist_tol:
                continue
            pts_b = b.vertices[list(fb)]
            u, v = _plane_basis(pa.normal)
            a2 = np.column_stack([pts_a @ u, pts_a @ v])
            b2 = np.column_stack([pts_b @ u, pts_b @ v])
            if _area_2d(a2) < 0:
                a2 = a2[::-1]
            if _area_2d(b2) < 0:
                b2 = b2[::-1]
            overlap = _clip_poly_2d([p for p in a2], b2)
            if len(overlap) >= 3:
                ov = np.array(overlap)
                area = abs(_area_2d(ov))
                if area > 0:
                    c2 = ov.mean(axis=0)
                    c3 = c2[0] * u + c2[1] * v + pa.offset * pa.normal
                    total += area
                    moment += area * c3
    if total <= 0:
        return 0.0, None
    return total, moment / total


def shared_face_area(a: ConvexPolyhedron, b: ConvexPolyhedron, **kw) -> float:
    return shared_face_contact(a, b, **kw)[0]


# -- quaternions & transforms ----------------------------------------------

def quat_identity() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(q))
    if n < 1e-15:
        return quat_identity()
    return q / n


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = _unit(np.asarray(axis, float))
    h = 0.5 * angle
    s = math.sin(h)
    return np.array([math.cos(h), axis[0] * s, axis[1] * s, axis[2] * s])


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quats_to_matrices(q: np.ndarray) -> np.ndarray:
    """Batched quaternion -> rotation matrix, q shape (N, 4)."""
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    m = np.empty((len(q), 3, 3))
    m[:, 0, 0] = 1 - 2 * (y * y + z * z)
    m[:, 0, 1] = 2 * (x * y - w * z)
    m[:, 0, 2] = 2 * (x * z + w * y)
    m[:, 1, 0] = 2 * (x * y + w * z)
    m[:, 1, 1] = 1 - 2 * (x * x + z * z)
    m[:, 1, 2] = 2 * (y * z - w * x)
    m[:, 2, 0] = 2 * (x * z - w * y)
    m[:, 2, 1] = 2 * (y * z + w * x)
    m[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return m


@dataclass
class Transform:
    """Rigid transform: unit quaternion (w, x, y, z) plus translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=float)
        self.translation = np.asarray(self.translation, dtype=float)
        if abs(float(np.linalg.norm(self.rotation)) - 1.0) > 1e-9:
            raise GeometryError("transform rotation must be a unit quaternion")

    @classmethod
    def identity(cls) -> "Transform":
        return cls(quat_identity(), np.zeros(3))

    def matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, float) @ self.matrix().T + self.translation

    def compose(self, other: "Transform") -> "Transform":
        """self after other: (self ∘ other)(p) = self(other(p))."""
        return Transform(
            quat_normalize(quat_multiply(self.rotation, other.rotation)),
            self.apply(other.translation),
        )
