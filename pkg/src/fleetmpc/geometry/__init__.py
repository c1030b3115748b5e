"""Convex-polygon primitives and occupancy-set operations.

All occupancy reasoning in the planner runs on unions of convex CCW polygons.
Pairwise intersection uses a separating-axis test; the hot kernels live in a
compiled extension (``_satcy``) with a numpy fallback (``_satpy``) selected at
import. Set ``FLEETMPC_PURE_PYTHON=1`` to force the fallback.

Conventions: touching boundaries count as intersecting (conservative for
collision checks); the degeneracy tolerance is ``EPS`` = 1e-9 m.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

if os.environ.get("FLEETMPC_PURE_PYTHON"):
    from . import _satpy as _kernel

    KERNEL_BACKEND = "python"
else:
    try:
        from . import _satcy as _kernel  # type: ignore[no-redef]

        KERNEL_BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on build
        from . import _satpy as _kernel  # type: ignore[no-redef]

        KERNEL_BACKEND = "python"

EPS = 1e-9
_AREA_EPS = 1e-12


class GeometryError(ValueError):
    pass


def normalize_angle(a: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


def polygon_area(verts: np.ndarray) -> float:
    """Signed shoelace area (positive for CCW)."""
    x = verts[:, 0]
    y = verts[:, 1]
    xn = np.concatenate([x[1:], x[:1]])
    yn = np.concatenate([y[1:], y[:1]])
    return 0.5 * float(np.dot(x, yn) - np.dot(xn, y))


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain; returns CCW hull vertices of (n, 2) points."""
    pts = np.unique(np.asarray(points, dtype=np.float64), axis=0)
    if len(pts) < 3:
        raise GeometryError("need at least 3 distinct points for a hull")
    # lexicographic sort by (x, y)
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def half(iterable):
        chain: list[np.ndarray] = []
        for p in iterable:
            while len(chain) >= 2:
                o, a = chain[-2], chain[-1]
                if (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0]) <= 0:
                    chain.pop()
                else:
                    break
            chain.append(p)
        return chain

    lower = half(pts)
    upper = half(pts[::-1])
    hull = np.array(lower[:-1] + upper[:-1])
    if len(hull) < 3:
        raise GeometryError("degenerate (collinear) point set")
    return hull


@dataclass(frozen=True)
class ConvexPolygon:
    """Strictly convex polygon, vertices CCW, closed implicitly."""

    verts: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.verts, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise GeometryError("polygon needs an (n>=3, 2) vertex array")
        edges = np.roll(v, -1, axis=0) - v
        if np.any(np.hypot(edges[:, 0], edges[:, 1]) <= EPS):
            raise GeometryError("duplicate consecutive vertices")
        cross = edges[:, 0] * np.roll(edges[:, 1], -1) - edges[:, 1] * np.roll(edges[:, 0], -1)
        # convex up to tolerance: rotation noise may flip an exactly-collinear vertex
        scale2 = 1.0 + float(np.abs(v).max()) ** 2
        if np.any(cross < -1e-12 * scale2):
            raise GeometryError("vertices not convex CCW")
        object.__setattr__(self, "verts", v)

    @classmethod
    def from_points(cls, points: np.ndarray) -> "ConvexPolygon":
        return cls(convex_hull(points))

    @classmethod
    def trusted(cls, verts: np.ndarray) -> "ConvexPolygon":
        """Skip validation; for vertices produced by validity-preserving ops
        (rigid transforms of already-validated polygons)."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "verts", verts)
        return obj

    @classmethod
    def rectangle(cls, cx: float, cy: float, length: float, width: float, yaw: float = 0.0) -> "ConvexPolygon":
        hl, hw = 0.5 * length, 0.5 * width
        base = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
        c, s = math.cos(yaw), math.sin(yaw)
        rot = np.array([[c, -s], [s, c]])
        return cls(base @ rot.T + np.array([cx, cy]))

    @classmethod
    def regular(cls, cx: float, cy: float, radius: float, n: int = 8) -> "ConvexPolygon":
        ang = np.arange(n) * (2.0 * math.pi / n)
        return cls(np.stack([cx + radius * np.cos(ang), cy + radius * np.sin(ang)], axis=1))

    @property
    def aabb(self) -> np.ndarray:
        lo = self.verts.min(axis=0)
        hi = self.verts.max(axis=0)
        return np.array([lo[0], lo[1], hi[0], hi[1]])

    def area(self) -> float:
        return polygon_area(self.verts)

    def centroid(self) -> np.ndarray:
        return self.verts.mean(axis=0)

    def contains_point(self, x: float, y: float, tol: float = EPS) -> bool:
        v = self.verts
        nxt = np.roll(v, -1, axis=0)
        cross = (nxt[:, 0] - v[:, 0]) * (y - v[:, 1]) - (nxt[:, 1] - v[:, 1]) * (x - v[:, 0])
        return bool(np.all(cross >= -tol))


@dataclass
class PolyUnion:
    """Union of convex polygons; may be empty (the empty set)."""

    parts: list[ConvexPolygon] = field(default_factory=list)
    _packed: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.parts = list(self.parts)

    @property
    def is_empty(self) -> bool:
        return not self.parts

    def packed(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(data, offsets, aabbs) layout consumed by the SAT kernels."""
        if self._packed is None:
            if not self.parts:
                data = np.zeros((0, 2))
                off = np.zeros(1, dtype=np.int64)
                aabbs = np.zeros((0, 4))
            else:
                data = np.ascontiguousarray(np.concatenate([p.verts for p in self.parts]))
                off = np.zeros(len(self.parts) + 1, dtype=np.int64)
                np.cumsum([len(p.verts) for p in self.parts], out=off[1:])
                aabbs = np.ascontiguousarray(np.stack([p.aabb for p in self.parts]))
            self._packed = (data, off, aabbs)
        return self._packed

    @property
    def aabb(self) -> np.ndarray | None:
        if self.is_empty:
            return None
        _, _, aabbs = self.packed()
        return np.concatenate([aabbs[:, :2].min(axis=0), aabbs[:, 2:].max(axis=0)])

    def radius_about(self, x: float = 0.0, y: float = 0.0) -> float:
        """Max distance of any vertex from (x, y); 0 for the empty set."""
        if self.is_empty:
            return 0.0
        data, _, _ = self.packed()
        return float(np.hypot(data[:, 0] - x, data[:, 1] - y).max())

    def contains_point(self, x: float, y: float, tol: float = EPS) -> bool:
        return any(p.contains_point(x, y, tol) for p in self.parts)

    def area_upper_bound(self) -> float:
        """Sum of part areas (>= true union area; parts may overlap)."""
        return sum(p.area() for p in self.parts)


@dataclass(frozen=True)
class RigidTransform:
    """Planar rotation about the origin followed by a translation."""

    tx: float
    ty: float
    yaw: float

    def __post_init__(self):
        object.__setattr__(self, "yaw", normalize_angle(self.yaw))

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(0.0, 0.0, 0.0)

    def apply(self, points: np.ndarray) -> np.ndarray:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        rot = np.array([[c, -s], [s, c]])
        return points @ rot.T + np.array([self.tx, self.ty])

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Composition: apply `other` in the local frame, then `self`."""
        p = self.apply(np.array([[other.tx, other.ty]]))[0]
        return RigidTransform(p[0], p[1], self.yaw + other.yaw)

    def inverse(self) -> "RigidTransform":
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return RigidTransform(-(c * self.tx + s * self.ty), -(-s * self.tx + c * self.ty), -self.yaw)


def intersects(a: ConvexPolygon, b: ConvexPolygon) -> bool:
    """SAT intersection test; touching boundaries count as intersecting."""
    aa, bb = a.aabb, b.aabb
    if aa[2] + EPS < bb[0] or bb[2] + EPS < aa[0] or aa[3] + EPS < bb[1] or bb[3] + EPS < aa[1]:
        return False
    return bool(_kernel.convex_overlap(a.verts, b.verts, EPS))


def union_intersects(a: PolyUnion, b: PolyUnion) -> bool:
    """True iff some part of `a` overlaps some part of `b`."""
    if a.is_empty or b.is_empty:
        return False
    aa, bb = a.aabb, b.aabb
    if aa[2] + EPS < bb[0] or bb[2] + EPS < aa[0] or aa[3] + EPS < bb[1] or bb[3] + EPS < aa[1]:
        return False
    ad, ao, aab = a.packed()
    bd, bo, bab = b.packed()
    return bool(_kernel.union_overlap(ad, ao, aab, bd, bo, bab, EPS))


def poly_intersects_union(a: ConvexPolygon, b: PolyUnion) -> bool:
    if b.is_empty:
        return False
    bd, bo, bab = b.packed()
    return bool(_kernel.poly_vs_union(a.verts, bd, bo, bab, EPS))


def apply_transform(u: PolyUnion, t: RigidTransform) -> PolyUnion:
    """Rotate CCW by t.yaw about the origin, then translate; part count kept."""
    return PolyUnion([ConvexPolygon.trusted(t.apply(p.verts)) for p in u.parts])


def pack_unions(unions: list[PolyUnion]) -> tuple[np.ndarray, np.ndarray, np.ndarray] | None:
    """Merge several unions into one packed (data, offsets, aabbs) triple for
    repeated kernel queries; None when all are empty."""
    parts = [p for u in unions for p in u.parts]
    if not parts:
        return None
    data = np.ascontiguousarray(np.concatenate([p.verts for p in parts]))
    off = np.zeros(len(parts) + 1, dtype=np.int64)
    np.cumsum([len(p.verts) for p in parts], out=off[1:])
    aabbs = np.ascontiguousarray(np.stack([p.aabb for p in parts]))
    return data, off, aabbs


def verts_intersect_packed(verts: np.ndarray, packed: tuple) -> bool:
    """SAT query of one raw convex CCW vertex array against a packed union."""
    data, off, aabbs = packed
    return bool(_kernel.poly_vs_union(verts, data, off, aabbs, EPS))


def batch_verts_intersect_packed(w: np.ndarray, w_off: np.ndarray, packed: tuple) -> np.ndarray:
    """Hit mask: for each polygon packed in (w, w_off), whether it overlaps the
    packed union."""
    data, off, aabbs = packed
    hit = np.zeros(len(w_off) - 1, dtype=np.uint8)
    _kernel.multi_vs_union(w, w_off, data, off, aabbs, hit, EPS)
    return hit.astype(bool)


def batch_classify_in_union(w: np.ndarray, w_off: np.ndarray, packed: tuple) -> np.ndarray:
    """For each polygon packed in (w, w_off), classify containment in the
    packed union by vertex membership: 0 = some vertex outside every part
    (not contained), 1 = all vertices in one part (contained), 2 = undecided
    (needs an exact difference test)."""
    data, off, aabbs = packed
    out = np.zeros(len(w_off) - 1, dtype=np.uint8)
    _kernel.classify_in_union(w, w_off, data, off, aabbs, out, EPS)
    return out


def inflate_polygon(p: ConvexPolygon, margin: float) -> ConvexPolygon:
    if margin < 0.0:
        raise GeometryError("inflation margin must be >= 0")
    if margin == 0.0:
        return p
    v = p.verts
    edges = np.roll(v, -1, axis=0) - v
    lens = np.hypot(edges[:, 0], edges[:, 1])
    # outward unit normal of each CCW edge
    n = np.stack([edges[:, 1], -edges[:, 0]], axis=1) / lens[:, None]
    n_prev = np.roll(n, 1, axis=0)
    # miter vertex: offset along the bisector so both adjacent edges shift by margin
    denom = 1.0 + np.sum(n_prev * n, axis=1)
    offset = margin * (n_prev + n) / denom[:, None]
    return ConvexPolygon(v + offset)


def inflate(u: PolyUnion, margin: float) -> PolyUnion:
    """Outward miter offset of every part (superset of the true disk dilation)."""
    if margin < 0.0:
        raise GeometryError("inflation margin must be >= 0")
    if margin == 0.0:
        return u
    return PolyUnion([inflate_polygon(p, margin) for p in u.parts])


def _clip_halfplane(verts: np.ndarray, a: np.ndarray, b: np.ndarray, keep_left: bool) -> np.ndarray | None:
    """Sutherland-Hodgman clip of a convex polygon against the line a->b.

    keep_left keeps the half-plane to the left of a->b (inside for CCW edges);
    otherwise keeps the right. Returns None when the result is empty/degenerate.
    """
    d = b - a
    # cross = d x (p - a); > 0 means p is left of a->b
    cross = d[0] * (verts[:, 1] - a[1]) - d[1] * (verts[:, 0] - a[0])
    inside = cross >= -EPS if keep_left else cross <= EPS
    if not np.any(inside):
        return None
    if np.all(inside):
        return verts
    out: list[np.ndarray] = []
    n = len(verts)
    for i in range(n):
        j = (i + 1) % n
        pi, pj = verts[i], verts[j]
        ci, cj = cross[i], cross[j]
        in_i = bool(inside[i])
        in_j = bool(inside[j])
        if in_i:
            out.append(pi)
        if in_i != in_j:
            t = ci / (ci - cj)
            out.append(pi + t * (pj - pi))
    if len(out) < 3:
        return None
    res = np.array(out)
    # drop near-duplicate consecutive vertices introduced by clipping
    prev = np.vstack([res[-1:], res[:-1]])
    keep = np.hypot(res[:, 0] - prev[:, 0], res[:, 1] - prev[:, 1]) > EPS
    res = res[keep]
    if len(res) < 3 or abs(polygon_area(res)) <= _AREA_EPS:
        return None
    return res


def _subtract_convex(piece: np.ndarray, part: ConvexPolygon) -> list[np.ndarray]:
    """Convex piece minus convex part, as a list of convex vertex arrays."""
    remainder = piece
    out: list[np.ndarray] = []
    pv = part.verts
    n = len(pv)
    for i in range(n):
        a, b = pv[i], pv[(i + 1) % n]
        outside = _clip_halfplane(remainder, a, b, keep_left=False)
        if outside is not None:
            out.append(outside)
        inside = _clip_halfplane(remainder, a, b, keep_left=True)
        if inside is None:
            return out
        remainder = inside
    # remainder lies inside `part` and is removed
    return out


def contains(outer: PolyUnion, inner: ConvexPolygon) -> bool:
    """True iff `inner` minus `outer` has no piece of significant area."""
    od, oo, oab = outer.packed()
    return bool(_kernel.poly_in_union(inner.verts, od, oo, oab, EPS))


def _contains_reference(outer: PolyUnion, inner: ConvexPolygon, tol: float = 1e-9) -> bool:
    """Kernel-independent containment via explicit convex differences; kept as
    an oracle for testing the kernels."""
    pieces = [inner.verts]
    for part in outer.parts:
        nxt: list[np.ndarray] = []
        for piece in pieces:
            nxt.extend(_subtract_convex(piece, part))
        pieces = nxt
        if not pieces:
            return True
    return all(abs(polygon_area(p)) <= tol * tol for p in pieces)
