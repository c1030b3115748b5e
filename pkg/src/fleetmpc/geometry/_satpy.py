"""Pure-Python (numpy) separating-axis kernels.

Fallback used when the compiled extension is unavailable. Same contract as
``_satcy``: polygons are C-contiguous (n, 2) float64 vertex arrays in CCW
order; a pair counts as intersecting unless a separating axis leaves a gap
larger than ``eps`` (touching boundaries intersect).
"""

import numpy as np


def _separated_on_edges(a: np.ndarray, b: np.ndarray, eps: float) -> bool:
    """True if some edge normal of `a` separates `a` from `b` by more than eps."""
    edges = np.roll(a, -1, axis=0) - a
    # outward normals for CCW polygons: (dy, -dx)
    normals = np.stack([edges[:, 1], -edges[:, 0]], axis=1)
    proj_a = a @ normals.T
    proj_b = b @ normals.T
    return bool(np.any(proj_b.min(axis=0) > proj_a.max(axis=0) + eps * np.linalg.norm(normals, axis=1)))


def convex_overlap(a: np.ndarray, b: np.ndarray, eps: float = 1e-9) -> bool:
    """Separating-axis intersection test for two convex CCW polygons."""
    if _separated_on_edges(a, b, eps):
        return False
    if _separated_on_edges(b, a, eps):
        return False
    return True


def union_overlap(
    a_data: np.ndarray,
    a_off: np.ndarray,
    a_aabb: np.ndarray,
    b_data: np.ndarray,
    b_off: np.ndarray,
    b_aabb: np.ndarray,
    eps: float = 1e-9,
) -> bool:
    """True iff any part of packed union A overlaps any part of packed union B.

    `*_data` concatenates vertex rows, `*_off` holds part boundaries
    (len = n_parts + 1), `*_aabb` is (n_parts, 4) [xmin, ymin, xmax, ymax].
    """
    na = len(a_off) - 1
    nb = len(b_off) - 1
    for i in range(na):
        ax0, ay0, ax1, ay1 = a_aabb[i]
        pa = a_data[a_off[i]:a_off[i + 1]]
        for j in range(nb):
            bx0, by0, bx1, by1 = b_aabb[j]
            if ax1 + eps < bx0 or bx1 + eps < ax0 or ay1 + eps < by0 or by1 + eps < ay0:
                continue
            pb = b_data[b_off[j]:b_off[j + 1]]
            if convex_overlap(pa, pb, eps):
                return True
    return False


def multi_vs_union(
    w: np.ndarray,
    w_off: np.ndarray,
    b_data: np.ndarray,
    b_off: np.ndarray,
    b_aabb: np.ndarray,
    hit: np.ndarray,
    eps: float = 1e-9,
) -> None:
    """For each polygon packed in `w`/`w_off`, set hit[i] = 1 iff it overlaps
    any part of the packed union B."""
    for i in range(len(w_off) - 1):
        part = w[w_off[i]:w_off[i + 1]]
        hit[i] = 1 if poly_vs_union(part, b_data, b_off, b_aabb, eps) else 0


def classify_in_union(
    w: np.ndarray,
    w_off: np.ndarray,
    d_data: np.ndarray,
    d_off: np.ndarray,
    d_aabb: np.ndarray,
    out: np.ndarray,
    eps: float = 1e-9,
) -> None:
    """Vertex-containment classification of each packed polygon against a
    packed union of convex parts. out[i] is 0 if some vertex lies outside
    every part (the polygon cannot be contained), 1 if all vertices lie in
    one single part (the polygon is contained), 2 otherwise (undecided)."""
    nd = len(d_off) - 1
    parts = []
    for j in range(nd):
        pv = d_data[d_off[j]:d_off[j + 1]]
        nxt = np.vstack([pv[1:], pv[:1]])
        parts.append((pv, nxt[:, 0] - pv[:, 0], nxt[:, 1] - pv[:, 1]))
    for i in range(len(w_off) - 1):
        verts = w[w_off[i]:w_off[i + 1]]
        covered = np.zeros(len(verts), dtype=bool)
        out[i] = 0
        for j, (pv, ex, ey) in enumerate(parts):
            cross = ex[:, None] * (verts[None, :, 1] - pv[:, 1, None]) - ey[:, None] * (
                verts[None, :, 0] - pv[:, 0, None]
            )
            in_part = np.all(cross >= -eps, axis=0)
            if bool(in_part.all()):
                out[i] = 1
                break
            covered |= in_part
        if out[i] != 1:
            out[i] = 2 if bool(covered.all()) else 0


def _clip(verts: list, ax: float, ay: float, nx: float, ny: float, eps: float) -> list:
    """Clip a convex polygon (list of (x, y)) to the half-plane (p - a)·n >= -eps."""
    if not verts:
        return []
    out = []
    jx, jy = verts[-1]
    dj = (jx - ax) * nx + (jy - ay) * ny
    for ix, iy in verts:
        di = (ix - ax) * nx + (iy - ay) * ny
        if dj >= -eps:
            out.append((jx, jy))
        if (di >= -eps) != (dj >= -eps):
            t = dj / (dj - di)
            out.append((jx + t * (ix - jx), jy + t * (iy - jy)))
        jx, jy, dj = ix, iy, di
    return out


def _signed_area(verts: list) -> float:
    if len(verts) < 3:
        return 0.0
    a = 0.0
    jx, jy = verts[-1]
    for ix, iy in verts:
        a += jx * iy - ix * jy
        jx, jy = ix, iy
    return 0.5 * a


def poly_in_union(
    a: np.ndarray,
    b_data: np.ndarray,
    b_off: np.ndarray,
    b_aabb: np.ndarray,
    eps: float = 1e-9,
) -> bool:
    """True iff convex polygon `a` is contained in the union of the packed
    convex parts, up to a sliver-area tolerance. Peels each part off the
    polygon and checks that nothing of significant area remains."""
    tol = 1e-12
    work = [[(float(x), float(y)) for x, y in a]]
    for j in range(len(b_off) - 1):
        if not work:
            return True
        pv = b_data[b_off[j]:b_off[j + 1]]
        nxt = []
        for piece in work:
            cur = piece
            for p in range(len(pv)):
                axp, ayp = pv[p]
                bxp, byp = pv[(p + 1) % len(pv)]
                # inward-left normal of the CCW edge
                nx, ny = ayp - byp, bxp - axp
                outside = _clip(cur, axp, ayp, -nx, -ny, eps)
                if len(outside) >= 3 and _signed_area(outside) > tol:
                    nxt.append(outside)
                cur = _clip(cur, axp, ayp, nx, ny, eps)
                if len(cur) < 3:
                    break
        work = nxt
    return not work


def poly_vs_union(
    a: np.ndarray,
    b_data: np.ndarray,
    b_off: np.ndarray,
    b_aabb: np.ndarray,
    eps: float = 1e-9,
) -> bool:
    """True iff convex polygon `a` overlaps any part of the packed union B."""
    ax0, ay0 = a.min(axis=0)
    ax1, ay1 = a.max(axis=0)
    nb = len(b_off) - 1
    for j in range(nb):
        bx0, by0, bx1, by1 = b_aabb[j]
        if ax1 + eps < bx0 or bx1 + eps < ax0 or ay1 + eps < by0 or by1 + eps < ay0:
            continue
        if convex_overlap(a, b_data[b_off[j]:b_off[j + 1]], eps):
            return True
    return False
