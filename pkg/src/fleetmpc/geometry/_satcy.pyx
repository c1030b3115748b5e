# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled separating-axis kernels (hot path of all occupancy checks).

Same contract as the pure-Python fallback ``_satpy``: convex CCW polygons as
C-contiguous (n, 2) float64 arrays; touching boundaries count as
intersecting; a gap must exceed ``eps`` for separation.
"""

from libc.math cimport sqrt
from libc.stdlib cimport free, malloc


cdef bint _separated_on_edges(const double[:, ::1] a, const double[:, ::1] b,
                              double eps) noexcept nogil:
    cdef Py_ssize_t na = a.shape[0]
    cdef Py_ssize_t nb = b.shape[0]
    cdef Py_ssize_t i, j, inext
    cdef double nx, ny, nlen
    cdef double pa, amax, pb, bmin
    for i in range(na):
        inext = i + 1
        if inext == na:
            inext = 0
        # outward normal of CCW edge i
        nx = a[inext, 1] - a[i, 1]
        ny = a[i, 0] - a[inext, 0]
        amax = a[0, 0] * nx + a[0, 1] * ny
        for j in range(1, na):
            pa = a[j, 0] * nx + a[j, 1] * ny
            if pa > amax:
                amax = pa
        bmin = b[0, 0] * nx + b[0, 1] * ny
        for j in range(1, nb):
            pb = b[j, 0] * nx + b[j, 1] * ny
            if pb < bmin:
                bmin = pb
        nlen = sqrt(nx * nx + ny * ny)
        if bmin > amax + eps * nlen:
            return True
    return False


cdef bint _convex_overlap(const double[:, ::1] a, const double[:, ::1] b,
                          double eps) noexcept nogil:
    if _separated_on_edges(a, b, eps):
        return False
    if _separated_on_edges(b, a, eps):
        return False
    return True


def convex_overlap(const double[:, ::1] a, const double[:, ::1] b,
                   double eps=1e-9):
    """Separating-axis intersection test for two convex CCW polygons."""
    return bool(_convex_overlap(a, b, eps))


def union_overlap(const double[:, ::1] a_data, const long[::1] a_off,
                  const double[:, ::1] a_aabb,
                  const double[:, ::1] b_data, const long[::1] b_off,
                  const double[:, ::1] b_aabb,
                  double eps=1e-9):
    """True iff any part of packed union A overlaps any part of packed union B."""
    cdef Py_ssize_t na = a_off.shape[0] - 1
    cdef Py_ssize_t nb = b_off.shape[0] - 1
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(na):
            for j in range(nb):
                if (a_aabb[i, 2] + eps < b_aabb[j, 0]
                        or b_aabb[j, 2] + eps < a_aabb[i, 0]
                        or a_aabb[i, 3] + eps < b_aabb[j, 1]
                        or b_aabb[j, 3] + eps < a_aabb[i, 1]):
                    continue
                if _convex_overlap(a_data[a_off[i]:a_off[i + 1]],
                                   b_data[b_off[j]:b_off[j + 1]], eps):
                    with gil:
                        return True
    return False


def multi_vs_union(const double[:, ::1] w, const long[::1] w_off,
                   const double[:, ::1] b_data, const long[::1] b_off,
                   const double[:, ::1] b_aabb,
                   unsigned char[::1] hit,
                   double eps=1e-9):
    """For each polygon packed in `w`/`w_off`, set hit[i] = 1 iff it overlaps
    any part of the packed union B."""
    cdef Py_ssize_t nw = w_off.shape[0] - 1
    cdef Py_ssize_t nb = b_off.shape[0] - 1
    cdef Py_ssize_t i, j, k
    cdef double ax0, ay0, ax1, ay1
    with nogil:
        for i in range(nw):
            hit[i] = 0
            ax0 = w[w_off[i], 0]
            ay0 = w[w_off[i], 1]
            ax1 = ax0
            ay1 = ay0
            for k in range(w_off[i] + 1, w_off[i + 1]):
                if w[k, 0] < ax0:
                    ax0 = w[k, 0]
                if w[k, 0] > ax1:
                    ax1 = w[k, 0]
                if w[k, 1] < ay0:
                    ay0 = w[k, 1]
                if w[k, 1] > ay1:
                    ay1 = w[k, 1]
            for j in range(nb):
                if (ax1 + eps < b_aabb[j, 0] or b_aabb[j, 2] + eps < ax0
                        or ay1 + eps < b_aabb[j, 1] or b_aabb[j, 3] + eps < ay0):
                    continue
                if _convex_overlap(w[w_off[i]:w_off[i + 1]],
                                   b_data[b_off[j]:b_off[j + 1]], eps):
                    hit[i] = 1
                    break


DEF MAXV = 128  # max vertices of an intermediate clip polygon

cdef Py_ssize_t _clip_buf(const double* px, const double* py, Py_ssize_t n,
                          double ax, double ay, double nx, double ny,
                          double* qx, double* qy, double eps) noexcept nogil:
    """Clip polygon (px, py) to the half-plane (p - a)·n >= 0; result in (qx, qy)."""
    cdef Py_ssize_t i, j, m = 0
    cdef double di, dj, t
    if n == 0:
        return 0
    j = n - 1
    dj = (px[j] - ax) * nx + (py[j] - ay) * ny
    for i in range(n):
        di = (px[i] - ax) * nx + (py[i] - ay) * ny
        if dj >= -eps:
            if m < MAXV:
                qx[m] = px[j]
                qy[m] = py[j]
                m += 1
        if (di >= -eps) != (dj >= -eps):
            t = dj / (dj - di)
            if m < MAXV:
                qx[m] = px[j] + t * (px[i] - px[j])
                qy[m] = py[j] + t * (py[i] - py[j])
                m += 1
        j = i
        dj = di
    return m


cdef double _area_buf(const double* px, const double* py, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double a = 0.0
    if n < 3:
        return 0.0
    j = n - 1
    for i in range(n):
        a += px[j] * py[i] - px[i] * py[j]
        j = i
    return 0.5 * a


DEF NSLAB = 512  # residual pieces per worklist generation

cdef bint _all_inside_part(const double* px, const double* py, Py_ssize_t n,
                           const double[:, ::1] b_data, Py_ssize_t e0,
                           Py_ssize_t e1, double eps) noexcept nogil:
    """All n points inside (within eps of) the convex CCW part b[e0:e1]."""
    cdef Py_ssize_t p, i
    cdef double ax, ay, nx, ny
    for p in range(e0, e1):
        ax = b_data[p, 0]
        ay = b_data[p, 1]
        if p + 1 == e1:
            nx = ay - b_data[e0, 1]
            ny = b_data[e0, 0] - ax
        else:
            nx = ay - b_data[p + 1, 1]
            ny = b_data[p + 1, 0] - ax
        for i in range(n):
            if (px[i] - ax) * nx + (py[i] - ay) * ny < -eps:
                return False
    return True


def poly_in_union(const double[:, ::1] a,
                  const double[:, ::1] b_data, const long[::1] b_off,
                  const double[:, ::1] b_aabb,
                  double eps=1e-9):
    """True iff convex polygon `a` is contained in the union of the packed
    convex parts, up to a sliver-area tolerance. Works by peeling: clip away
    each part in turn and check that nothing of significant area remains."""
    cdef Py_ssize_t nb = b_off.shape[0] - 1
    cdef Py_ssize_t na = a.shape[0]
    # worklist of residual convex pieces, in heap slabs (work half + staging half)
    cdef double* wx = <double*> malloc(2 * NSLAB * MAXV * sizeof(double))
    cdef double* wy = <double*> malloc(2 * NSLAB * MAXV * sizeof(double))
    cdef Py_ssize_t* wn = <Py_ssize_t*> malloc(2 * NSLAB * sizeof(Py_ssize_t))
    cdef Py_ssize_t n_work = 1, n_next, i, j, k, m, e0, e1, p
    cdef double tmpx[MAXV]
    cdef double tmpy[MAXV]
    cdef double curx[MAXV]
    cdef double cury[MAXV]
    cdef Py_ssize_t ncur, nout
    cdef double ax, ay, nx, ny, tol
    cdef double px0, py0, px1, py1
    cdef bint overflow = False
    if wx == NULL or wy == NULL or wn == NULL:
        free(wx); free(wy); free(wn)
        raise MemoryError()
    if na > MAXV:
        free(wx); free(wy); free(wn)
        raise ValueError("polygon too large for containment kernel")
    tol = 1e-12
    with nogil:
        for i in range(na):
            wx[i] = a[i, 0]
            wy[i] = a[i, 1]
        wn[0] = na
        for j in range(nb):
            if n_work == 0 or overflow:
                break
            e0 = b_off[j]
            e1 = b_off[j + 1]
            n_next = 0
            for k in range(n_work):
                ncur = wn[k]
                for i in range(ncur):
                    curx[i] = wx[k * MAXV + i]
                    cury[i] = wy[k * MAXV + i]
                # piece AABB vs part AABB: disjoint means the peel is a no-op
                px0 = curx[0]; py0 = cury[0]; px1 = curx[0]; py1 = cury[0]
                for i in range(1, ncur):
                    if curx[i] < px0: px0 = curx[i]
                    if curx[i] > px1: px1 = curx[i]
                    if cury[i] < py0: py0 = cury[i]
                    if cury[i] > py1: py1 = cury[i]
                if (px1 + eps < b_aabb[j, 0] or b_aabb[j, 2] + eps < px0
                        or py1 + eps < b_aabb[j, 1] or b_aabb[j, 3] + eps < py0):
                    if n_next >= NSLAB:
                        overflow = True
                        break
                    for m in range(ncur):
                        wx[(NSLAB + n_next) * MAXV + m] = curx[m]
                        wy[(NSLAB + n_next) * MAXV + m] = cury[m]
                    wn[NSLAB + n_next] = ncur
                    n_next += 1
                    continue
                # fully inside part j: piece is covered, drop it
                if _all_inside_part(curx, cury, ncur, b_data, e0, e1, eps):
                    continue
                # peel part j off piece k: emit the portion outside each edge,
                # keep clipping the inside remainder
                for p in range(e0, e1):
                    ax = b_data[p, 0]
                    ay = b_data[p, 1]
                    # inward-left normal of CCW edge (a -> next): (-ey, ex)
                    if p + 1 == e1:
                        nx = ay - b_data[e0, 1]
                        ny = b_data[e0, 0] - ax
                    else:
                        nx = ay - b_data[p + 1, 1]
                        ny = b_data[p + 1, 0] - ax
                    # portion strictly outside this edge survives the peel
                    nout = _clip_buf(curx, cury, ncur, ax, ay, -nx, -ny, tmpx, tmpy, eps)
                    if nout >= 3 and _area_buf(tmpx, tmpy, nout) > tol:
                        if n_next >= NSLAB:
                            overflow = True
                            break
                        for m in range(nout):
                            wx[(NSLAB + n_next) * MAXV + m] = tmpx[m]
                            wy[(NSLAB + n_next) * MAXV + m] = tmpy[m]
                        wn[NSLAB + n_next] = nout
                        n_next += 1
                    ncur = _clip_buf(curx, cury, ncur, ax, ay, nx, ny, tmpx, tmpy, eps)
                    for m in range(ncur):
                        curx[m] = tmpx[m]
                        cury[m] = tmpy[m]
                    if ncur < 3:
                        break
                if overflow:
                    break
                # the remainder inside part j is covered; drop it
            # move surviving pieces from the staging half to the work half
            for k in range(n_next):
                for m in range(wn[NSLAB + k]):
                    wx[k * MAXV + m] = wx[(NSLAB + k) * MAXV + m]
                    wy[k * MAXV + m] = wy[(NSLAB + k) * MAXV + m]
                wn[k] = wn[NSLAB + k]
            n_work = n_next
    free(wx); free(wy); free(wn)
    if overflow:
        return False  # too fragmented: give up conservatively
    return n_work == 0


def classify_in_union(const double[:, ::1] w, const long[::1] w_off,
                      const double[:, ::1] d_data, const long[::1] d_off,
                      const double[:, ::1] d_aabb,
                      unsigned char[::1] out,
                      double eps=1e-9):
    """Vertex-containment classification of each packed polygon against a
    packed union of convex parts. out[i] is 0 if some vertex lies outside
    every part (the polygon cannot be contained), 1 if all vertices lie in
    one single part (the polygon is contained), 2 otherwise (undecided)."""
    cdef Py_ssize_t nw = w_off.shape[0] - 1
    cdef Py_ssize_t nd = d_off.shape[0] - 1
    cdef Py_ssize_t i, j, k, m, n, p0, p1
    cdef double px, py, ex, ey, cr
    cdef bint inside
    cdef Py_ssize_t in_count
    cdef unsigned char cov[64]
    with nogil:
        for i in range(nw):
            n = w_off[i + 1] - w_off[i]
            if n > 64:
                out[i] = 2
                continue
            for k in range(n):
                cov[k] = 0
            out[i] = 0
            for j in range(nd):
                p0 = d_off[j]
                p1 = d_off[j + 1]
                in_count = 0
                for k in range(n):
                    px = w[w_off[i] + k, 0]
                    py = w[w_off[i] + k, 1]
                    if (px < d_aabb[j, 0] - eps or px > d_aabb[j, 2] + eps
                            or py < d_aabb[j, 1] - eps or py > d_aabb[j, 3] + eps):
                        continue
                    inside = True
                    for m in range(p0, p1):
                        if m + 1 == p1:
                            ex = d_data[p0, 0] - d_data[m, 0]
                            ey = d_data[p0, 1] - d_data[m, 1]
                        else:
                            ex = d_data[m + 1, 0] - d_data[m, 0]
                            ey = d_data[m + 1, 1] - d_data[m, 1]
                        cr = ex * (py - d_data[m, 1]) - ey * (px - d_data[m, 0])
                        if cr < -eps:
                            inside = False
                            break
                    if inside:
                        cov[k] = 1
                        in_count += 1
                if in_count == n:
                    out[i] = 1
                    break
            if out[i] == 1:
                continue
            out[i] = 2
            for k in range(n):
                if cov[k] == 0:
                    out[i] = 0
                    break


def poly_vs_union(const double[:, ::1] a,
                  const double[:, ::1] b_data, const long[::1] b_off,
                  const double[:, ::1] b_aabb,
                  double eps=1e-9):
    """True iff convex polygon `a` overlaps any part of the packed union B."""
    cdef Py_ssize_t nb = b_off.shape[0] - 1
    cdef Py_ssize_t i, j
    cdef double ax0, ay0, ax1, ay1
    ax0 = a[0, 0]
    ay0 = a[0, 1]
    ax1 = ax0
    ay1 = ay0
    with nogil:
        for i in range(1, a.shape[0]):
            if a[i, 0] < ax0:
                ax0 = a[i, 0]
            if a[i, 0] > ax1:
                ax1 = a[i, 0]
            if a[i, 1] < ay0:
                ay0 = a[i, 1]
            if a[i, 1] > ay1:
                ay1 = a[i, 1]
        for j in range(nb):
            if (ax1 + eps < b_aabb[j, 0] or b_aabb[j, 2] + eps < ax0
                    or ay1 + eps < b_aabb[j, 1] or b_aabb[j, 3] + eps < ay0):
                continue
            if _convex_overlap(a, b_data[b_off[j]:b_off[j + 1]], eps):
                with gil:
                    return True
    return False
