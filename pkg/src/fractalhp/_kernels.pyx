# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled geometric kernels.

Same contracts and floating-point recipe as :mod:`fractalhp._fallback`;
the two back ends must return identical results.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fmin, fmax, INFINITY
from libc.stdlib cimport malloc, realloc, free

cnp.import_array()

cdef double KOCH_C = 0.28867513459481287
cdef double INV_SQRT3 = 0.57735026918962573
cdef int MAX_EDGE_DEPTH = 60


cdef struct EdgeBuf:
    double* ax
    double* ay
    double* bx
    double* by
    int* koch
    int* depth
    Py_ssize_t n
    Py_ssize_t cap


cdef int buf_init(EdgeBuf* b, Py_ssize_t cap) except -1:
    b.n = 0
    b.cap = cap
    b.ax = <double*> malloc(cap * sizeof(double))
    b.ay = <double*> malloc(cap * sizeof(double))
    b.bx = <double*> malloc(cap * sizeof(double))
    b.by = <double*> malloc(cap * sizeof(double))
    b.koch = <int*> malloc(cap * sizeof(int))
    b.depth = <int*> malloc(cap * sizeof(int))
    if not (b.ax and b.ay and b.bx and b.by and b.koch and b.depth):
        raise MemoryError()
    return 0


cdef void buf_free(EdgeBuf* b):
    free(b.ax)
    free(b.ay)
    free(b.bx)
    free(b.by)
    free(b.koch)
    free(b.depth)


cdef int buf_push(EdgeBuf* b, double ax, double ay, double bx, double by,
                  int koch, int depth) except -1:
    cdef Py_ssize_t cap
    if b.n == b.cap:
        cap = 2 * b.cap
        b.ax = <double*> realloc(b.ax, cap * sizeof(double))
        b.ay = <double*> realloc(b.ay, cap * sizeof(double))
        b.bx = <double*> realloc(b.bx, cap * sizeof(double))
        b.by = <double*> realloc(b.by, cap * sizeof(double))
        b.koch = <int*> realloc(b.koch, cap * sizeof(int))
        b.depth = <int*> realloc(b.depth, cap * sizeof(int))
        if not (b.ax and b.ay and b.bx and b.by and b.koch and b.depth):
            raise MemoryError()
        b.cap = cap
    b.ax[b.n] = ax
    b.ay[b.n] = ay
    b.bx[b.n] = bx
    b.by[b.n] = by
    b.koch[b.n] = koch
    b.depth[b.n] = depth
    b.n += 1
    return 0


cdef inline bint crosses(double px, double py, double ax, double ay,
                         double bx, double by) nogil:
    cdef double lx, ly, ux, uy, t, xi
    if ay > by:
        lx = bx
        ly = by
        ux = ax
        uy = ay
    else:
        lx = ax
        ly = ay
        ux = bx
        uy = by
    if not (ly <= py and uy > py):
        return False
    t = (py - ly) / (uy - ly)
    xi = lx + t * (ux - lx)
    return px < xi


cdef inline double seg_dist2(double px, double py, double ax, double ay,
                             double bx, double by) nogil:
    cdef double dx = bx - ax
    cdef double dy = by - ay
    cdef double dd = dx * dx + dy * dy
    cdef double t = ((px - ax) * dx + (py - ay) * dy) / dd
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    cdef double qx = ax + t * dx - px
    cdef double qy = ay + t * dy - py
    return qx * qx + qy * qy


cdef inline bint in_hull(double px, double py, double ax, double ay,
                         double bx, double by, double eps) nogil:
    cdef double dx = bx - ax
    cdef double dy = by - ay
    cdef double L = sqrt(dx * dx + dy * dy)
    cdef double hx = 0.5 * (ax + bx) + KOCH_C * dy
    cdef double hy = 0.5 * (ay + by) - KOCH_C * dx
    cdef double tol_side = eps * L * INV_SQRT3
    cdef double e1 = (hx - ax) * (py - ay) - (hy - ay) * (px - ax)
    if e1 < -tol_side:
        return False
    cdef double e2 = (bx - hx) * (py - hy) - (by - hy) * (px - hx)
    if e2 < -tol_side:
        return False
    cdef double e3 = (ax - bx) * (py - by) - (ay - by) * (px - bx)
    return e3 >= -eps * L


cdef int classify_one(double px, double py, const double[:, ::1] verts,
                      const unsigned char[::1] koch, int max_depth, double eps,
                      EdgeBuf* stack) except -2:
    cdef Py_ssize_t n = verts.shape[0]
    cdef Py_ssize_t k
    cdef bint parity = False
    cdef bint flip
    cdef double ax, ay, bx, by, dx, dy, p1x, p1y, p2x, p2y, p3x, p3y
    cdef int depth
    cdef double eps2 = eps * eps
    stack.n = 0
    for k in range(n):
        ax = verts[k, 0]
        ay = verts[k, 1]
        bx = verts[(k + 1) % n, 0]
        by = verts[(k + 1) % n, 1]
        if crosses(px, py, ax, ay, bx, by):
            parity = not parity
        if koch[k]:
            buf_push(stack, ax, ay, bx, by, 1, 0)
        elif seg_dist2(px, py, ax, ay, bx, by) <= eps2:
            return -1
    while stack.n > 0:
        stack.n -= 1
        ax = stack.ax[stack.n]
        ay = stack.ay[stack.n]
        bx = stack.bx[stack.n]
        by = stack.by[stack.n]
        depth = stack.depth[stack.n]
        if not in_hull(px, py, ax, ay, bx, by, eps):
            continue
        if depth >= max_depth:
            return -1
        dx = bx - ax
        dy = by - ay
        p1x = ax + dx / 3.0
        p1y = ay + dy / 3.0
        p3x = ax + 2.0 * dx / 3.0
        p3y = ay + 2.0 * dy / 3.0
        p2x = 0.5 * (ax + bx) + KOCH_C * dy
        p2y = 0.5 * (ay + by) - KOCH_C * dx
        flip = crosses(px, py, ax, ay, bx, by)
        flip ^= crosses(px, py, ax, ay, p1x, p1y)
        flip ^= crosses(px, py, p1x, p1y, p2x, p2y)
        flip ^= crosses(px, py, p2x, p2y, p3x, p3y)
        flip ^= crosses(px, py, p3x, p3y, bx, by)
        if flip:
            parity = not parity
        buf_push(stack, ax, ay, p1x, p1y, 1, depth + 1)
        buf_push(stack, p1x, p1y, p2x, p2y, 1, depth + 1)
        buf_push(stack, p2x, p2y, p3x, p3y, 1, depth + 1)
        buf_push(stack, p3x, p3y, bx, by, 1, depth + 1)
    return 1 if parity else 0


def classify_points(verts, koch, pts, int max_depth, double eps):
    cdef const double[:, ::1] V = np.ascontiguousarray(verts, dtype=np.float64)
    cdef const unsigned char[::1] K = np.ascontiguousarray(koch, dtype=np.uint8)
    cdef const double[:, ::1] P = np.ascontiguousarray(pts, dtype=np.float64).reshape(-1, 2)
    cdef Py_ssize_t m = P.shape[0]
    out = np.empty(m, dtype=np.int8)
    cdef signed char[::1] O = out
    cdef EdgeBuf stack
    cdef Py_ssize_t i
    buf_init(&stack, 256)
    try:
        for i in range(m):
            O[i] = classify_one(P[i, 0], P[i, 1], V, K, max_depth, eps, &stack)
    finally:
        buf_free(&stack)
    return out


cdef inline bint seg_hits_open_box(double ax, double ay, double bx, double by,
                                   double x0, double y0, double x1, double y1) nogil:
    cdef double dx = bx - ax
    cdef double dy = by - ay
    cdef double lox, hix, loy, hiy, t0, t1, lo, hi
    if dx == 0.0:
        if ax > x0 and ax < x1:
            lox = -INFINITY
            hix = INFINITY
        else:
            return False
    else:
        t0 = (x0 - ax) / dx
        t1 = (x1 - ax) / dx
        lox = fmin(t0, t1)
        hix = fmax(t0, t1)
    if dy == 0.0:
        if ay > y0 and ay < y1:
            loy = -INFINITY
            hiy = INFINITY
        else:
            return False
    else:
        t0 = (y0 - ay) / dy
        t1 = (y1 - ay) / dy
        loy = fmin(t0, t1)
        hiy = fmax(t0, t1)
    lo = fmax(lox, loy)
    hi = fmin(hix, hiy)
    return lo < hi and lo < 1.0 and hi > 0.0


cdef inline double corner_max(double ux, double uy, double vx, double vy,
                              double x0, double y0, double x1, double y1) nogil:
    cdef double ex = vx - ux
    cdef double ey = vy - uy
    cdef double c00 = ex * (y0 - uy) - ey * (x0 - ux)
    cdef double c10 = ex * (y0 - uy) - ey * (x1 - ux)
    cdef double c01 = ex * (y1 - uy) - ey * (x0 - ux)
    cdef double c11 = ex * (y1 - uy) - ey * (x1 - ux)
    return fmax(fmax(c00, c10), fmax(c01, c11))


cdef inline bint hull_hits_open_box(double ax, double ay, double bx, double by,
                                    double x0, double y0, double x1, double y1,
                                    double eps) nogil:
    cdef double dx = bx - ax
    cdef double dy = by - ay
    cdef double hx = 0.5 * (ax + bx) + KOCH_C * dy
    cdef double hy = 0.5 * (ay + by) - KOCH_C * dx
    if fmax(fmax(ax, bx), hx) <= x0 - eps:
        return False
    if fmin(fmin(ax, bx), hx) >= x1 + eps:
        return False
    if fmax(fmax(ay, by), hy) <= y0 - eps:
        return False
    if fmin(fmin(ay, by), hy) >= y1 + eps:
        return False
    cdef double L = sqrt(dx * dx + dy * dy)
    if corner_max(ax, ay, hx, hy, x0, y0, x1, y1) <= -eps * (L * INV_SQRT3):
        return False
    if corner_max(hx, hy, bx, by, x0, y0, x1, y1) <= -eps * (L * INV_SQRT3):
        return False
    if corner_max(bx, by, ax, ay, x0, y0, x1, y1) <= -eps * L:
        return False
    return True


cdef struct CellOut:
    long long* data
    Py_ssize_t n
    Py_ssize_t cap


cdef int out_push(CellOut* o, long long level, long long i, long long j) except -1:
    if o.n == o.cap:
        o.cap = 2 * o.cap
        o.data = <long long*> realloc(o.data, 3 * o.cap * sizeof(long long))
        if not o.data:
            raise MemoryError()
    o.data[3 * o.n] = level
    o.data[3 * o.n + 1] = i
    o.data[3 * o.n + 2] = j
    o.n += 1
    return 0


cdef class _Decomposer:
    cdef const double[:, ::1] verts
    cdef const unsigned char[::1] koch
    cdef double x0, y0, size, tau, eps, lmax
    cdef int depth
    cdef EdgeBuf pool
    cdef EdgeBuf work
    cdef EdgeBuf cstack
    cdef CellOut interior
    cdef CellOut boundary

    def __cinit__(self):
        buf_init(&self.pool, 1024)
        buf_init(&self.work, 256)
        buf_init(&self.cstack, 256)
        self.interior.n = 0
        self.interior.cap = 1024
        self.interior.data = <long long*> malloc(3 * 1024 * sizeof(long long))
        self.boundary.n = 0
        self.boundary.cap = 1024
        self.boundary.data = <long long*> malloc(3 * 1024 * sizeof(long long))

    def __dealloc__(self):
        buf_free(&self.pool)
        buf_free(&self.work)
        buf_free(&self.cstack)
        free(self.interior.data)
        free(self.boundary.data)

    cdef int clean_depth(self, double s):
        cdef int k = 0
        cdef double L = self.lmax
        while L > self.tau * s and k < MAX_EDGE_DEPTH:
            L = L / 3.0
            k += 1
        return k + 2

    cdef int process(self, int level, long long i, long long j,
                     Py_ssize_t start, Py_ssize_t end) except -1:
        cdef double s = self.size / <double> (1LL << level)
        cdef double cx0 = self.x0 + <double> i * s
        cdef double cy0 = self.y0 + <double> j * s
        cdef double cx1 = cx0 + s
        cdef double cy1 = cy0 + s
        cdef Py_ssize_t mark = self.pool.n
        cdef Py_ssize_t e
        cdef double ax, ay, bx, by, dx, dy, p1x, p1y, p2x, p2y, p3x, p3y
        cdef int kk, d, status, cdepth, q
        cdef bint hit
        cdef double fx[5]
        cdef double fy[5]
        for e in range(start, end):
            self.work.n = 0
            buf_push(&self.work, self.pool.ax[e], self.pool.ay[e], self.pool.bx[e],
                     self.pool.by[e], self.pool.koch[e], self.pool.depth[e])
            while self.work.n > 0:
                self.work.n -= 1
                ax = self.work.ax[self.work.n]
                ay = self.work.ay[self.work.n]
                bx = self.work.bx[self.work.n]
                by = self.work.by[self.work.n]
                kk = self.work.koch[self.work.n]
                d = self.work.depth[self.work.n]
                if kk:
                    hit = hull_hits_open_box(ax, ay, bx, by, cx0, cy0, cx1, cy1, self.eps)
                else:
                    hit = seg_hits_open_box(ax, ay, bx, by, cx0, cy0, cx1, cy1)
                if not hit:
                    continue
                dx = bx - ax
                dy = by - ay
                if kk and sqrt(dx * dx + dy * dy) > self.tau * s and d < MAX_EDGE_DEPTH:
                    p1x = ax + dx / 3.0
                    p1y = ay + dy / 3.0
                    p3x = ax + 2.0 * dx / 3.0
                    p3y = ay + 2.0 * dy / 3.0
                    p2x = 0.5 * (ax + bx) + KOCH_C * dy
                    p2y = 0.5 * (ay + by) - KOCH_C * dx
                    buf_push(&self.work, ax, ay, p1x, p1y, 1, d + 1)
                    buf_push(&self.work, p1x, p1y, p2x, p2y, 1, d + 1)
                    buf_push(&self.work, p2x, p2y, p3x, p3y, 1, d + 1)
                    buf_push(&self.work, p3x, p3y, bx, by, 1, d + 1)
                else:
                    buf_push(&self.pool, ax, ay, bx, by, kk, d)
        cdef Py_ssize_t new_end = self.pool.n
        if new_end == mark:
            fx[0] = 0.5; fy[0] = 0.5
            fx[1] = 0.25; fy[1] = 0.25
            fx[2] = 0.75; fy[2] = 0.25
            fx[3] = 0.25; fy[3] = 0.75
            fx[4] = 0.75; fy[4] = 0.75
            cdepth = self.clean_depth(s)
            status = -1
            for q in range(5):
                status = classify_one(self.x0 + (<double> i + fx[q]) * s,
                                      self.y0 + (<double> j + fy[q]) * s,
                                      self.verts, self.koch, cdepth, self.eps,
                                      &self.cstack)
                if status != -1:
                    break
            if status == 1:
                out_push(&self.interior, level, i, j)
            elif status == -1:
                out_push(&self.boundary, level, i, j)
        elif level == self.depth:
            out_push(&self.boundary, level, i, j)
        else:
            self.process(level + 1, 2 * i, 2 * j, mark, new_end)
            self.process(level + 1, 2 * i + 1, 2 * j, mark, new_end)
            self.process(level + 1, 2 * i, 2 * j + 1, mark, new_end)
            self.process(level + 1, 2 * i + 1, 2 * j + 1, mark, new_end)
        self.pool.n = mark
        return 0


cdef object _to_sorted(long long* data, Py_ssize_t n):
    cdef Py_ssize_t k
    arr = np.empty((n, 3), dtype=np.int64)
    cdef long long[:, ::1] A = arr
    for k in range(n):
        A[k, 0] = data[3 * k]
        A[k, 1] = data[3 * k + 1]
        A[k, 2] = data[3 * k + 2]
    order = np.lexsort((arr[:, 2], arr[:, 1], arr[:, 0]))
    return arr[order]


def decompose_cells(verts, koch, double x0, double y0, double size, int depth,
                    double tau, double eps):
    cdef _Decomposer dec = _Decomposer()
    V = np.ascontiguousarray(verts, dtype=np.float64)
    dec.verts = V
    dec.koch = np.ascontiguousarray(koch, dtype=np.uint8)
    dec.x0 = x0
    dec.y0 = y0
    dec.size = size
    dec.depth = depth
    dec.tau = tau
    dec.eps = eps
    E = np.roll(V, -1, axis=0) - V
    dec.lmax = float(np.max(np.hypot(E[:, 0], E[:, 1])))
    cdef Py_ssize_t n = V.shape[0]
    cdef Py_ssize_t k
    for k in range(n):
        buf_push(&dec.pool, V[k, 0], V[k, 1], V[(k + 1) % n, 0], V[(k + 1) % n, 1],
                 1 if dec.koch[k] else 0, 0)
    dec.process(0, 0, 0, 0, n)
    return (_to_sorted(dec.interior.data, dec.interior.n),
            _to_sorted(dec.boundary.data, dec.boundary.n))


def clean_cell_depth(double lmax, double tau, double s):
    cdef int k = 0
    cdef double L = lmax
    while L > tau * s and k < MAX_EDGE_DEPTH:
        L = L / 3.0
        k += 1
    return k + 2
