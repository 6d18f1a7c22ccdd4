"""NumPy implementations of the geometric kernels.

These are used when the compiled extension is not available, or when
``FRACTALHP_PURE=1`` is set.  They follow the same floating-point recipe as
``_kernels.pyx`` so both back ends return identical classifications and cell
lists.

Regions are polygons given by counter-clockwise vertices; every edge is
either a straight boundary edge or a Koch edge, meaning the true boundary
along that edge is the Koch curve built on the directed chord A->B, bulging
to its right (outward).
"""

import numpy as np

INSIDE = 1
OUTSIDE = 0
UNCERTAIN = -1

# apex offset of the Koch bump (and of the curve's hull triangle) per unit chord
KOCH_C = 0.28867513459481287  # sqrt(3) / 6
INV_SQRT3 = 0.57735026918962573

_MAX_EDGE_DEPTH = 60


def _crosses(px, py, ax, ay, bx, by):
    """Half-open crossing test of the +x ray from (px, py), symmetric in A, B."""
    swap = ay > by
    lx = np.where(swap, bx, ax)
    ly = np.where(swap, by, ay)
    ux = np.where(swap, ax, bx)
    uy = np.where(swap, ay, by)
    straddle = (ly <= py) & (uy > py)
    dy = np.where(straddle, uy - ly, 1.0)
    t = (py - ly) / dy
    xi = lx + t * (ux - lx)
    return straddle & (px < xi)


def _seg_dist2(px, py, ax, ay, bx, by):
    dx = bx - ax
    dy = by - ay
    dd = dx * dx + dy * dy
    t = ((px - ax) * dx + (py - ay) * dy) / dd
    t = np.clip(t, 0.0, 1.0)
    qx = ax + t * dx - px
    qy = ay + t * dy - py
    return qx * qx + qy * qy


def _in_hull(px, py, ax, ay, bx, by, eps):
    """Closed hull triangle (A, H, B) of the Koch curve on A->B, grown by eps."""
    dx = bx - ax
    dy = by - ay
    L = np.sqrt(dx * dx + dy * dy)
    hx = 0.5 * (ax + bx) + KOCH_C * dy
    hy = 0.5 * (ay + by) - KOCH_C * dx
    tol_side = eps * L * INV_SQRT3
    e1 = (hx - ax) * (py - ay) - (hy - ay) * (px - ax)
    e2 = (bx - hx) * (py - hy) - (by - hy) * (px - hx)
    e3 = (ax - bx) * (py - by) - (ay - by) * (px - bx)
    return (e1 >= -tol_side) & (e2 >= -tol_side) & (e3 >= -eps * L)


def classify_points(verts, koch, pts, max_depth, eps):
    """Classify points against a Koch-edged region.

    Returns an int8 array with INSIDE, OUTSIDE or UNCERTAIN.  A point is
    UNCERTAIN when it lies in the (eps-grown) hull triangle of a depth
    ``max_depth`` Koch sub-edge, or within ``eps`` of a straight edge.
    """
    verts = np.ascontiguousarray(verts, dtype=np.float64)
    koch = np.asarray(koch, dtype=np.uint8)
    pts = np.ascontiguousarray(pts, dtype=np.float64).reshape(-1, 2)
    m = pts.shape[0]
    n = verts.shape[0]
    px = pts[:, 0]
    py = pts[:, 1]
    parity = np.zeros(m, dtype=bool)
    unc = np.zeros(m, dtype=bool)
    eps2 = eps * eps

    fid, fax, fay, fbx, fby = [], [], [], [], []
    for k in range(n):
        ax, ay = verts[k]
        bx, by = verts[(k + 1) % n]
        parity ^= _crosses(px, py, ax, ay, bx, by)
        if koch[k]:
            fid.append(np.arange(m))
            fax.append(np.full(m, ax))
            fay.append(np.full(m, ay))
            fbx.append(np.full(m, bx))
            fby.append(np.full(m, by))
        else:
            unc |= _seg_dist2(px, py, ax, ay, bx, by) <= eps2

    if fid:
        idx = np.concatenate(fid)
        ax = np.concatenate(fax)
        ay = np.concatenate(fay)
        bx = np.concatenate(fbx)
        by = np.concatenate(fby)
    else:
        idx = np.zeros(0, dtype=np.int64)
        ax = ay = bx = by = np.zeros(0)

    depth = 0
    while idx.size:
        qx = px[idx]
        qy = py[idx]
        hit = _in_hull(qx, qy, ax, ay, bx, by, eps)
        idx, ax, ay, bx, by = idx[hit], ax[hit], ay[hit], bx[hit], by[hit]
        if not idx.size:
            break
        if depth >= max_depth:
            unc[idx] = True
            break
        qx = px[idx]
        qy = py[idx]
        dx = bx - ax
        dy = by - ay
        p1x = ax + dx / 3.0
        p1y = ay + dy / 3.0
        p3x = ax + 2.0 * dx / 3.0
        p3y = ay + 2.0 * dy / 3.0
        p2x = 0.5 * (ax + bx) + KOCH_C * dy
        p2y = 0.5 * (ay + by) - KOCH_C * dx
        flip = _crosses(qx, qy, ax, ay, bx, by)
        flip ^= _crosses(qx, qy, ax, ay, p1x, p1y)
        flip ^= _crosses(qx, qy, p1x, p1y, p2x, p2y)
        flip ^= _crosses(qx, qy, p2x, p2y, p3x, p3y)
        flip ^= _crosses(qx, qy, p3x, p3y, bx, by)
        np.bitwise_xor.at(parity, idx, flip)
        idx = np.concatenate([idx, idx, idx, idx])
        ax, ay, bx, by = (
            np.concatenate([ax, p1x, p2x, p3x]),
            np.concatenate([ay, p1y, p2y, p3y]),
            np.concatenate([p1x, p2x, p3x, bx]),
            np.concatenate([p1y, p2y, p3y, by]),
        )
        depth += 1

    out = np.where(parity, INSIDE, OUTSIDE).astype(np.int8)
    out[unc] = UNCERTAIN
    return out


def _seg_hits_open_box(ax, ay, bx, by, x0, y0, x1, y1):
    """Closed segment against open box (x0, x1) x (y0, y1); exact, no tolerance."""
    dx = bx - ax
    dy = by - ay
    with np.errstate(divide="ignore", invalid="ignore"):
        tx0 = (x0 - ax) / dx
        tx1 = (x1 - ax) / dx
        ty0 = (y0 - ay) / dy
        ty1 = (y1 - ay) / dy
    inf = np.inf
    zx = dx == 0.0
    zy = dy == 0.0
    inx = (ax > x0) & (ax < x1)
    iny = (ay > y0) & (ay < y1)
    lox = np.where(zx, np.where(inx, -inf, inf), np.minimum(tx0, tx1))
    hix = np.where(zx, np.where(inx, inf, -inf), np.maximum(tx0, tx1))
    loy = np.where(zy, np.where(iny, -inf, inf), np.minimum(ty0, ty1))
    hiy = np.where(zy, np.where(iny, inf, -inf), np.maximum(ty0, ty1))
    lo = np.maximum(lox, loy)
    hi = np.minimum(hix, hiy)
    return (lo < hi) & (lo < 1.0) & (hi > 0.0)


def _hull_hits_open_box(ax, ay, bx, by, x0, y0, x1, y1, eps):
    """Koch hull triangle (A, H, B) against an open box, pessimistic by eps."""
    dx = bx - ax
    dy = by - ay
    hx = 0.5 * (ax + bx) + KOCH_C * dy
    hy = 0.5 * (ay + by) - KOCH_C * dx
    sep = (np.maximum(np.maximum(ax, bx), hx) <= x0 - eps)
    sep |= (np.minimum(np.minimum(ax, bx), hx) >= x1 + eps)
    sep |= (np.maximum(np.maximum(ay, by), hy) <= y0 - eps)
    sep |= (np.minimum(np.minimum(ay, by), hy) >= y1 + eps)
    L = np.sqrt(dx * dx + dy * dy)
    for (ux, uy, vx, vy, ln) in (
        (ax, ay, hx, hy, L * INV_SQRT3),
        (hx, hy, bx, by, L * INV_SQRT3),
        (bx, by, ax, ay, L),
    ):
        ex = vx - ux
        ey = vy - uy
        c00 = ex * (y0 - uy) - ey * (x0 - ux)
        c10 = ex * (y0 - uy) - ey * (x1 - ux)
        c01 = ex * (y1 - uy) - ey * (x0 - ux)
        c11 = ex * (y1 - uy) - ey * (x1 - ux)
        cmax = np.maximum(np.maximum(c00, c10), np.maximum(c01, c11))
        sep |= cmax <= -eps * ln
    return ~sep


def decompose_cells(verts, koch, x0, y0, size, depth, tau, eps):
    """Quadtree split of the square [x0, x0+size]^2 against a Koch-edged region.

    A cell is *interior* when no boundary piece (straight edge, or hull of a
    Koch sub-edge no longer than ``tau`` times the cell side) meets it and
    its centre is inside; cells still touched by the boundary at level
    ``depth`` are *boundary* cells.  Returns two int64 arrays of rows
    ``(level, i, j)`` sorted lexicographically; a cell's lower-left corner is
    ``(x0 + i*s, y0 + j*s)`` with ``s = size / 2**level``.
    """
    verts = np.ascontiguousarray(verts, dtype=np.float64)
    koch = np.asarray(koch, dtype=np.uint8)
    n = verts.shape[0]
    lmax = float(np.max(np.hypot(*(np.roll(verts, -1, axis=0) - verts).T)))

    ci = np.zeros(1, dtype=np.int64)
    cj = np.zeros(1, dtype=np.int64)
    pc = np.zeros(n, dtype=np.int64)
    pax = verts[:, 0].copy()
    pay = verts[:, 1].copy()
    pbx = np.roll(verts[:, 0], -1)
    pby = np.roll(verts[:, 1], -1)
    pk = koch.astype(bool).copy()
    pd = np.zeros(n, dtype=np.int64)

    interior = []
    boundary = []
    for level in range(depth + 1):
        s = size / float(1 << level)
        # filter and refine boundary pieces against the cells of this level
        fc, fax, fay, fbx, fby, fk, fd = [], [], [], [], [], [], []
        while pc.size:
            cx0 = x0 + ci[pc] * s
            cy0 = y0 + cj[pc] * s
            cx1 = cx0 + s
            cy1 = cy0 + s
            hit = np.where(
                pk,
                _hull_hits_open_box(pax, pay, pbx, pby, cx0, cy0, cx1, cy1, eps),
                _seg_hits_open_box(pax, pay, pbx, pby, cx0, cy0, cx1, cy1),
            )
            pc, pax, pay, pbx, pby, pk, pd = (
                a[hit] for a in (pc, pax, pay, pbx, pby, pk, pd))
            dx = pbx - pax
            dy = pby - pay
            big = pk & (np.sqrt(dx * dx + dy * dy) > tau * s) & (pd < _MAX_EDGE_DEPTH)
            keep = ~big
            fc.append(pc[keep])
            fax.append(pax[keep])
            fay.append(pay[keep])
            fbx.append(pbx[keep])
            fby.append(pby[keep])
            fk.append(pk[keep])
            fd.append(pd[keep])
            if not big.any():
                break
            ax, ay, bx, by = pax[big], pay[big], pbx[big], pby[big]
            dx, dy = dx[big], dy[big]
            p1x = ax + dx / 3.0
            p1y = ay + dy / 3.0
            p3x = ax + 2.0 * dx / 3.0
            p3y = ay + 2.0 * dy / 3.0
            p2x = 0.5 * (ax + bx) + KOCH_C * dy
            p2y = 0.5 * (ay + by) - KOCH_C * dx
            c = pc[big]
            d = pd[big] + 1
            pc = np.concatenate([c, c, c, c])
            pax = np.concatenate([ax, p1x, p2x, p3x])
            pay = np.concatenate([ay, p1y, p2y, p3y])
            pbx = np.concatenate([p1x, p2x, p3x, bx])
            pby = np.concatenate([p1y, p2y, p3y, by])
            pk = np.ones(pc.size, dtype=bool)
            pd = np.concatenate([d, d, d, d])
        pc = np.concatenate(fc)
        pax = np.concatenate(fax)
        pay = np.concatenate(fay)
        pbx = np.concatenate(fbx)
        pby = np.concatenate(fby)
        pk = np.concatenate(fk)
        pd = np.concatenate(fd)

        dirty = np.bincount(pc, minlength=ci.size) > 0
        clean = np.nonzero(~dirty)[0]
        if clean.size:
            status = _clean_cell_status(verts, koch, x0, y0, s, ci[clean], cj[clean],
                                        lmax, tau, eps)
            lv = np.full(clean.size, level, dtype=np.int64)
            ins = status == INSIDE
            unc = status == UNCERTAIN
            interior.append(np.stack([lv[ins], ci[clean][ins], cj[clean][ins]], axis=1))
            boundary.append(np.stack([lv[unc], ci[clean][unc], cj[clean][unc]], axis=1))
        dirty_idx = np.nonzero(dirty)[0]
        if level == depth or not dirty_idx.size:
            lv = np.full(dirty_idx.size, level, dtype=np.int64)
            boundary.append(np.stack([lv, ci[dirty_idx], cj[dirty_idx]], axis=1))
            break
        # children of dirty cells; pieces follow their cell into all 4 children
        remap = np.full(ci.size, -1, dtype=np.int64)
        remap[dirty_idx] = np.arange(dirty_idx.size)
        k = dirty_idx.size
        pi = ci[dirty_idx]
        pj = cj[dirty_idx]
        ci = np.concatenate([2 * pi, 2 * pi + 1, 2 * pi, 2 * pi + 1])
        cj = np.concatenate([2 * pj, 2 * pj, 2 * pj + 1, 2 * pj + 1])
        base = remap[pc]
        pc = np.concatenate([base, base + k, base + 2 * k, base + 3 * k])
        pax, pay, pbx, pby, pk, pd = (
            np.concatenate([a, a, a, a]) for a in (pax, pay, pbx, pby, pk, pd))

    return _sorted_cells(interior), _sorted_cells(boundary)


def _clean_cell_status(verts, koch, x0, y0, s, ci, cj, lmax, tau, eps):
    cdepth = clean_cell_depth(lmax, tau, s)
    status = np.full(ci.size, UNCERTAIN, dtype=np.int8)
    for fx, fy in ((0.5, 0.5), (0.25, 0.25), (0.75, 0.25), (0.25, 0.75), (0.75, 0.75)):
        todo = np.nonzero(status == UNCERTAIN)[0]
        if not todo.size:
            break
        pts = np.stack([x0 + (ci[todo] + fx) * s, y0 + (cj[todo] + fy) * s], axis=1)
        status[todo] = classify_points(verts, koch, pts, cdepth, eps)
    return status


def clean_cell_depth(lmax, tau, s):
    """Koch recursion depth that resolves the centre of a boundary-free cell."""
    k = 0
    L = lmax
    while L > tau * s and k < _MAX_EDGE_DEPTH:
        L = L / 3.0
        k += 1
    return k + 2


def _sorted_cells(parts):
    parts = [p for p in parts if p.size]
    if not parts:
        return np.zeros((0, 3), dtype=np.int64)
    cells = np.concatenate(parts).astype(np.int64)
    order = np.lexsort((cells[:, 2], cells[:, 1], cells[:, 0]))
    return cells[order]
