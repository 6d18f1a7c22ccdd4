"""Certified quadrature on fractal and polygonal elements.

A Koch-edged element is split by a quadtree (in its reference frame) into
certified interior cells and unresolved boundary cells.  Integrals are
tensor Gauss sums over the interior cells; the boundary cells only enter the
error bound.  Triangles are integrated exactly with a collapsed Gauss rule.
"""

from __future__ import annotations

import hashlib
import math
import os
import threading
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.signal import convolve2d

from . import kernels
from .geometry import (
    IDENTITY,
    DomainDescriptor,
    Region,
    Similarity,
    Triangle,
)

DEFAULT_DEPTH = 8
DEFAULT_TAU = 0.5
MAX_POLY_DEGREE = 16
CACHE_ENV = "FRACTALHP_CACHE"
_CACHE_VERSION = 1


def _geom(K) -> DomainDescriptor:
    return getattr(K, "geom", K)


def _element_id(K):
    return getattr(K, "id", None)


# ---------------------------------------------------------------------------
# cell decomposition


@dataclass(frozen=True)
class CellDecomposition:
    """Interior/boundary dyadic cells of one element.

    Cells are stored as integer triples (level, i, j) of a quadtree over the
    reference-frame square ``[x0, x0 + root_size] x [y0, y0 + root_size]``;
    ``frame`` maps them to the element.  Physical measures include the
    factor ``frame.scale**2``.
    """

    element_id: int | None
    depth: int
    origin: tuple[float, float]
    root_size: float
    interior: np.ndarray
    boundary: np.ndarray
    frame: Similarity = IDENTITY

    def boxes(self, which: str = "interior") -> tuple[np.ndarray, np.ndarray]:
        """Lower-left corners and side lengths of the cells (reference frame)."""
        cells = self.interior if which == "interior" else self.boundary
        size = self.root_size * np.ldexp(1.0, -cells[:, 0].astype(int))
        lo = np.asarray(self.origin) + cells[:, 1:3] * size[:, None]
        return lo, size

    @property
    def interior_cells(self):
        return self.boxes("interior")

    @property
    def boundary_cells(self):
        return self.boxes("boundary")

    def _measure(self, which):
        _, size = self.boxes(which)
        return float(np.sum(size * size)) * self.frame.scale ** 2

    @property
    def measure_lo(self) -> float:
        return self._measure("interior")

    @property
    def boundary_measure(self) -> float:
        return self._measure("boundary")

    @property
    def measure_hi(self) -> float:
        return self.measure_lo + self.boundary_measure

    def with_frame(self, frame: Similarity, element_id=None) -> "CellDecomposition":
        return CellDecomposition(element_id, self.depth, self.origin, self.root_size,
                                 self.interior, self.boundary, frame)


_cache: dict = {}
_cache_lock = threading.Lock()


def _root_square(region: Region) -> tuple[float, float, float]:
    x0, y0, x1, y1 = region.bbox
    size = max(x1 - x0, y1 - y0)
    # centred on the bounding box so symmetric regions get symmetric cells
    return 0.5 * (x0 + x1 - size), 0.5 * (y0 + y1 - size), size


def _cache_path(key) -> Path | None:
    root = os.environ.get(CACHE_ENV)
    if not root:
        return None
    digest = hashlib.sha1(repr((_CACHE_VERSION, key)).encode()).hexdigest()
    return Path(root) / f"cells-{digest}.npz"


def _reference_cells(region: Region, depth: int, tau: float):
    key = (region.key, int(depth), float(tau))
    hit = _cache.get(key)
    if hit is not None:
        return hit
    path = _cache_path(key)
    result = None
    if path is not None and path.exists():
        try:
            with np.load(path) as z:
                result = (z["interior"], z["boundary"])
        except (OSError, KeyError, ValueError):
            result = None
    if result is None:
        x0, y0, size = _root_square(region)
        result = kernels.decompose_cells(region.verts, region.koch, x0, y0, size,
                                         int(depth), float(tau), region.eps)
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(f".{os.getpid()}.{threading.get_ident()}.tmp.npz")
            np.savez(tmp, interior=result[0], boundary=result[1])
            os.replace(tmp, path)
    for a in result:
        a.setflags(write=False)
    with _cache_lock:
        result = _cache.setdefault(key, result)
    return result


def clear_cache():
    with _cache_lock:
        _cache.clear()
    _rule_cache.clear()


def decompose(K, depth: int = DEFAULT_DEPTH, tau: float = DEFAULT_TAU) -> CellDecomposition:
    """Certified quadtree decomposition of an element (or bare descriptor)."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    g = _geom(K)
    region = g.reference_region()
    interior, boundary = _reference_cells(region, depth, tau)
    x0, y0, size = _root_square(region)
    return CellDecomposition(_element_id(K), int(depth), (x0, y0), size, interior, boundary, g.frame)


def box_counts(K, depths, tau: float = DEFAULT_TAU) -> np.ndarray:
    return np.array([len(decompose(K, d, tau).boundary) for d in depths])


def box_counting_slope(K, depths=range(6, 13), tau: float = DEFAULT_TAU) -> float:
    """Least-squares slope of log N(d) against d log 2."""
    depths = np.asarray(list(depths))
    counts = box_counts(K, depths, tau)
    slope, _ = np.polyfit(depths * math.log(2.0), np.log(counts), 1)
    return float(slope)


# ---------------------------------------------------------------------------
# quadrature rules


@lru_cache(maxsize=None)
def gauss_legendre(q: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(q)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@dataclass(frozen=True)
class QuadratureRule:
    """Reference-frame points and weights plus the uncovered boundary cells."""

    points: np.ndarray
    weights: np.ndarray
    bnd_lo: np.ndarray
    bnd_size: np.ndarray
    frame: Similarity = IDENTITY
    exact: bool = False

    def physical_points(self) -> np.ndarray:
        if self.frame == IDENTITY:
            return self.points
        return self.frame.apply(self.points)

    def physical_weights(self) -> np.ndarray:
        return self.weights * self.frame.scale ** 2

    def boundary_samples(self) -> np.ndarray:
        """Corners and centre of every boundary cell, shape (nb, 5, 2), physical."""
        if len(self.bnd_size) == 0:
            return np.zeros((0, 5, 2))
        off = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, 0.5]])
        pts = self.bnd_lo[:, None, :] + self.bnd_size[:, None, None] * off[None]
        return self.frame.apply(pts.reshape(-1, 2)).reshape(-1, 5, 2)

    def boundary_areas(self) -> np.ndarray:
        return self.bnd_size ** 2 * self.frame.scale ** 2


def _tensor_cells(lo: np.ndarray, size: np.ndarray, q: int):
    x, w = gauss_legendre(q)
    t = 0.5 * (x + 1.0)
    px = lo[:, 0, None, None] + size[:, None, None] * t[None, :, None]
    py = lo[:, 1, None, None] + size[:, None, None] * t[None, None, :]
    px, py = np.broadcast_arrays(px, py)
    pts = np.stack([px.ravel(), py.ravel()], axis=1)
    wts = (0.25 * size[:, None, None] ** 2 * w[None, :, None] * w[None, None, :]).ravel()
    return pts, wts


def _triangle_rule(verts: np.ndarray, q: int):
    """Collapsed (Duffy) Gauss rule, exact for total degree <= 2q - 1."""
    xu, wu = gauss_legendre(q + 1)
    xv, wv = gauss_legendre(q)
    u = 0.5 * (xu + 1.0)
    v = 0.5 * (xv + 1.0)
    s = np.repeat(u, len(v))
    t = np.outer(1.0 - u, v).ravel()
    w = np.outer(0.25 * wu * (1.0 - u), wv).ravel()
    A, B, C = verts
    J = abs((B[0] - A[0]) * (C[1] - A[1]) - (C[0] - A[0]) * (B[1] - A[1]))
    pts = A + s[:, None] * (B - A) + t[:, None] * (C - A)
    return pts, w * J


_rule_cache: dict = {}


def element_rule(K, depth: int = DEFAULT_DEPTH, q: int = 3, tau: float = DEFAULT_TAU) -> QuadratureRule:
    """Quadrature rule for an element: exact on triangles, cell-based otherwise."""
    g = _geom(K)
    region = g.reference_region()
    exact = isinstance(g, Triangle)
    key = (region.key, int(depth), int(q), float(tau), exact)
    ref = _rule_cache.get(key)
    if ref is None:
        if exact:
            pts, wts = _triangle_rule(region.verts, q)
            blo, bsz = np.zeros((0, 2)), np.zeros(0)
        else:
            dec = decompose(g, depth, tau)
            pts, wts = _tensor_cells(*dec.interior_cells, q)
            blo, bsz = dec.boundary_cells
        for a in (pts, wts, blo, bsz):
            a.setflags(write=False)
        ref = (pts, wts, blo, bsz)
        with _cache_lock:
            ref = _rule_cache.setdefault(key, ref)
    return QuadratureRule(*ref, frame=g.frame, exact=exact)


def element_area_bounds(K, depth: int = DEFAULT_DEPTH) -> tuple[float, float]:
    g = _geom(K)
    if isinstance(g, Triangle):
        a = g.region.area
        return a, a
    dec = decompose(g, depth)
    return dec.measure_lo, dec.measure_hi


# ---------------------------------------------------------------------------
# integration


def _check_coeffs(coeffs) -> np.ndarray:
    C = np.atleast_2d(np.asarray(coeffs, dtype=float))
    deg = max(a + b for a in range(C.shape[0]) for b in range(C.shape[1]) if C[a, b] != 0.0) \
        if np.any(C) else 0
    if deg > MAX_POLY_DEGREE:
        raise ValueError(f"polynomial degree {deg} exceeds limit {MAX_POLY_DEGREE}")
    return C


def _eval_coeffs(C: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.polynomial.polynomial.polyval2d(u, v, C)


def integrate_poly(K, coeffs, depth: int = DEFAULT_DEPTH, center=(0.0, 0.0), radius: float = 1.0):
    """Integrate sum C[a, b] ((x-cx)/r)^a ((y-cy)/r)^b over K.

    Returns ``(value, error_bound)``: the value is exact on the certified
    interior cells (and on triangles), and the bound covers the boundary
    cells via the coefficient-norm times corner bound of each monomial.
    """
    C = _check_coeffs(coeffs)
    degree = C.shape[0] + C.shape[1] - 2
    rule = element_rule(K, depth, q=degree // 2 + 1)
    c = np.asarray(center, dtype=float)
    x = rule.physical_points()
    val = float(np.dot(rule.physical_weights(),
                       _eval_coeffs(C, (x[:, 0] - c[0]) / radius, (x[:, 1] - c[1]) / radius)))
    if rule.exact or len(rule.bnd_size) == 0:
        return val, 0.0
    corners = rule.boundary_samples()[:, :4, :]
    umax = np.abs((corners[..., 0] - c[0]) / radius).max(axis=1)
    vmax = np.abs((corners[..., 1] - c[1]) / radius).max(axis=1)
    bound = _eval_coeffs(np.abs(C), umax, vmax)
    return val, float(np.dot(rule.boundary_areas(), bound))


def integrate_fn(K, f, depth: int = DEFAULT_DEPTH, q: int = 3):
    """Gauss integral of a vectorised callable over the certified interior.

    ``error_estimate`` is the boundary-cell measure weighted by the largest
    |f| over each cell's corners and centre.
    """
    rule = element_rule(K, depth, q)
    x = rule.physical_points()
    val = float(np.dot(rule.physical_weights(), np.asarray(f(x), dtype=float)))
    if len(rule.bnd_size) == 0:
        return val, 0.0
    s = rule.boundary_samples()
    fb = np.abs(np.asarray(f(s.reshape(-1, 2)), dtype=float)).reshape(-1, 5).max(axis=1)
    return val, float(np.dot(rule.boundary_areas(), fb))


def boundary_excess_bound(rule: QuadratureRule, cell_max: np.ndarray, exact_area: float | None) -> float:
    """Bound on the integral of a nonnegative g over the element part of the
    boundary cells, given a per-cell bound ``cell_max`` on g.

    Without the exact element area this is sum |cell| * cell_max.  With it,
    only |K| minus the interior measure can sit in boundary cells, and the
    worst case fills the cells with the largest bound first.
    """
    areas = rule.boundary_areas()
    if len(areas) == 0:
        return 0.0
    plain = float(np.dot(areas, cell_max))
    if exact_area is None:
        return plain
    mass = exact_area - float(np.sum(rule.weights)) * rule.frame.scale ** 2
    if mass <= 0.0:
        return 0.0
    order = np.argsort(-cell_max, kind="stable")
    a = areas[order]
    filled = np.minimum(a, np.maximum(mass - (np.cumsum(a) - a), 0.0))
    return min(plain, float(np.dot(filled, cell_max[order])))


def reference_simplex_moment(a: int, b: int) -> float:
    """Integral of s^a t^b over {s, t >= 0, s + t <= 1}: a! b! / (a + b + 2)!."""
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


def triangle_moments(T, degree: int) -> np.ndarray:
    """Exact moments M[a, b] = integral of x^a y^b over T for a + b <= degree.

    The affine pullback x = A + s (B - A) + t (C - A) turns each monomial
    into a polynomial in (s, t), which is integrated term by term with the
    reference moments.  Entries with a + b > degree are zero.
    """
    g = _geom(T)
    if not isinstance(g, Triangle):
        T = Triangle(tuple(map(tuple, np.asarray(T, float))))
        g = T
    A, B, C = np.asarray(g.vertices)
    jac = abs((B[0] - A[0]) * (C[1] - A[1]) - (C[0] - A[0]) * (B[1] - A[1]))
    if jac == 0.0:
        raise ValueError("degenerate triangle")
    ref = np.array([[reference_simplex_moment(i, j) for j in range(degree + 1)]
                    for i in range(degree + 1)])
    # linear forms in (s, t) as 2x2 coefficient arrays L[i, j] of s^i t^j
    Lx = np.array([[A[0], C[0] - A[0]], [B[0] - A[0], 0.0]])
    Ly = np.array([[A[1], C[1] - A[1]], [B[1] - A[1], 0.0]])
    px = [np.ones((1, 1))]
    py = [np.ones((1, 1))]
    for _ in range(degree):
        px.append(convolve2d(px[-1], Lx))
        py.append(convolve2d(py[-1], Ly))
    M = np.zeros((degree + 1, degree + 1))
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            P = convolve2d(px[a], py[b])
            n0, n1 = P.shape
            M[a, b] = jac * float(np.sum(P * ref[:n0, :n1]))
    return M
