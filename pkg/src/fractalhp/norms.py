"""Broken Sobolev norms over a mesh and a Fourier estimator for H^s norms of
zero extensions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import quadrature
from .approx import PiecewisePoly, default_q
from .geometry import INSIDE, UNCERTAIN, classify_points, diameter, reference_area
from .mesh import Mesh, locate

DEFAULT_N = 1024
PAD_FACTOR = 2.5


@dataclass
class BrokenNorm:
    value: float
    seminorm: float
    per_element: np.ndarray  # squared full norms
    certificate: float  # bound on the norm increase from the boundary cells

    def __float__(self):
        return self.value


def _derivs_of(u, order):
    if order == 0:
        return None
    if not hasattr(u, "derivatives"):
        raise ValueError("broken norms with j >= 1 need a callable with analytic derivatives")


def _terms(u, v: PiecewisePoly | None, i: int, x: np.ndarray, j: int, vx=None):
    """Squared |D^alpha (u - v)| summed over |alpha| = k, for k = 0..j.

    ``vx`` optionally supplies v and its derivatives at x.
    """
    if j > 0:
        du = u.derivatives(x, j)
    else:
        du = [np.asarray(u(x), float)]
    if v is None:
        vx = [0.0, 0.0, 0.0]
    elif vx is None:
        vx = [v.eval_element(i, x)]
        if j >= 1:
            vx.append(v.grad_element(i, x))
        if j >= 2:
            vx.append(v.hess_element(i, x))
    out = []
    e0 = du[0] - vx[0]
    out.append(e0 * e0)
    if j >= 1:
        g = du[1] - vx[1]
        out.append(np.sum(g * g, axis=1))
    if j >= 2:
        H = du[2] - vx[2]
        out.append(H[:, 0] ** 2 + H[:, 1] ** 2 + H[:, 2] ** 2)
    return out


def broken_norm(u, v: PiecewisePoly | None, m: Mesh, j: int = 0, depth: int | None = None,
                q: int | None = None, elements=None) -> BrokenNorm:
    """(sum_K sum_{|alpha| <= j} ||D^alpha (u - v)||^2_{L2(K)})^(1/2).

    Element sums are accumulated in element order with ``math.fsum``.
    """
    if j < 0 or j > 2:
        raise ValueError("j must be 0, 1 or 2")
    _derivs_of(u, j)
    depth = m.quad_depth if depth is None else depth
    if q is None:
        q = default_q(v.degree if v is not None else 2)
    idx = range(len(m.elements)) if elements is None else elements
    full, semi, certs = [], [], []
    for i in idx:
        e = m.elements[i]
        rule = quadrature.element_rule(e, depth, q)
        x = rule.physical_points()
        w = rule.physical_weights()
        vx = v.at_rule(i, depth, q, j) if v is not None else None
        terms = _terms(u, v, i, x, j, vx)
        vals = [float(np.dot(w, t)) for t in terms]
        full.append(math.fsum(vals))
        semi.append(vals[-1])
        if len(rule.bnd_size):
            bs = rule.boundary_samples().reshape(-1, 2)
            vb = v.at_rule(i, depth, q, j, boundary=True) if v is not None else None
            bt = sum(_terms(u, v, i, bs, j, vb)).reshape(-1, 5).max(axis=1)
            certs.append(quadrature.boundary_excess_bound(rule, bt, reference_area(e.geom)))
        else:
            certs.append(0.0)
    total = math.fsum(full)
    value = math.sqrt(total)
    cert = math.sqrt(total + math.fsum(certs)) - value
    return BrokenNorm(value, math.sqrt(math.fsum(semi)), np.asarray(full), cert)


# ---------------------------------------------------------------------------
# zero extension on a periodic grid


@dataclass
class GridSample:
    """Cell-centre samples of a zero extension on [x0, x0 + L]^2."""

    x0: float
    y0: float
    L: float
    N: int
    values: np.ndarray
    mask: np.ndarray  # INSIDE / OUTSIDE / UNCERTAIN codes per cell
    sampler: Callable | None = field(default=None, repr=False, compare=False)
    _coarse: "GridSample | None" = field(default=None, repr=False, compare=False)

    @property
    def spacing(self) -> float:
        return self.L / self.N

    @property
    def uncertain_count(self) -> int:
        return int(np.count_nonzero(self.mask == UNCERTAIN))

    def inside_area(self) -> float:
        return float(np.count_nonzero(self.mask == INSIDE)) * self.spacing ** 2

    def grid_l2(self) -> float:
        return math.sqrt(float(np.sum(self.values * self.values))) * self.spacing

    def coarse(self) -> "GridSample | None":
        if self._coarse is None and self.sampler is not None and self.N >= 4:
            self._coarse = self.sampler(self.N // 2)
        return self._coarse


def default_box(m_or_domain, pad: float = PAD_FACTOR) -> tuple[float, float, float]:
    """Square of side pad * diam(Omega) centred on the domain's bounding-box centre."""
    dom = getattr(m_or_domain, "domain", m_or_domain)
    L = pad * diameter(dom)
    x0, y0, x1, y1 = dom.region.bbox
    cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    return cx - L / 2, cy - L / 2, L


def _grid_points(x0, y0, L, N):
    c = (np.arange(N) + 0.5) * (L / N)
    X, Y = np.meshgrid(x0 + c, y0 + c, indexing="ij")
    return np.stack([X.ravel(), Y.ravel()], axis=1)


def sample_zero_extension(u, v: PiecewisePoly | None = None, box=None, N: int = DEFAULT_N,
                          domain=None, depth: int | None = None) -> GridSample:
    """Grid of u - v at certified Inside cell centres, zero elsewhere.

    With ``v`` given, a point counts as Inside when some mesh element
    certifies it (this also certifies it Inside the domain).  Without ``v``
    the domain descriptor is used.
    """
    if N < 2 or N & (N - 1):
        raise ValueError("N must be a power of two")
    if v is None and domain is None:
        raise ValueError("need a piecewise polynomial or a domain")
    dom = v.mesh.domain if v is not None else domain
    if box is None:
        box = default_box(dom)
    x0, y0, L = box
    pts = _grid_points(x0, y0, L, N)
    vals = np.zeros(len(pts))
    if v is None:
        mask = classify_points(dom, pts, depth)
        ins = mask == INSIDE
        if np.any(ins):
            vals[ins] = np.asarray(u(pts[ins]), float)
    else:
        owner = locate(v.mesh, pts, depth)
        mask = classify_points(dom, pts, depth)
        # Inside the domain but unclaimed by any element: shared element borders
        mask = np.where((mask == INSIDE) & (owner < 0), -1, mask)
        mask = np.where(owner >= 0, INSIDE, mask)
        for i in np.unique(owner[owner >= 0]):
            sel = owner == i
            vals[sel] = np.asarray(u(pts[sel]), float) - v.eval_element(int(i), pts[sel])

    def resample(n):
        return sample_zero_extension(u, v, box, n, domain, depth)

    return GridSample(x0, y0, L, N, vals.reshape(N, N), mask.reshape(N, N).astype(np.int8), resample)


def sample_function(f, box, N: int) -> GridSample:
    """Cell-centre samples of a function defined on the whole plane (no masking)."""
    x0, y0, L = box
    vals = np.asarray(f(_grid_points(x0, y0, L, N)), float).reshape(N, N)
    return GridSample(x0, y0, L, N, vals, np.full((N, N), INSIDE, np.int8),
                      lambda n: sample_function(f, box, n))


@dataclass
class NormResult:
    value: float
    N: int
    L: float
    s: float
    delta: float = float("nan")
    uncertain: int = 0

    def __float__(self):
        return self.value


def fourier_norm_squared(values: np.ndarray, L: float, s: float) -> float:
    N = values.shape[0]
    G = np.fft.fft2(values) / (N * N)
    k = np.fft.fftfreq(N, d=1.0 / N)
    xi2 = (2 * np.pi / L) ** 2 * (k[:, None] ** 2 + k[None, :] ** 2)
    weight = (1.0 + xi2) ** s
    return L * L * float(np.sum(weight * (G.real ** 2 + G.imag ** 2)))


def sobolev_norm_fourier(g: GridSample, s: float, self_convergence: bool = True) -> NormResult:
    """Discrete (sum_k (1 + |xi_k|^2)^s |g_hat_k|^2)^(1/2) on the periodic box.

    xi_k = 2 pi k / L and the transform is scaled so that s = 0 gives the
    midpoint-rule L2 norm of the samples.  ``delta`` is the change against
    the same estimator on an N/2 grid.
    """
    val = math.sqrt(fourier_norm_squared(g.values, g.L, s))
    delta = float("nan")
    if self_convergence:
        c = g.coarse()
        if c is not None:
            delta = abs(val - math.sqrt(fourier_norm_squared(c.values, c.L, s)))
    return NormResult(val, g.N, g.L, float(s), delta, g.uncertain_count)


def gaussian_norm_oracle(sigma: float, s: float) -> float:
    """Whole-space H^s norm of exp(-|x|^2 / (2 sigma^2)) by radial quadrature."""
    from scipy.integrate import quad

    def f(rho):
        return (1 + rho * rho) ** s * sigma ** 4 * math.exp(-(sigma * rho) ** 2) * 2 * math.pi * rho

    val, _ = quad(f, 0.0, np.inf, epsabs=0.0, epsrel=1e-13, limit=200)
    return math.sqrt(val)
