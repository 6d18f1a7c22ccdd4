"""Discontinuous piecewise polynomials: bases, Gram systems, the element-wise
L2 projection and the covering-cube quasi-interpolant.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from . import quadrature
from .geometry import IDENTITY, Similarity
from .mesh import Covering, Mesh, locate

TOL_GALERKIN = 1e-8
MAX_DEGREE = 8


class GramError(RuntimeError):
    pass


def multi_indices(p: int) -> list[tuple[int, int]]:
    """(a, b) with a + b <= p, grouped by total degree."""
    return [(t - b, b) for t in range(p + 1) for b in range(t + 1)]


@dataclass(frozen=True)
class PolyBasis:
    """Scaled monomials ((xi - c) / r)^alpha in reference coordinates xi.

    ``frame`` maps reference to physical coordinates, so the physical basis
    is phi(frame^-1 x).
    """

    degree: int
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 1.0
    frame: Similarity = IDENTITY

    def __post_init__(self):
        if not 0 <= self.degree <= MAX_DEGREE:
            raise ValueError(f"degree must be in [0, {MAX_DEGREE}]")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @classmethod
    def for_element(cls, K, p: int) -> "PolyBasis":
        g = getattr(K, "geom", K)
        x0, y0, x1, y1 = g.reference_region().bbox
        r = 0.5 * max(x1 - x0, y1 - y0)
        return cls(p, (0.5 * (x0 + x1), 0.5 * (y0 + y1)), r, g.frame)

    @property
    def alphas(self) -> list[tuple[int, int]]:
        return multi_indices(self.degree)

    @property
    def size(self) -> int:
        return (self.degree + 1) * (self.degree + 2) // 2

    def local(self, x, reference: bool = False) -> np.ndarray:
        x = np.asarray(x, float).reshape(-1, 2)
        if not reference and self.frame != IDENTITY:
            x = self.frame.inverse().apply(x)
        return (x - np.asarray(self.center)) / self.radius

    def _powers(self, u):
        p = self.degree
        pu = np.ones((len(u), p + 1))
        pv = np.ones((len(u), p + 1))
        for k in range(1, p + 1):
            pu[:, k] = pu[:, k - 1] * u[:, 0]
            pv[:, k] = pv[:, k - 1] * u[:, 1]
        return pu, pv

    def values(self, x, reference: bool = False) -> np.ndarray:
        """Vandermonde matrix, shape (n, size)."""
        pu, pv = self._powers(self.local(x, reference))
        return np.stack([pu[:, a] * pv[:, b] for a, b in self.alphas], axis=1)

    def _jac(self) -> np.ndarray:
        """d(local)/dx as a 2x2 matrix."""
        return self.frame.linear.T / (self.frame.scale * self.radius)

    def gradients(self, x, reference: bool = False) -> np.ndarray:
        """Physical gradients, shape (n, size, 2)."""
        pu, pv = self._powers(self.local(x, reference))
        du = np.stack([(a * pu[:, a - 1] if a else 0 * pu[:, 0]) * pv[:, b] for a, b in self.alphas], axis=1)
        dv = np.stack([pu[:, a] * (b * pv[:, b - 1] if b else 0 * pv[:, 0]) for a, b in self.alphas], axis=1)
        J = self._jac()
        return np.stack([du, dv], axis=-1) @ J

    def hessians(self, x, reference: bool = False) -> np.ndarray:
        """Physical second derivatives (xx, xy, yy), shape (n, size, 3)."""
        pu, pv = self._powers(self.local(x, reference))

        def d(pw, k, order):
            if k < order:
                return 0 * pw[:, 0]
            c = math.factorial(k) // math.factorial(k - order)
            return c * pw[:, k - order]

        uu = np.stack([d(pu, a, 2) * pv[:, b] for a, b in self.alphas], axis=1)
        uv = np.stack([d(pu, a, 1) * d(pv, b, 1) for a, b in self.alphas], axis=1)
        vv = np.stack([pu[:, a] * d(pv, b, 2) for a, b in self.alphas], axis=1)
        J = self._jac()
        Hl = np.stack([np.stack([uu, uv], -1), np.stack([uv, vv], -1)], -2)  # (n, size, 2, 2)
        Hx = np.einsum("ki,nsij,jl->nskl", J.T, Hl, J)
        return np.stack([Hx[..., 0, 0], Hx[..., 0, 1], Hx[..., 1, 1]], axis=-1)

    def coefficient_table(self, c) -> np.ndarray:
        """Coefficients as a table C[a, b] for ``quadrature.integrate_poly``."""
        C = np.zeros((self.degree + 1, self.degree + 1))
        for (a, b), v in zip(self.alphas, c):
            C[a, b] = v
        return C


# ---------------------------------------------------------------------------
# element systems


@dataclass
class _ElementSystem:
    """Reference-frame data shared by congruent elements."""

    basis: PolyBasis
    points: np.ndarray  # reference quadrature points
    phi: np.ndarray  # (nq, nb) basis values there
    weights: np.ndarray  # reference weights
    gram_ref: np.ndarray
    factor: tuple
    cond: float

    bnd_points: np.ndarray | None = None  # reference corners + centre of boundary cells
    _tables: dict = field(default_factory=dict)

    def tables(self, boundary: bool = False, order: int = 0) -> list[np.ndarray]:
        """Basis values and local (u, v) derivatives at the rule or boundary points."""
        key = (boundary, order)
        if key not in self._tables:
            pts = self.bnd_points if boundary else self.points
            b = PolyBasis(self.basis.degree, self.basis.center, self.basis.radius)
            out = [self.phi if not boundary else b.values(pts, reference=True)]
            if order >= 1:
                out.append(b.gradients(pts, reference=True) * b.radius)
            if order >= 2:
                out.append(b.hessians(pts, reference=True) * b.radius ** 2)
            self._tables[key] = out
        return self._tables[key]


_systems: dict = {}


def _system(K, basis: PolyBasis, depth: int, q: int) -> _ElementSystem:
    g = getattr(K, "geom", K)
    key = (g.reference_region().key, basis.degree, basis.center, basis.radius, depth, q)
    sys_ = _systems.get(key)
    if sys_ is None:
        rule = quadrature.element_rule(g, depth, q)
        phi = basis.values(rule.points, reference=True)
        G = phi.T @ (rule.weights[:, None] * phi)
        G = 0.5 * (G + G.T)
        try:
            fac = cho_factor(G, lower=True)
        except LinAlgError as exc:
            raise GramError(f"element {getattr(K, 'id', None)}: Gram matrix not positive definite "
                            f"(increase quadrature depth)") from exc
        off = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, 0.5]])
        bpts = (rule.bnd_lo[:, None, :] + rule.bnd_size[:, None, None] * off[None]).reshape(-1, 2)
        sys_ = _ElementSystem(basis, rule.points, phi, rule.weights, G, fac, float(np.linalg.cond(G)), bpts)
        _systems.setdefault(key, sys_)
    return sys_


def gram(K, basis: PolyBasis | None = None, depth: int = quadrature.DEFAULT_DEPTH,
         p: int | None = None) -> np.ndarray:
    """G_ij = integral over K of phi_i phi_j (interior-cell quadrature)."""
    if basis is None:
        basis = PolyBasis.for_element(K, p or 0)
    g = getattr(K, "geom", K)
    s = _system(K, basis, depth, basis.degree + 1)
    return s.gram_ref * g.frame.scale ** 2


# ---------------------------------------------------------------------------
# piecewise polynomials


@dataclass
class PiecewisePoly:
    mesh: Mesh
    degree: int
    coeffs: np.ndarray  # (n_elements, basis size)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, float)
        nb = (self.degree + 1) * (self.degree + 2) // 2
        if self.coeffs.shape != (len(self.mesh.elements), nb):
            raise ValueError("coefficient array does not match mesh and degree")

    @cached_property
    def bases(self) -> list[PolyBasis]:
        return [PolyBasis.for_element(e, self.degree) for e in self.mesh.elements]

    def eval_element(self, i: int, x) -> np.ndarray:
        return self.bases[i].values(x) @ self.coeffs[i]

    def grad_element(self, i: int, x) -> np.ndarray:
        return np.einsum("nsd,s->nd", self.bases[i].gradients(x), self.coeffs[i])

    def hess_element(self, i: int, x) -> np.ndarray:
        return np.einsum("nsd,s->nd", self.bases[i].hessians(x), self.coeffs[i])

    def at_rule(self, i: int, depth: int, q: int, order: int = 0, boundary: bool = False) -> list[np.ndarray]:
        """[values, gradients, (xx, xy, yy)] at element i's quadrature points,
        or at the corners and centres of its boundary cells."""
        e = self.mesh.elements[i]
        s = _system(e, self.bases[i], depth, q)
        tab = s.tables(boundary, order)
        c = self.coeffs[i]
        out = [tab[0] @ c]
        if order >= 1:
            J = self.bases[i]._jac()
            out.append(np.einsum("nsd,s->nd", tab[1], c) @ J)
        if order >= 2:
            h = np.einsum("nsd,s->nd", tab[2], c)
            Hl = np.stack([np.stack([h[:, 0], h[:, 1]], -1), np.stack([h[:, 1], h[:, 2]], -1)], -2)
            Hx = np.einsum("ki,nij,jl->nkl", J.T, Hl, J)
            out.append(np.stack([Hx[:, 0, 0], Hx[:, 0, 1], Hx[:, 1, 1]], axis=1))
        return out

    def eval_points(self, pts, depth: int | None = None):
        """Values at points plus the owning element index (-1 where unclaimed, value NaN)."""
        pts = np.asarray(pts, float).reshape(-1, 2)
        owner = locate(self.mesh, pts, depth)
        out = np.full(len(pts), np.nan)
        for i in np.unique(owner[owner >= 0]):
            sel = owner == i
            out[sel] = self.eval_element(int(i), pts[sel])
        return out, owner

    def __call__(self, pts):
        return self.eval_points(pts)[0]

    def to_dict(self) -> dict:
        return {"format": "fractalhp-piecewise", "version": 1, "degree": self.degree,
                "mesh": self.mesh.to_dict(), "coeffs": self.coeffs.tolist()}

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def from_dict(cls, d: dict) -> "PiecewisePoly":
        if d.get("format") != "fractalhp-piecewise" or d.get("version") != 1:
            raise ValueError("unsupported piecewise-polynomial file")
        return cls(Mesh.from_dict(d["mesh"]), int(d["degree"]), np.asarray(d["coeffs"]))

    @classmethod
    def load(cls, path) -> "PiecewisePoly":
        return cls.from_dict(json.loads(Path(path).read_text()))


def eval_piecewise(v: PiecewisePoly, x, depth: int | None = None):
    """Value at a single point, or None when no element certifies it Inside."""
    val, owner = v.eval_points(np.asarray(x, float)[None, :], depth)
    return None if owner[0] < 0 else float(val[0])


@dataclass
class ProjectionReport:
    cond: np.ndarray
    max_residual: float
    certificate: float
    minimality_ok: bool = True
    elements: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def max_cond(self) -> float:
        return float(self.cond.max()) if len(self.cond) else 1.0


def _chunks(n: int, workers: int):
    size = max(1, -(-n // max(1, workers)))
    return [range(i, min(n, i + size)) for i in range(0, n, size)]


def _run(n: int, work, workers: int):
    """Apply ``work(range)`` over element chunks; results come back in order."""
    chunks = _chunks(n, workers if workers > 1 else 1)
    if workers <= 1 or len(chunks) == 1:
        return [work(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(work, chunks))


def default_q(p: int) -> int:
    return p + 2


def l2_project(m: Mesh, u, p: int, depth: int | None = None, q: int | None = None,
               workers: int = 1, spot_checks: int = 8, seed: int = 0):
    """Element-wise L2-orthogonal projection onto V_{h,p}.

    Gram matrix and right-hand side share one quadrature rule, so the
    discrete Galerkin orthogonality holds to rounding.
    """
    depth = m.quad_depth if depth is None else depth
    q = default_q(p) if q is None else q
    n = len(m.elements)
    nb = (p + 1) * (p + 2) // 2
    coeffs = np.zeros((n, nb))
    cond = np.zeros(n)
    resid = np.zeros(n)
    cert = np.zeros(n)
    mins = np.ones(n, dtype=bool)
    spots = set(np.random.default_rng(seed).choice(n, size=min(n, spot_checks), replace=False).tolist())

    def work(idx):
        for i in idx:
            e = m.elements[i]
            basis = PolyBasis.for_element(e, p)
            s = _system(e, basis, depth, q)
            rule = quadrature.element_rule(e, depth, q)
            x = rule.physical_points()
            ux = np.asarray(u(x), float)
            wu = rule.weights * ux
            c = cho_solve(s.factor, s.phi.T @ wu)
            coeffs[i] = c
            cond[i] = s.cond
            r = ux - s.phi @ c
            scale2 = rule.frame.scale ** 2
            g = s.phi.T @ (rule.weights * r) * scale2
            unorm = math.sqrt(scale2 * float(np.dot(rule.weights, ux * ux)))
            pnorm = np.sqrt(np.diag(s.gram_ref) * scale2)
            resid[i] = float(np.max(np.abs(g) / np.maximum(unorm * pnorm, 1e-300)))
            if len(rule.bnd_size):
                bs = rule.boundary_samples()
                ub = np.abs(np.asarray(u(bs.reshape(-1, 2)), float)).reshape(-1, 5).max(axis=1)
                cert[i] = float(np.dot(rule.boundary_areas(), ub))
            if i in spots:
                rng = np.random.default_rng(seed + 1 + i)
                best = float(np.dot(rule.weights, r * r))
                for _ in range(20):
                    dv = s.phi @ (rng.standard_normal(nb) * 1e-3 * (1 + np.abs(c).max()))
                    if float(np.dot(rule.weights, (r - dv) ** 2)) < best * (1 - 1e-12):
                        mins[i] = False
        return None

    _run(n, work, workers)
    report = ProjectionReport(cond, float(resid.max()), float(math.fsum(cert)), bool(mins.all()), n)
    return PiecewisePoly(m, p, coeffs), report


# ---------------------------------------------------------------------------
# covering-cube quasi-interpolant


def _legendre_tensor(p: int):
    return [(i, j) for i, j in multi_indices(p)]


def cube_projection(U, lo, side: float, p: int, order: int):
    """Coefficients of the L2 projection of U onto P_p on the square [lo, lo + side]^2,
    in the tensor Legendre basis P_i(s) P_j(t) with s, t in [-1, 1]."""
    x, w = quadrature.gauss_legendre(order)
    S, T = np.meshgrid(x, x, indexing="ij")
    pts = np.stack([lo[0] + 0.5 * side * (S.ravel() + 1), lo[1] + 0.5 * side * (T.ravel() + 1)], axis=1)
    W = np.outer(w, w).ravel()
    vals = np.asarray(U(pts), float)
    Ls = np.polynomial.legendre.legvander(S.ravel(), p)
    Lt = np.polynomial.legendre.legvander(T.ravel(), p)
    out = {}
    for i, j in _legendre_tensor(p):
        out[(i, j)] = (2 * i + 1) * (2 * j + 1) / 4.0 * float(np.dot(W * Ls[:, i] * Lt[:, j], vals))
    return out


def eval_cube_poly(coef: dict, lo, side: float, p: int, x) -> np.ndarray:
    x = np.asarray(x, float).reshape(-1, 2)
    s = 2.0 * (x[:, 0] - lo[0]) / side - 1.0
    t = 2.0 * (x[:, 1] - lo[1]) / side - 1.0
    Ls = np.polynomial.legendre.legvander(s, p)
    Lt = np.polynomial.legendre.legvander(t, p)
    return sum(c * Ls[:, i] * Lt[:, j] for (i, j), c in coef.items())


def covering_project(m: Mesh, cov: Covering, U, p: int, mreg: int | None = None,
                     depth: int | None = None, q: int | None = None, cube_order: int | None = None,
                     workers: int = 1) -> PiecewisePoly:
    """Restrict the L2 projection of U on each Q'_{kappa(K)} to K.

    ``mreg`` is accepted for the operator's signature; the cube projection
    does not depend on it.
    """
    depth = m.quad_depth if depth is None else depth
    q = default_q(p) if q is None else q
    order = max(2 * p + 2, 16) if cube_order is None else cube_order
    h = cov.cube_size
    cube_coef = {}
    for z in cov.used_cubes():
        lo, _ = cov.big_cube(z)
        cube_coef[z] = cube_projection(U, lo, 3 * h, p, order)
    n = len(m.elements)
    nb = (p + 1) * (p + 2) // 2
    coeffs = np.zeros((n, nb))

    def work(idx):
        for i in idx:
            e = m.elements[i]
            z = cov.kappa[e.id]
            lo, _ = cov.big_cube(z)
            basis = PolyBasis.for_element(e, p)
            s = _system(e, basis, depth, q)
            rule = quadrature.element_rule(e, depth, q)
            vals = eval_cube_poly(cube_coef[z], lo, 3 * h, p, rule.physical_points())
            coeffs[i] = cho_solve(s.factor, s.phi.T @ (rule.weights * vals))

    _run(n, work, workers)
    return PiecewisePoly(m, p, coeffs)
