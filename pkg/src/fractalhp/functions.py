"""Analytic test functions with derivatives up to order two.

All callables take an array of points of shape (n, 2).  ``grad`` returns
shape (n, 2) and ``hess`` returns the components (xx, xy, yy) as (n, 3).
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import SQRT3

P = np.polynomial.polynomial


class TestFunction:
    """Globally defined function u with a regularity tag.

    ``regularity`` is the Sobolev index below which u lies in H^s near the
    domain (``inf`` for smooth functions).
    """

    __test__ = False  # keep pytest from collecting this class

    name = "abstract"
    regularity = math.inf

    def __init__(self, **params):
        self.params = params

    def __call__(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def hess(self, x):
        raise NotImplementedError

    def derivatives(self, x, order: int) -> list[np.ndarray]:
        """[u, grad, hess][: order + 1] evaluated at x."""
        if order > 2:
            raise ValueError("derivatives are available up to order 2")
        x = np.asarray(x, float).reshape(-1, 2)
        out = [self(x)]
        if order >= 1:
            out.append(self.grad(x))
        if order >= 2:
            out.append(self.hess(x))
        return out

    @property
    def label(self) -> str:
        inner = ",".join(f"{k}={v}" for k, v in self.params.items())
        return f"{self.name}({inner})"

    def __repr__(self):
        return self.label


class Poly(TestFunction):
    """Fixed polynomial of total degree p0 with nonzero coefficients in every slot."""

    name = "poly"

    def __init__(self, p0: int = 2):
        super().__init__(p0=int(p0))
        C = np.zeros((p0 + 1, p0 + 1))
        for a in range(p0 + 1):
            for b in range(p0 + 1 - a):
                C[a, b] = (-1.0) ** b / (1.0 + a + 2.0 * b)
        self.coeffs = C

    def __call__(self, x):
        x = np.asarray(x, float).reshape(-1, 2)
        return P.polyval2d(x[:, 0], x[:, 1], self.coeffs)

    def grad(self, x):
        x = np.asarray(x, float).reshape(-1, 2)
        cx = P.polyder(self.coeffs, axis=0)
        cy = P.polyder(self.coeffs, axis=1)
        return np.stack([P.polyval2d(x[:, 0], x[:, 1], cx), P.polyval2d(x[:, 0], x[:, 1], cy)], axis=1)

    def hess(self, x):
        x = np.asarray(x, float).reshape(-1, 2)
        C = self.coeffs
        parts = [P.polyder(C, 2, axis=0), P.polyder(P.polyder(C, axis=0), axis=1), P.polyder(C, 2, axis=1)]
        return np.stack([P.polyval2d(x[:, 0], x[:, 1], c) for c in parts], axis=1)


class Gaussian(TestFunction):
    name = "gaussian"

    def __init__(self, sigma: float = 0.2, x0=(0.05, 0.1)):
        super().__init__(sigma=float(sigma), x0=tuple(map(float, x0)))
        self.sigma = float(sigma)
        self.x0 = np.asarray(x0, float)

    def __call__(self, x):
        d = np.asarray(x, float).reshape(-1, 2) - self.x0
        return np.exp(-np.sum(d * d, axis=1) / (2 * self.sigma ** 2))

    def grad(self, x):
        d = np.asarray(x, float).reshape(-1, 2) - self.x0
        return -(d / self.sigma ** 2) * self(x)[:, None]

    def hess(self, x):
        return self.derivatives(x, 2)[2]

    def derivatives(self, x, order: int) -> list[np.ndarray]:
        if order > 2:
            raise ValueError("derivatives are available up to order 2")
        d = np.asarray(x, float).reshape(-1, 2) - self.x0
        s2 = self.sigma ** 2
        g = np.exp(-np.sum(d * d, axis=1) / (2 * s2))
        out = [g]
        if order >= 1:
            out.append(-(d / s2) * g[:, None])
        if order >= 2:
            out.append(np.stack([(d[:, 0] ** 2 / s2 - 1) / s2 * g,
                                 d[:, 0] * d[:, 1] / s2 ** 2 * g,
                                 (d[:, 1] ** 2 / s2 - 1) / s2 * g], axis=1))
        return out


class SinProd(TestFunction):
    """sin(k pi (x + 0.1)) sin(k pi (y + 0.2)); the shifts break the frame symmetry."""

    name = "sinprod"

    def __init__(self, k: float = 1.0):
        super().__init__(k=float(k))
        self.w = math.pi * float(k)

    def _parts(self, x):
        x = np.asarray(x, float).reshape(-1, 2)
        a = self.w * (x[:, 0] + 0.1)
        b = self.w * (x[:, 1] + 0.2)
        return np.sin(a), np.cos(a), np.sin(b), np.cos(b)

    def __call__(self, x):
        sa, _, sb, _ = self._parts(x)
        return sa * sb

    def grad(self, x):
        sa, ca, sb, cb = self._parts(x)
        return self.w * np.stack([ca * sb, sa * cb], axis=1)

    def hess(self, x):
        sa, ca, sb, cb = self._parts(x)
        w2 = self.w ** 2
        return w2 * np.stack([-sa * sb, ca * cb, -sa * sb], axis=1)


def _phi(t):
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def _phi_derivs(t):
    """phi, phi', phi'' for phi(t) = exp(-1/t) on t > 0 (zero elsewhere)."""
    f = _phi(t)
    tt = np.where(t > 0, t, 1.0)
    d1 = np.where(t > 0, f / tt ** 2, 0.0)
    d2 = np.where(t > 0, f * (1.0 / tt ** 4 - 2.0 / tt ** 3), 0.0)
    return f, d1, d2


def smooth_step(t):
    """C-infinity step: 1 for t <= 0, 0 for t >= 1; returns value and two derivatives."""
    t = np.asarray(t, float)
    A, A1, A2 = _phi_derivs(1.0 - t)
    B, B1, B2 = _phi_derivs(t)
    A1, A2 = -A1, A2  # chain rule for the argument 1 - t
    S = A + B
    s = A / S
    N = A1 * B - A * B1
    ds = N / S ** 2
    dN = A2 * B - A * B2
    dS = A1 + B1
    d2s = (dN * S - 2.0 * N * dS) / S ** 3
    return s, ds, d2s


class RadialSingular(TestFunction):
    """r^alpha times a smooth cutoff that is 1 for r <= rc/2 and 0 for r >= rc.

    Lies in H^s for every s < 1 + alpha.  The default cutoff radius is
    0.3 times the diameter of the unit snowflake.
    """

    name = "radial_singular"

    def __init__(self, alpha: float = 0.5, x0=(0.0, 0.0), rc: float | None = None):
        rc = 0.3 * 2.0 / SQRT3 if rc is None else float(rc)
        super().__init__(alpha=float(alpha), x0=tuple(map(float, x0)), rc=rc)
        self.alpha = float(alpha)
        self.x0 = np.asarray(x0, float)
        self.rc = rc
        self.regularity = 1.0 + self.alpha

    def _radial(self, x):
        d = np.asarray(x, float).reshape(-1, 2) - self.x0
        r = np.hypot(d[:, 0], d[:, 1])
        a = 0.5 * self.rc
        t = (r - a) / (self.rc - a)
        chi, dchi, d2chi = smooth_step(t)
        dchi = dchi / (self.rc - a)
        d2chi = d2chi / (self.rc - a) ** 2
        rs = np.where(r > 0, r, 1.0)
        al = self.alpha
        p0 = np.where(r > 0, rs ** al, 0.0)
        p1 = np.where(r > 0, al * rs ** (al - 1), 0.0)
        p2 = np.where(r > 0, al * (al - 1) * rs ** (al - 2), 0.0)
        g = p0 * chi
        g1 = p1 * chi + p0 * dchi
        g2 = p2 * chi + 2 * p1 * dchi + p0 * d2chi
        return d, r, rs, g, g1, g2

    def __call__(self, x):
        return self._radial(x)[3]

    def grad(self, x):
        d, r, rs, _, g1, _ = self._radial(x)
        return np.where(r[:, None] > 0, g1[:, None] * d / rs[:, None], 0.0)

    def hess(self, x):
        d, r, rs, _, g1, g2 = self._radial(x)
        ux, uy = d[:, 0] / rs, d[:, 1] / rs
        t = g1 / rs
        out = np.stack([g2 * ux * ux + t * (1 - ux * ux),
                        (g2 - t) * ux * uy,
                        g2 * uy * uy + t * (1 - uy * uy)], axis=1)
        return np.where(r[:, None] > 0, out, 0.0)


REGISTRY = {cls.name: cls for cls in (Poly, Gaussian, SinProd, RadialSingular)}


def make_test_function(spec) -> TestFunction:
    """Build from a name, a TestFunction, or a mapping {'id': name, **params}."""
    if isinstance(spec, TestFunction):
        return spec
    if isinstance(spec, str):
        spec = {"id": spec}
    spec = dict(spec)
    fid = spec.pop("id", None) or spec.pop("name", None)
    if fid not in REGISTRY:
        raise ValueError(f"unknown test function {fid!r}")
    return REGISTRY[fid](**spec)
