import numpy as np
import pytest

from fractalhp import geometry as G
from fractalhp.functions import REGISTRY, make_test_function, smooth_step

SPECS = [
    {"id": "poly", "p0": 3},
    {"id": "gaussian"},
    {"id": "gaussian", "sigma": 0.1, "x0": (0.2, -0.1)},
    {"id": "sinprod", "k": 2},
    {"id": "radial_singular", "alpha": 0.5},
    {"id": "radial_singular", "alpha": 0.25, "x0": (0.1, 0.0), "rc": 0.2},
]


def inside_points(rng, n=200):
    pts = rng.uniform(-0.6, 0.6, (4 * n, 2))
    ok = G.classify_points(G.Snowflake(1.0), pts, 5) == G.INSIDE
    pts = pts[ok][:n]
    # keep away from the radial singularities, where finite differences break down
    far = np.min([np.hypot(*(pts - c).T) for c in ((0, 0), (0.1, 0))], axis=0) > 0.02
    return pts[far]


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s["id"])
def test_gradient_matches_finite_differences(spec, rng):
    u = make_test_function(spec)
    x = inside_points(rng)
    g = u.grad(x)
    eps = 1e-6
    for k in range(2):
        e = np.zeros(2)
        e[k] = eps
        fd = (u(x + e) - u(x - e)) / (2 * eps)
        scale = np.maximum(np.abs(g[:, k]), np.abs(u(x)) + 1e-3)
        assert np.max(np.abs(fd - g[:, k]) / scale) < 1e-5


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s["id"])
def test_hessian_matches_finite_differences(spec, rng):
    u = make_test_function(spec)
    x = inside_points(rng)
    H = u.hess(x)
    eps = 1e-5
    ex, ey = np.array([eps, 0.0]), np.array([0.0, eps])
    gxx = (u.grad(x + ex)[:, 0] - u.grad(x - ex)[:, 0]) / (2 * eps)
    gxy = (u.grad(x + ey)[:, 0] - u.grad(x - ey)[:, 0]) / (2 * eps)
    gyy = (u.grad(x + ey)[:, 1] - u.grad(x - ey)[:, 1]) / (2 * eps)
    scale = np.abs(H).max() + 1e-3
    for fd, col in ((gxx, 0), (gxy, 1), (gyy, 2)):
        assert np.max(np.abs(fd - H[:, col])) / scale < 1e-5


def test_derivatives_bundle_consistent(rng):
    u = make_test_function("gaussian")
    x = rng.normal(size=(30, 2)) * 0.3
    v, g, h = u.derivatives(x, 2)
    np.testing.assert_allclose(v, u(x))
    np.testing.assert_allclose(g, u.grad(x))
    with pytest.raises(ValueError):
        u.derivatives(x, 3)


def test_regularity_tags():
    assert make_test_function({"id": "radial_singular", "alpha": 0.5}).regularity == pytest.approx(1.5)
    assert make_test_function("gaussian").regularity == np.inf


def test_radial_cutoff():
    u = make_test_function({"id": "radial_singular", "rc": 0.4})
    r = np.array([[0.1, 0.0], [0.39, 0.0], [0.41, 0.0], [1.0, 1.0]])
    val = u(r)
    assert val[0] == pytest.approx(0.1 ** 0.5)
    assert val[2] == 0.0 and val[3] == 0.0
    assert u(np.zeros((1, 2)))[0] == 0.0


def test_smooth_step_limits():
    t = np.array([-1.0, 0.0, 0.5, 1.0, 2.0])
    s, _, _ = smooth_step(t)
    np.testing.assert_allclose(s, [1, 1, 0.5, 0, 0], atol=1e-15)


def test_registry_errors():
    assert set(REGISTRY) == {"poly", "gaussian", "sinprod", "radial_singular"}
    with pytest.raises(ValueError):
        make_test_function("nope")
