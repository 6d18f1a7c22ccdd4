import math

import numpy as np
import pytest

from fractalhp import geometry as G, quadrature as Q
from fractalhp.functions import Gaussian

AREA = 2 * math.sqrt(3) / 5


def test_unit_square_all_interior():
    sq = G.Polygon(((0, 0), (1, 0), (1, 1), (0, 1)))
    for d in (0, 3, 6):
        dec = Q.decompose(sq, d)
        assert dec.measure_lo == pytest.approx(1.0) and dec.measure_hi == pytest.approx(1.0)


@pytest.mark.parametrize("d", [6, 8, 10])
def test_snowflake_area_bracket(snow, d):
    dec = Q.decompose(snow, d)
    assert dec.measure_lo <= AREA <= dec.measure_hi


def test_bracket_narrows(snow):
    w = [Q.decompose(snow, d).boundary_measure for d in (6, 8, 10)]
    assert w[0] > w[1] > w[2]


def test_box_counting_slope(snow):
    assert 1.21 <= Q.box_counting_slope(snow, range(6, 13)) <= 1.31


def test_negative_depth(snow):
    with pytest.raises(ValueError):
        Q.decompose(snow, -1)


def test_disk_cache(snow, tmp_path, monkeypatch):
    monkeypatch.setenv(Q.CACHE_ENV, str(tmp_path))
    Q.clear_cache()
    a = Q.decompose(snow, 5)
    assert list(tmp_path.glob("cells-*.npz"))
    Q.clear_cache()
    b = Q.decompose(snow, 5)
    np.testing.assert_array_equal(a.interior, b.interior)
    np.testing.assert_array_equal(a.boundary, b.boundary)


def test_integrate_one(snow):
    dec = Q.decompose(snow, 8)
    val, err = Q.integrate_poly(snow, [[1.0]], 8)
    assert val == pytest.approx(dec.measure_lo, rel=1e-13)
    assert val <= AREA <= val + err + 1e-15


def test_integrate_x_symmetric(snow):
    val, err = Q.integrate_poly(snow, [[0.0], [1.0]], 8)
    assert abs(val) <= max(err, 1e-15)
    assert abs(val) < 1e-14


def test_degree_guard(snow):
    C = np.zeros((18, 1))
    C[17, 0] = 1.0
    with pytest.raises(ValueError):
        Q.integrate_poly(snow, C, 4)


def test_triangle_moments_reference():
    T = G.Triangle(((0, 0), (1, 0), (0, 1)))
    M = Q.triangle_moments(T, 3)
    assert M[0, 0] == pytest.approx(0.5, rel=1e-15)
    assert M[1, 0] == pytest.approx(1 / 6, rel=1e-15)
    for a in range(4):
        for b in range(4 - a):
            assert M[a, b] == pytest.approx(Q.reference_simplex_moment(a, b), rel=1e-13)


def test_triangle_moments_against_rule(rng):
    pts = rng.normal(size=(3, 2))
    T = G.Triangle(tuple(map(tuple, pts)))
    M = Q.triangle_moments(T, 4)
    rule = Q.element_rule(T, q=4)
    x = rule.physical_points()
    for a in range(5):
        for b in range(5 - a):
            ref = float(np.dot(rule.physical_weights(), x[:, 0] ** a * x[:, 1] ** b))
            assert M[a, b] == pytest.approx(ref, rel=1e-12, abs=1e-14)


def test_integrate_poly_on_triangle_exact():
    T = G.Triangle(((0.2, 0.1), (1.3, 0.4), (0.5, 1.2)))
    M = Q.triangle_moments(T, 3)
    C = np.zeros((4, 4))
    C[2, 1] = 1.0
    val, err = Q.integrate_poly(T, C)
    assert err == 0.0 and val == pytest.approx(M[2, 1], rel=1e-13)


def test_integrate_fn_constant(snow):
    dec = Q.decompose(snow, 7)
    val, est = Q.integrate_fn(snow, lambda x: 3.0 * np.ones(len(x)), 7)
    assert val == pytest.approx(3 * dec.measure_lo, rel=1e-13)
    assert est == pytest.approx(3 * dec.boundary_measure, rel=1e-13)


def test_integrate_fn_matches_poly(snow):
    f = lambda x: 1 + x[:, 0] ** 2 * x[:, 1] - x[:, 1] ** 3  # noqa: E731
    val, _ = Q.integrate_fn(snow, f, 7, q=2)
    C = np.zeros((4, 4))
    C[0, 0], C[2, 1], C[0, 3] = 1.0, 1.0, -1.0
    ref, err = Q.integrate_poly(snow, C, 7)
    assert abs(val - ref) <= 1e-13 + err


def test_integrate_fn_self_convergence(snow):
    g = Gaussian(0.2, (0.0, 0.0))
    a, est = Q.integrate_fn(snow, g, 6, q=6)
    b, _ = Q.integrate_fn(snow, g, 8, q=6)
    assert abs(a - b) < est


def test_mapped_element_integral():
    S = G.Similarity(0.5, 1 / 3, (0.3, -0.2))
    d = G.MappedSnowflake((S,))
    val, err = Q.integrate_poly(d, [[1.0]], 8)
    assert val <= AREA / 9 <= val + err


def test_boundary_excess_bound_prefers_exact_area(snow):
    rule = Q.element_rule(snow, 6, 2)
    ones = np.ones(len(rule.bnd_size))
    plain = Q.boundary_excess_bound(rule, ones, None)
    tight = Q.boundary_excess_bound(rule, ones, AREA)
    assert tight == pytest.approx(AREA - Q.decompose(snow, 6).measure_lo, rel=1e-12)
    assert tight < plain
