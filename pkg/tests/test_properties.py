import math

import numpy as np
from hypothesis import given, settings, strategies as st

from fractalhp import approx as A, geometry as G, norms, quadrature as Q
from fractalhp.geometry import Similarity

angles = st.floats(-math.pi, math.pi, allow_nan=False)
scales = st.floats(0.05, 5.0)
coords = st.floats(-3.0, 3.0, allow_nan=False)

similarities = st.builds(lambda r, s, x, y, f: Similarity(r, s, (x, y), f), angles, scales, coords, coords,
                         st.booleans())


@given(similarities, similarities)
@settings(max_examples=60, deadline=None)
def test_similarity_group_laws(S, T):
    x = np.array([[0.3, -0.7], [1.0, 2.0]])
    np.testing.assert_allclose(S.compose(T).apply(x), S.apply(T.apply(x)), atol=1e-10)
    np.testing.assert_allclose(S.compose(S.inverse()).apply(x), x, atol=1e-10)


@given(similarities)
@settings(max_examples=40, deadline=None)
def test_mapped_area_and_diameter_scale(S):
    d = G.MappedSnowflake((S,))
    assert math.isclose(G.reference_area(d), 2 * math.sqrt(3) / 5 * S.scale ** 2, rel_tol=1e-12)
    assert math.isclose(G.diameter(d), 2 / math.sqrt(3) * S.scale, rel_tol=1e-9)


@given(similarities)
@settings(max_examples=25, deadline=None)
def test_classification_invariant_under_placement(S):
    rng = np.random.default_rng(0)
    pts = rng.uniform(-0.7, 0.7, (300, 2))
    d = G.MappedSnowflake((S,))
    np.testing.assert_array_equal(G.classify_points(d, S.apply(pts), 5),
                                  G.classify_points(G.Snowflake(1.0), pts, 5))


@given(st.integers(2, 7), st.integers(0, 3))
@settings(max_examples=20, deadline=None)
def test_depth_refinement_monotone(d, k):
    snow = G.Snowflake(1.0)
    a, b = Q.decompose(snow, d), Q.decompose(snow, d + 1)
    assert a.measure_lo <= b.measure_lo + 1e-15
    assert b.measure_hi <= a.measure_hi + 1e-15


@given(st.lists(st.tuples(coords, coords), min_size=3, max_size=3))
@settings(max_examples=50, deadline=None)
def test_triangle_moments_affine(vs):
    v = np.array(vs)
    area2 = abs((v[1, 0] - v[0, 0]) * (v[2, 1] - v[0, 1]) - (v[2, 0] - v[0, 0]) * (v[1, 1] - v[0, 1]))
    if area2 < 1e-3:
        return
    T = G.Triangle(tuple(map(tuple, v)))
    M = Q.triangle_moments(T, 2)
    assert math.isclose(M[0, 0], area2 / 2, rel_tol=1e-12)
    assert math.isclose(M[1, 0], area2 / 2 * v[:, 0].mean(), rel_tol=1e-10, abs_tol=1e-12)


@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
@settings(max_examples=30, deadline=None)
def test_fourier_norm_monotone(s, t):
    rng = np.random.default_rng(3)
    vals = rng.normal(size=(32, 32))
    lo, hi = min(s, t), max(s, t)
    assert norms.fourier_norm_squared(vals, 2.0, lo) <= norms.fourier_norm_squared(vals, 2.0, hi) * (1 + 1e-12)


@given(st.integers(0, 4), st.floats(-1, 1), st.floats(-1, 1))
@settings(max_examples=30, deadline=None)
def test_basis_monomials(p, x, y):
    b = A.PolyBasis(p, (0.0, 0.0), 1.0)
    row = b.values(np.array([[x, y]]))[0]
    np.testing.assert_allclose(row, [x ** a * y ** c for a, c in b.alphas], atol=1e-14)
