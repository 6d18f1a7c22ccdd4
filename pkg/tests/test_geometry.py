import math

import numpy as np
import pytest
from matplotlib.path import Path

from fractalhp import geometry as G
from fractalhp.geometry import INSIDE, OUTSIDE, UNCERTAIN, Similarity


def winding_inside(poly, pts):
    """Even-odd test against a closed polyline, independent of the kernels."""
    return Path(poly, closed=False).contains_points(pts)


ORACLE_DEPTH = 10


class TestSimilarity:
    def test_identity(self):
        assert np.array_equal(G.IDENTITY.apply([2.0, 3.0]), [2.0, 3.0])

    def test_scale(self):
        np.testing.assert_allclose(Similarity(scale=1 / 3).apply([3.0, 0.0]), [1.0, 0.0], atol=1e-15)

    def test_rotation(self):
        np.testing.assert_allclose(Similarity(math.pi / 2).apply([1.0, 0.0]), [0.0, 1.0], atol=1e-15)

    @pytest.mark.parametrize("bad", [0.0, -1.0, 1e-12, 1e12])
    def test_scale_guard(self, bad):
        with pytest.raises(ValueError):
            Similarity(scale=bad)

    def test_compose_and_inverse(self, rng):
        S = Similarity(0.3, 0.7, (0.1, -0.2), True)
        T = Similarity(-1.1, 2.0, (0.5, 0.4))
        x = rng.normal(size=(20, 2))
        np.testing.assert_allclose(S.compose(T).apply(x), S.apply(T.apply(x)), atol=1e-14)
        np.testing.assert_allclose(S.inverse().apply(S.apply(x)), x, atol=1e-14)
        assert Similarity.from_list(S.to_list()) == S


class TestBoundary:
    @pytest.mark.parametrize("k", [0, 1, 5])
    def test_perimeter(self, k):
        poly = G.snowflake_boundary(1.0, k)
        seg = np.roll(poly, -1, axis=0) - poly
        assert len(poly) == 3 * 4 ** k
        assert math.isclose(np.hypot(seg[:, 0], seg[:, 1]).sum(), 3 * (4 / 3) ** k, rel_tol=1e-12)

    def test_frame(self):
        poly = G.snowflake_boundary(1.0, 0)
        np.testing.assert_allclose(poly.mean(axis=0), [0, 0], atol=1e-15)
        assert np.argmax(poly[:, 1]) == 0 and abs(poly[0, 0]) < 1e-15

    def test_negative_depth(self):
        with pytest.raises(ValueError):
            G.snowflake_boundary(1.0, -1)


class TestClassify:
    def test_centroid(self, snow):
        for k in range(9):
            assert G.classify_point(snow, np.array([0.0, 0.0]), k) == INSIDE

    def test_far(self, snow):
        assert G.classify_point(snow, np.array([10.0, 0.0]), 4) == OUTSIDE

    def test_prefractal_vertex_uncertain(self, snow):
        v = G.snowflake_boundary(1.0, 3)
        assert np.all(G.classify_points(snow, v, 3) == UNCERTAIN)

    def test_resolution_against_winding_oracle(self, snow, rng):
        # points near depth-3 vertices, offset by 3^-5 so that depth >= 6 resolves them
        v = G.snowflake_boundary(1.0, 3)
        ang = rng.uniform(0, 2 * math.pi, len(v))
        pts = v + 3.0 ** -5 * np.stack([np.cos(ang), np.sin(ang)], axis=1)
        for k in (6, 7):
            c = G.classify_points(snow, pts, k)
            oracle = winding_inside(G.snowflake_boundary(1.0, min(k + 6, ORACLE_DEPTH)), pts)
            known = c != UNCERTAIN
            assert known.mean() > 0.5
            assert np.all((c[known] == INSIDE) == oracle[known])

    def test_random_points_agree_with_oracle(self, snow, rng):
        pts = rng.uniform(-0.7, 0.7, (3000, 2))
        c = G.classify_points(snow, pts, 6)
        oracle = winding_inside(G.snowflake_boundary(1.0, ORACLE_DEPTH), pts)
        known = c != UNCERTAIN
        assert np.all((c[known] == INSIDE) == oracle[known])

    def test_uncertain_band_shrinks(self, snow, rng):
        pts = rng.uniform(-0.7, 0.7, (3000, 2))
        counts = [np.sum(G.classify_points(snow, pts, k) == UNCERTAIN) for k in (3, 5, 7)]
        assert counts[0] > counts[1] > counts[2]

    def test_mapped_copy(self, snow, rng):
        S = Similarity(0.4, 1 / 3, (0.2, 0.1))
        d = G.MappedSnowflake((S,))
        pts = rng.uniform(-0.7, 0.7, (500, 2))
        np.testing.assert_array_equal(G.classify_points(d, S.apply(pts), 6), G.classify_points(snow, pts, 6))


class TestAreaDiameter:
    def test_snowflake_area(self, snow):
        assert math.isclose(G.reference_area(snow), 2 * math.sqrt(3) / 5, rel_tol=1e-14)

    def test_triangle_area(self):
        assert G.reference_area(G.Triangle(((0, 0), (1, 0), (0, 1)))) == pytest.approx(0.5, rel=1e-15)

    def test_scaled_area(self):
        d = G.MappedSnowflake((Similarity(scale=1 / 3),))
        assert math.isclose(G.reference_area(d), 2 * math.sqrt(3) / 5 / 9, rel_tol=1e-14)

    def test_triangle_diameter(self):
        assert G.diameter(G.Triangle(((0, 0), (1, 0), (0, 1)))) == pytest.approx(math.sqrt(2), rel=1e-15)

    def test_snowflake_diameter(self, snow):
        d = G.diameter(snow)
        # tips are vertices of every prefractal, so the hull diameter is attained at depth 0
        assert 2 / math.sqrt(3) <= d < 4 / 3 * 2 / math.sqrt(3)
        hull12 = G._hull_diameter(G.snowflake_boundary(1.0, 8))
        assert math.isclose(d, hull12, rel_tol=1e-12)

    def test_scaled_diameter(self, snow):
        d = G.MappedSnowflake((Similarity(0.7, 1 / 3, (1.0, 2.0)),))
        assert math.isclose(G.diameter(d), G.diameter(snow) / 3, rel_tol=1e-12)


class TestDescriptors:
    def test_polygon_orientation(self):
        p = G.Polygon(((0, 0), (0, 1), (1, 1), (1, 0)))
        assert G.reference_area(p) == pytest.approx(1.0)

    def test_degenerate_polygon(self):
        with pytest.raises(ValueError):
            G.Polygon(((0, 0), (1, 1), (2, 2)))

    @pytest.mark.parametrize("d", [
        G.Snowflake(2.0),
        G.MappedSnowflake((Similarity(0.1, 0.5, (1, 2)),)),
        G.Triangle(((0, 0), (1, 0), (0, 1))),
        G.FractalEdged(((0, 0), (1, 0), (0.5, 1)), (1, 0, 0), Similarity(0.2, 2.0)),
    ])
    def test_roundtrip(self, d):
        assert G.descriptor_from_dict(d.to_dict()) == d
