"""The compiled kernels and the NumPy fallback must agree exactly."""

import numpy as np
import pytest

from fractalhp import geometry as G, kernels
from fractalhp.quadrature import _root_square

BACKENDS = kernels.backends()
needs_compiled = pytest.mark.skipif("compiled" not in BACKENDS, reason="extension not built")

REGIONS = [
    G.unit_snowflake_region(),
    G.unit_cap_region(),
    G.FractalEdged(((0, 0), (1, 0), (0.5, 0.9)), (1, 1, 0)).region,
    G.Triangle(((0, 0), (1, 0), (0, 1))).region,
]


def test_backend_name():
    assert kernels.BACKEND in BACKENDS


@needs_compiled
@pytest.mark.parametrize("region", REGIONS, ids=repr)
@pytest.mark.parametrize("depth", [0, 3, 6])
def test_classify_equivalent(region, depth):
    rng = np.random.default_rng(depth)
    x0, y0, x1, y1 = region.bbox
    pts = rng.uniform([x0 - 0.1, y0 - 0.1], [x1 + 0.1, y1 + 0.1], (3000, 2))
    pts = np.concatenate([pts, region.polyline(min(depth, 4))])
    a = BACKENDS["python"].classify_points(region.verts, region.koch, pts, depth, region.eps)
    b = BACKENDS["compiled"].classify_points(region.verts, region.koch, pts, depth, region.eps)
    np.testing.assert_array_equal(a, b)


@needs_compiled
@pytest.mark.parametrize("region", REGIONS, ids=repr)
@pytest.mark.parametrize("depth", [2, 5, 7])
def test_decompose_equivalent(region, depth):
    x0, y0, size = _root_square(region)
    a = BACKENDS["python"].decompose_cells(region.verts, region.koch, x0, y0, size, depth, 0.5, region.eps)
    b = BACKENDS["compiled"].decompose_cells(region.verts, region.koch, x0, y0, size, depth, 0.5, region.eps)
    for u, v in zip(a, b):
        np.testing.assert_array_equal(u, v)


@needs_compiled
def test_readonly_inputs():
    r = G.unit_snowflake_region()
    pts = np.zeros((3, 2))
    pts.setflags(write=False)
    assert BACKENDS["compiled"].classify_points(r.verts, r.koch, pts, 3, r.eps)[0] == G.INSIDE


def test_pure_env_selects_fallback():
    import os
    import subprocess
    import sys

    env = dict(os.environ, FRACTALHP_PURE="1")
    out = subprocess.run([sys.executable, "-c", "from fractalhp import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
