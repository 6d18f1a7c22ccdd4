"""Discontinuous piecewise polynomial approximation on fractal meshes of the
Koch snowflake: geometry, meshes, certified quadrature, projections, norms
and convergence studies.
"""

from .approx import PiecewisePoly, PolyBasis, covering_project, l2_project
from .functions import make_test_function
from .geometry import (INSIDE, OUTSIDE, UNCERTAIN, FractalEdged, MappedSnowflake, Polygon,
                       Similarity, Snowflake, Triangle, classify_points, diameter)
from .kernels import BACKEND
from .mesh import Mesh, build_covering, build_mesh, hybrid_mesh, partition_check, snowflake_self_similar_mesh
from .norms import broken_norm, sample_zero_extension, sobolev_norm_fourier
from .quadrature import decompose, element_rule, integrate_fn, integrate_poly
from .study import StudyConfig, run_study, verify

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "FractalEdged", "INSIDE", "MappedSnowflake", "Mesh", "OUTSIDE", "PiecewisePoly",
    "PolyBasis", "Polygon", "Similarity", "Snowflake", "StudyConfig", "Triangle", "UNCERTAIN",
    "broken_norm", "build_covering", "build_mesh", "classify_points", "covering_project",
    "decompose", "diameter", "element_rule", "hybrid_mesh", "integrate_fn", "integrate_poly",
    "l2_project", "make_test_function", "partition_check", "run_study", "sample_zero_extension",
    "snowflake_self_similar_mesh", "sobolev_norm_fourier", "verify",
]
