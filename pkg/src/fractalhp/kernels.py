"""Kernel back-end selection.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``FRACTALHP_PURE`` is set to ``1``, the NumPy fallback is
used.  ``BACKEND`` names the active one.
"""

import os

from . import _fallback

INSIDE = _fallback.INSIDE
OUTSIDE = _fallback.OUTSIDE
UNCERTAIN = _fallback.UNCERTAIN
KOCH_C = _fallback.KOCH_C

_compiled = None
if os.environ.get("FRACTALHP_PURE") != "1":
    try:
        from . import _kernels as _compiled
    except ImportError:  # pragma: no cover - depends on the build
        _compiled = None

if _compiled is not None:
    BACKEND = "compiled"
    classify_points = _compiled.classify_points
    decompose_cells = _compiled.decompose_cells
else:
    BACKEND = "python"
    classify_points = _fallback.classify_points
    decompose_cells = _fallback.decompose_cells

clean_cell_depth = _fallback.clean_cell_depth


def backends():
    """Mapping of available back-end names to their kernel modules."""
    out = {"python": _fallback}
    if _compiled is not None:
        out["compiled"] = _compiled
    return out
