"""Koch snowflake geometry: similarities, domain descriptors, certified
point classification and reference quantities.

Frame convention: the unit snowflake is built on the equilateral triangle of
side 1 with centroid at the origin and one vertex on the positive y-axis.
All polygons are stored counter-clockwise; a Koch edge A->B carries the Koch
curve on that chord, bulging to its right (outward).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np
from scipy.spatial import ConvexHull

from . import kernels

INSIDE = kernels.INSIDE
OUTSIDE = kernels.OUTSIDE
UNCERTAIN = kernels.UNCERTAIN

SQRT3 = math.sqrt(3.0)
SNOWFLAKE_AREA = 2.0 * SQRT3 / 5.0  # unit side
KOCH_CAP_AREA = SQRT3 / 20.0  # area between a unit chord and its Koch curve
KOCH_DIMENSION = math.log(4.0) / math.log(3.0)

# Koch curve lies within one segment length of its prefractal
C_BAND = 1.0
SCALE_MIN = 1e-9
SCALE_MAX = 1e9
DEFAULT_BOUNDARY_DEPTH = 8
_REL_EPS = 1e-12


@dataclass(frozen=True)
class Similarity:
    """x -> R(rotation) F s x + translation, with F the reflection y -> -y.

    Order of application: scale, then reflect, then rotate, then translate.
    """

    rotation: float = 0.0
    scale: float = 1.0
    translation: tuple[float, float] = (0.0, 0.0)
    reflect: bool = False

    def __post_init__(self):
        if not (SCALE_MIN <= self.scale <= SCALE_MAX):
            raise ValueError(f"similarity scale {self.scale!r} outside [{SCALE_MIN}, {SCALE_MAX}]")
        object.__setattr__(self, "translation", (float(self.translation[0]), float(self.translation[1])))

    @property
    def linear(self) -> np.ndarray:
        """Orthogonal part R F (without the scale)."""
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        M = np.array([[c, -s], [s, c]])
        if self.reflect:
            M = M @ np.diag([1.0, -1.0])
        return M

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = (self.scale * x) @ self.linear.T
        return y + np.asarray(self.translation)

    def compose(self, other: "Similarity") -> "Similarity":
        """self o other."""
        rot = self.rotation - other.rotation if self.reflect else self.rotation + other.rotation
        t = self.apply(np.asarray(other.translation))
        return Similarity(rot, self.scale * other.scale, (t[0], t[1]), self.reflect != other.reflect)

    def inverse(self) -> "Similarity":
        rot = self.rotation if self.reflect else -self.rotation
        partial = Similarity(rot, 1.0 / self.scale, (0.0, 0.0), self.reflect)
        t = -partial.apply(np.asarray(self.translation))
        return Similarity(rot, 1.0 / self.scale, (t[0], t[1]), self.reflect)

    def to_list(self) -> list:
        return [self.rotation, self.scale, self.translation[0], self.translation[1], int(self.reflect)]

    @classmethod
    def from_list(cls, v) -> "Similarity":
        return cls(float(v[0]), float(v[1]), (float(v[2]), float(v[3])), bool(v[4]))


IDENTITY = Similarity()


def apply_similarity(S: Similarity, x) -> np.ndarray:
    return S.apply(x)


class Region:
    """A polygon whose edges are straight or carry an outward Koch curve."""

    def __init__(self, verts, koch):
        v = np.array(verts, dtype=float).reshape(-1, 2)
        k = np.array(koch, dtype=np.uint8).reshape(-1)
        if v.shape[0] < 2 or k.shape[0] != v.shape[0]:
            raise ValueError("region needs >= 2 vertices and one flag per edge")
        if v.shape[0] == 2 and k.sum() != 1:
            raise ValueError("a two-vertex region needs exactly one Koch edge")
        edges = np.roll(v, -1, axis=0) - v
        if np.any(np.hypot(edges[:, 0], edges[:, 1]) == 0.0):
            raise ValueError("zero-length edge")
        self.verts = v
        self.koch = k
        self.verts.setflags(write=False)
        self.koch.setflags(write=False)

    @cached_property
    def key(self) -> tuple:
        return (tuple(self.verts.ravel().tolist()), tuple(self.koch.tolist()))

    def __eq__(self, other):
        return isinstance(other, Region) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return f"Region(n={len(self.verts)}, koch={self.koch.tolist()})"

    def mapped(self, S: Similarity) -> "Region":
        v = S.apply(self.verts)
        k = self.koch
        if S.reflect:
            # keep counter-clockwise order; the Koch curve is symmetric under reversal
            v = v[::-1]
            k = np.roll(k[::-1], -1)
        return Region(v, k)

    @cached_property
    def hull_points(self) -> np.ndarray:
        """Vertices plus Koch hull apexes; their convex hull contains the region."""
        v = self.verts
        w = np.roll(v, -1, axis=0)
        d = w - v
        apex = 0.5 * (v + w) + kernels.KOCH_C * np.stack([d[:, 1], -d[:, 0]], axis=1)
        return np.concatenate([v, apex[self.koch.astype(bool)]])

    @cached_property
    def bbox(self) -> tuple[float, float, float, float]:
        p = self.hull_points
        return (float(p[:, 0].min()), float(p[:, 1].min()), float(p[:, 0].max()), float(p[:, 1].max()))

    @cached_property
    def scale(self) -> float:
        x0, y0, x1, y1 = self.bbox
        return max(x1 - x0, y1 - y0)

    @property
    def eps(self) -> float:
        return _REL_EPS * self.scale

    @cached_property
    def max_koch_edge(self) -> float:
        d = np.roll(self.verts, -1, axis=0) - self.verts
        L = np.hypot(d[:, 0], d[:, 1])
        return float(L[self.koch.astype(bool)].max()) if self.koch.any() else 0.0

    @cached_property
    def area(self) -> float:
        v = self.verts
        w = np.roll(v, -1, axis=0)
        poly = 0.5 * float(np.sum(v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]))
        d = w - v
        L2 = (d[:, 0] ** 2 + d[:, 1] ** 2)[self.koch.astype(bool)]
        return poly + KOCH_CAP_AREA * float(L2.sum())

    def classify(self, pts, depth: int) -> np.ndarray:
        return kernels.classify_points(self.verts, self.koch, np.asarray(pts, float).reshape(-1, 2),
                                       int(depth), self.eps)

    def polyline(self, depth: int) -> np.ndarray:
        """Closed prefractal polyline (vertex list, last vertex not repeated)."""
        return koch_polyline(self.verts, self.koch, depth)


def koch_polyline(verts, koch, depth: int) -> np.ndarray:
    verts = np.asarray(verts, float)
    n = len(verts)
    out = []
    for k in range(n):
        a = verts[k]
        b = verts[(k + 1) % n]
        if koch[k]:
            seg = _koch_points(a, b, depth)
            out.append(seg[:-1])
        else:
            out.append(a[None, :])
    return np.concatenate(out)


def _koch_points(a, b, depth):
    pts = np.stack([a, b])
    for _ in range(depth):
        A = pts[:-1]
        B = pts[1:]
        d = B - A
        p1 = A + d / 3.0
        p3 = A + 2.0 * d / 3.0
        p2 = 0.5 * (A + B) + kernels.KOCH_C * np.stack([d[:, 1], -d[:, 0]], axis=1)
        body = np.stack([A, p1, p2, p3], axis=1).reshape(-1, 2)
        pts = np.concatenate([body, pts[-1:]])
    return pts


def unit_snowflake_vertices() -> np.ndarray:
    R = 1.0 / SQRT3
    ang = np.deg2rad([90.0, 210.0, 330.0])
    return np.stack([R * np.cos(ang), R * np.sin(ang)], axis=1)


@lru_cache(maxsize=None)
def unit_snowflake_region() -> Region:
    return Region(unit_snowflake_vertices(), [1, 1, 1])


@lru_cache(maxsize=None)
def unit_cap_region() -> Region:
    """Region between the chord [(0,0),(1,0)] and the Koch curve below it."""
    return Region([[0.0, 0.0], [1.0, 0.0]], [1, 0])


# ---------------------------------------------------------------------------
# domain descriptors


@dataclass(frozen=True)
class DomainDescriptor:
    """Geometric handle for Omega or a mesh element.

    Every descriptor is a reference region placed by a similarity ``frame``;
    integration and basis functions live in the reference coordinates.
    """

    boundary_depth: int = field(default=DEFAULT_BOUNDARY_DEPTH, kw_only=True)

    kind = "abstract"

    def reference_region(self) -> Region:
        raise NotImplementedError

    @property
    def frame(self) -> Similarity:
        return IDENTITY

    @cached_property
    def region(self) -> Region:
        if self.frame == IDENTITY:
            return self.reference_region()
        return self.reference_region().mapped(self.frame)

    @property
    def scale(self) -> float:
        return self.frame.scale

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Snowflake(DomainDescriptor):
    side: float = 1.0
    kind = "snowflake"

    def __post_init__(self):
        if not self.side > 0:
            raise ValueError("side must be positive")

    def reference_region(self):
        return unit_snowflake_region()

    @property
    def frame(self):
        return Similarity(0.0, self.side)

    def to_dict(self):
        return {"kind": self.kind, "side": self.side}


@dataclass(frozen=True)
class MappedSnowflake(DomainDescriptor):
    """Unit snowflake mapped by chain[0] o chain[1] o ... o chain[-1]."""

    chain: tuple[Similarity, ...] = ()
    kind = "mapped_snowflake"

    def __post_init__(self):
        object.__setattr__(self, "chain", tuple(self.chain))

    def reference_region(self):
        return unit_snowflake_region()

    @cached_property
    def frame(self):
        S = IDENTITY
        for T in self.chain:
            S = S.compose(T)
        return S

    def child(self, T: Similarity) -> "MappedSnowflake":
        return MappedSnowflake(self.chain + (T,), boundary_depth=self.boundary_depth)

    def to_dict(self):
        return {"kind": self.kind, "chain": [S.to_list() for S in self.chain]}


@dataclass(frozen=True)
class Polygon(DomainDescriptor):
    """Straight-edged polygon (counter-clockwise)."""

    vertices: tuple = ()
    kind = "polygon"

    def __post_init__(self):
        v = tuple((float(x), float(y)) for x, y in self.vertices)
        object.__setattr__(self, "vertices", v)
        if len(v) < 3:
            raise ValueError("polygon needs at least 3 vertices")
        a = np.asarray(v)
        w = np.roll(a, -1, axis=0)
        signed = 0.5 * float(np.sum(a[:, 0] * w[:, 1] - w[:, 0] * a[:, 1]))
        if abs(signed) <= 1e-14 * float(np.ptp(a, axis=0).max()) ** 2:
            raise ValueError("degenerate (collinear) polygon")
        if signed < 0:
            object.__setattr__(self, "vertices", v[::-1])

    def reference_region(self):
        return Region(self.vertices, [0] * len(self.vertices))

    def to_dict(self):
        return {"kind": self.kind, "vertices": [list(p) for p in self.vertices]}


@dataclass(frozen=True)
class Triangle(Polygon):
    kind = "triangle"

    def __post_init__(self):
        if len(self.vertices) != 3:
            raise ValueError("triangle needs 3 vertices")
        super().__post_init__()


@dataclass(frozen=True)
class FractalEdged(DomainDescriptor):
    """Reference polygon with some Koch edges, placed by ``placement``."""

    vertices: tuple = ()
    koch: tuple = ()
    placement: Similarity = IDENTITY
    kind = "fractal_edged"

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple((float(x), float(y)) for x, y in self.vertices))
        object.__setattr__(self, "koch", tuple(int(bool(k)) for k in self.koch))
        if not any(self.koch):
            raise ValueError("fractal-edged element needs at least one Koch edge")

    def reference_region(self):
        return Region(self.vertices, self.koch)

    @property
    def frame(self):
        return self.placement

    def to_dict(self):
        return {"kind": self.kind, "vertices": [list(p) for p in self.vertices],
                "koch": list(self.koch), "placement": self.placement.to_list()}


def descriptor_from_dict(d: dict) -> DomainDescriptor:
    kind = d["kind"]
    if kind == "snowflake":
        return Snowflake(float(d["side"]))
    if kind == "mapped_snowflake":
        return MappedSnowflake(tuple(Similarity.from_list(s) for s in d["chain"]))
    if kind == "triangle":
        return Triangle(tuple(map(tuple, d["vertices"])))
    if kind == "polygon":
        return Polygon(tuple(map(tuple, d["vertices"])))
    if kind == "fractal_edged":
        return FractalEdged(tuple(map(tuple, d["vertices"])), tuple(d["koch"]),
                            Similarity.from_list(d["placement"]))
    raise ValueError(f"unknown domain kind {kind!r}")


# ---------------------------------------------------------------------------
# operations


def snowflake_boundary(side: float, depth: int) -> np.ndarray:
    """Depth-k Koch prefractal of the snowflake: 3*4**k vertices, CCW."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    return koch_polyline(side * unit_snowflake_vertices(), [1, 1, 1], depth)


def classify_points(d: DomainDescriptor, pts, depth: int | None = None) -> np.ndarray:
    """Certified Inside/Outside/Uncertain codes for an array of points.

    Classification happens in the reference frame; Uncertain points lie
    within ``C_BAND`` depth-k segment lengths of the prefractal boundary.
    """
    k = d.boundary_depth if depth is None else depth
    if k < 0:
        raise ValueError("depth must be >= 0")
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    if d.frame != IDENTITY:
        pts = d.frame.inverse().apply(pts)
    return d.reference_region().classify(pts, k)


def classify_point(d: DomainDescriptor, x, depth: int | None = None) -> int:
    return int(classify_points(d, np.asarray(x, float)[None, :], depth)[0])


def uncertainty_band(d: DomainDescriptor, depth: int) -> float:
    """Width of the Uncertain band at classification depth ``depth``."""
    reg = d.region
    longest = reg.max_koch_edge
    return C_BAND * longest * 3.0 ** (-depth) if longest else reg.eps


def reference_area(d: DomainDescriptor) -> float:
    return d.reference_region().area * d.scale ** 2


def _hull_diameter(pts: np.ndarray) -> float:
    h = pts if len(pts) < 4 else pts[ConvexHull(pts).vertices]
    diff = h[:, None, :] - h[None, :, :]
    return float(np.sqrt((diff ** 2).sum(-1)).max())


@lru_cache(maxsize=256)
def _region_diameter(region: Region, max_depth: int = 9) -> float:
    prev = None
    for k in range(max_depth + 1):
        cur = _hull_diameter(region.polyline(k))
        if prev is not None and abs(cur - prev) <= 1e-9 * cur:
            return cur
        prev = cur
    return prev


def diameter(d: DomainDescriptor) -> float:
    """Convex-hull diameter of the prefractal boundary, refined to convergence."""
    return _region_diameter(d.reference_region()) * d.scale


def diameter_sequence(d: DomainDescriptor, depths: Sequence[int]) -> list[float]:
    reg = d.reference_region()
    return [_hull_diameter(reg.polyline(k)) * d.scale for k in depths]
