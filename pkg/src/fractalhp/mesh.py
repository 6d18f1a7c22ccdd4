"""Meshes of the snowflake: the 13-copy self-similar family, the hybrid
triangle/fractal-edged mesh and its refinement, and the lattice covering
used by the cube quasi-interpolant.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from pathlib import Path

import numpy as np

from . import quadrature
from .geometry import (
    INSIDE,
    SNOWFLAKE_AREA,
    SQRT3,
    DomainDescriptor,
    FractalEdged,
    MappedSnowflake,
    Polygon,
    Similarity,
    Snowflake,
    Triangle,
    classify_points,
    descriptor_from_dict,
    diameter,
    reference_area,
    unit_cap_region,
)

MESH_FORMAT_VERSION = 1
MAX_LEVEL = 6
SMALL_SCALE = 3.0 ** -1.5


@dataclass(frozen=True)
class Element:
    id: int
    geom: DomainDescriptor
    h_K: float
    area_lo: float
    area_hi: float

    @property
    def area_mid(self) -> float:
        return 0.5 * (self.area_lo + self.area_hi)

    @property
    def scale(self) -> float:
        return self.geom.scale

    def to_dict(self) -> dict:
        return {"id": self.id, "geom": self.geom.to_dict(), "h_K": self.h_K,
                "area_lo": self.area_lo, "area_hi": self.area_hi}


def make_element(eid: int, geom: DomainDescriptor, depth: int = quadrature.DEFAULT_DEPTH) -> Element:
    lo, hi = quadrature.element_area_bounds(geom, depth)
    return Element(eid, geom, diameter(geom), lo, hi)


@dataclass(frozen=True)
class Mesh:
    elements: tuple[Element, ...]
    domain: DomainDescriptor
    family: str = "custom"
    level: int = 0
    quad_depth: int = quadrature.DEFAULT_DEPTH

    @cached_property
    def h(self) -> float:
        return max(e.h_K for e in self.elements)

    def __len__(self):
        return len(self.elements)

    @property
    def area_lo(self) -> float:
        return math.fsum(e.area_lo for e in self.elements)

    @property
    def area_hi(self) -> float:
        return math.fsum(e.area_hi for e in self.elements)

    def element(self, eid: int) -> Element:
        return self._by_id[eid]

    @cached_property
    def _by_id(self) -> dict:
        return {e.id: e for e in self.elements}

    def without(self, eid: int) -> "Mesh":
        """Copy with one element removed (used to exercise the partition check)."""
        return Mesh(tuple(e for e in self.elements if e.id != eid), self.domain,
                    self.family, self.level, self.quad_depth)

    def info(self) -> dict:
        scales = sorted({round(e.scale, 12) for e in self.elements})
        return {"family": self.family, "level": self.level, "elements": len(self),
                "h": self.h, "area_lo": self.area_lo, "area_hi": self.area_hi,
                "domain_area": reference_area(self.domain),
                "kinds": sorted({e.geom.kind for e in self.elements}),
                "scales": scales}

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {"format": "fractalhp-mesh", "version": MESH_FORMAT_VERSION,
                "family": self.family, "level": self.level, "quad_depth": self.quad_depth,
                "domain": self.domain.to_dict(), "elements": [e.to_dict() for e in self.elements]}

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def from_dict(cls, d: dict) -> "Mesh":
        if d.get("format") != "fractalhp-mesh" or d.get("version") != MESH_FORMAT_VERSION:
            raise ValueError("unsupported mesh file format/version")
        els = tuple(Element(e["id"], descriptor_from_dict(e["geom"]), e["h_K"], e["area_lo"], e["area_hi"])
                    for e in d["elements"])
        return cls(els, descriptor_from_dict(d["domain"]), d["family"], d["level"], d["quad_depth"])

    @classmethod
    def load(cls, path) -> "Mesh":
        return cls.from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# self-similar family


def substitution_maps() -> tuple[Similarity, ...]:
    """The 13 similarities splitting the unit snowflake into copies of itself.

    Seven copies at scale 1/3: one central, six centred on the tips of the
    snowflake pulled in to 2/3 of the tip radius.  Six copies at scale
    3**-1.5 rotated by 30 degrees, centred on the concave corners at the same
    relative distance.
    """
    R = 1.0 / SQRT3
    maps = [Similarity(0.0, 1.0 / 3.0)]
    for k in range(6):
        a = math.radians(30 + 60 * k)
        maps.append(Similarity(0.0, 1.0 / 3.0, (2 * R / 3 * math.cos(a), 2 * R / 3 * math.sin(a))))
    rho = 2 * R / (3 * SQRT3)
    for k in range(6):
        a = math.radians(60 * k)
        maps.append(Similarity(math.pi / 6, SMALL_SCALE, (rho * math.cos(a), rho * math.sin(a))))
    return tuple(maps)


def _mapped_elements(geoms, depth) -> tuple[Element, ...]:
    # every copy shares the unit-snowflake decomposition and diameter
    ref = quadrature.element_area_bounds(Snowflake(1.0), depth)
    diam = diameter(Snowflake(1.0))
    return tuple(Element(i, gm, diam * gm.scale, ref[0] * gm.scale ** 2, ref[1] * gm.scale ** 2)
                 for i, gm in enumerate(geoms))


def snowflake_self_similar_mesh(level: int, side: float = 1.0,
                                depth: int = quadrature.DEFAULT_DEPTH) -> Mesh:
    if level < 0:
        raise ValueError("level must be >= 0")
    if level > MAX_LEVEL:
        raise ValueError(f"level {level} exceeds the element-count guard ({MAX_LEVEL})")
    geoms = [MappedSnowflake((Similarity(0.0, side),))]
    for _ in range(level):
        geoms = _substitute(geoms)
    return Mesh(_mapped_elements(geoms, depth), Snowflake(side), "self_similar", level, depth)


def _substitute(geoms):
    maps = substitution_maps()
    return [g.child(T) for g in geoms for T in maps]


# ---------------------------------------------------------------------------
# hybrid family


def hybrid_geometries(side: float = 1.0) -> list[DomainDescriptor]:
    """Six triangles fanning the inner hexagon and six fractal-edged points.

    The hexagon has its corners at the concave vertices of the snowflake.
    Each fractal-edged element is the triangle (P_k, T_k, P_k+1) with Koch
    curves on its two outer edges; they are rotations of one reference.
    """
    R = side / SQRT3
    r = R / SQRT3

    def at(rad, deg):
        a = math.radians(deg)
        return (rad * math.cos(a), rad * math.sin(a))

    tris = [Triangle(((0.0, 0.0), at(r, 60 * k), at(r, 60 * (k + 1)))) for k in range(6)]
    ref = (at(r, 0), at(R, 30), at(r, 60))
    frac = [FractalEdged(ref, (1, 1, 0), Similarity(k * math.pi / 3, 1.0)) for k in range(6)]
    return tris + frac


def hybrid_mesh(side: float = 1.0, depth: int = quadrature.DEFAULT_DEPTH) -> Mesh:
    geoms = hybrid_geometries(side)
    els = tuple(make_element(i, gm, depth) for i, gm in enumerate(geoms))
    return Mesh(els, Snowflake(side), "hybrid", 0, depth)


def _midpoint_split(t: Triangle) -> list[Triangle]:
    a, b, c = (np.asarray(v) for v in t.vertices)
    ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
    quads = [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
    return [Triangle(tuple(tuple(map(float, p)) for p in q)) for q in quads]


def _cap(a, b) -> FractalEdged:
    """Region between chord a->b and its outward Koch curve, as a mapped unit cap."""
    d = np.asarray(b, float) - np.asarray(a, float)
    L = float(np.hypot(*d))
    S = Similarity(math.atan2(d[1], d[0]), L, (float(a[0]), float(a[1])))
    ref = unit_cap_region()
    return FractalEdged(tuple(map(tuple, ref.verts)), tuple(ref.koch), S)


def _split_fractal(g: FractalEdged) -> list[DomainDescriptor]:
    """One Koch substitution step.

    The straight polygon spanned by the vertices is kept (midpoint-split if
    it is a triangle); each Koch edge contributes its bump triangle and the
    four caps on its sub-edges.
    """
    region = g.region
    v = region.verts
    n = len(v)
    out: list[DomainDescriptor] = []
    if n == 3:
        out.extend(_midpoint_split(Triangle(tuple(map(tuple, v)))))
    elif n > 3:
        out.append(Polygon(tuple(map(tuple, v))))
    for k in range(n):
        if not region.koch[k]:
            continue
        a, b = v[k], v[(k + 1) % n]
        d = b - a
        p1 = a + d / 3
        p3 = a + 2 * d / 3
        p2 = 0.5 * (a + b) + (SQRT3 / 6) * np.array([d[1], -d[0]])
        out.append(Triangle((tuple(p1), tuple(p3), tuple(p2))))
        for s, e in ((a, p1), (p1, p2), (p2, p3), (p3, b)):
            out.append(_cap(s, e))
    return out


def refine(m: Mesh) -> Mesh:
    """Next mesh of the family.

    Self-similar meshes apply the 13-copy substitution to every element.
    Hybrid meshes split triangles into four and fractal-edged elements by one
    Koch substitution step.
    """
    geoms = [e.geom for e in m.elements]
    if all(isinstance(g, MappedSnowflake) for g in geoms):
        if m.level + 1 > MAX_LEVEL:
            raise ValueError(f"level {m.level + 1} exceeds the element-count guard ({MAX_LEVEL})")
        new = _substitute(geoms)
        return Mesh(_mapped_elements(new, m.quad_depth), m.domain, m.family, m.level + 1, m.quad_depth)
    new = []
    for g in geoms:
        if isinstance(g, Triangle):
            new.extend(_midpoint_split(g))
        elif isinstance(g, FractalEdged):
            new.extend(_split_fractal(g))
        else:
            raise ValueError(f"cannot refine element of kind {g.kind!r}")
    els = tuple(make_element(i, gm, m.quad_depth) for i, gm in enumerate(new))
    return Mesh(els, m.domain, m.family, m.level + 1, m.quad_depth)


def build_mesh(family: str, level: int, side: float = 1.0,
               depth: int = quadrature.DEFAULT_DEPTH) -> Mesh:
    if family == "self_similar":
        return snowflake_self_similar_mesh(level, side, depth)
    if family in ("hybrid", "hybrid_then_refine"):
        m = hybrid_mesh(side, depth)
        for _ in range(level):
            m = refine(m)
        return m
    raise ValueError(f"unknown mesh family {family!r}")


# ---------------------------------------------------------------------------
# covering


@dataclass(frozen=True)
class Covering:
    """Lattice cubes Q_z = [0,h]^2 + h z and Q'_z = [-h,2h]^2 + h z, with kappa."""

    cube_size: float
    kappa: dict = field(hash=False)
    touching: dict = field(hash=False)

    def cube(self, z) -> tuple[np.ndarray, np.ndarray]:
        lo = self.cube_size * np.asarray(z, float)
        return lo, lo + self.cube_size

    def big_cube(self, z) -> tuple[np.ndarray, np.ndarray]:
        lo = self.cube_size * (np.asarray(z, float) - 1.0)
        return lo, lo + 3.0 * self.cube_size

    def big_cube_diameter(self, n: int = 2) -> float:
        return 3.0 * math.sqrt(n) * self.cube_size

    def used_cubes(self) -> list[tuple[int, int]]:
        return sorted(set(self.kappa.values()))

    def elements_of(self, z) -> list[int]:
        z = tuple(z)
        return sorted(k for k, w in self.kappa.items() if w == z)


def containing_big_cubes(z) -> list[tuple[int, int]]:
    """All w with Q_z inside Q'_w, found by scanning a neighbourhood."""
    z = np.asarray(z, int)
    out = []
    for dz in product(range(-3, 4), repeat=len(z)):
        w = z + np.asarray(dz)
        if np.all(w - 1 <= z) and np.all(z + 1 <= w + 2):
            out.append(tuple(int(t) for t in w))
    return out


def _element_bbox(e: Element) -> np.ndarray:
    pts = e.geom.region.hull_points
    return np.array([pts.min(axis=0), pts.max(axis=0)])


def _candidate_cubes(box: np.ndarray, h: float) -> list[tuple[int, ...]]:
    """Cubes whose interior meets the open bounding box, lexicographic order."""
    lo = np.floor(box[0] / h).astype(int)
    hi = np.ceil(box[1] / h).astype(int) - 1
    hi = np.maximum(hi, lo)
    ranges = [range(a, b + 1) for a, b in zip(lo, hi)]
    return [tuple(int(t) for t in z) for z in product(*ranges)]


def build_covering(m: Mesh, depth: int | None = None) -> Covering:
    """kappa(K): lexicographically smallest lattice cube certified to meet K.

    Certification uses quadrature points of the element, which lie in
    certified-interior cells (or strictly inside triangles).  Bounding-box
    overlap gives the upper count of touched cubes.
    """
    h = m.h
    if not h > 0:
        raise ValueError("meshwidth must be positive")
    depth = m.quad_depth if depth is None else depth
    kappa, touching = {}, {}
    for e in m.elements:
        box = _element_bbox(e)
        cands = _candidate_cubes(box, h)
        rule = quadrature.element_rule(e, depth, q=1)
        pts = rule.physical_points()
        hit = {tuple(int(t) for t in z) for z in np.unique(np.floor(pts / h).astype(int), axis=0)}
        certified = [z for z in cands if z in hit]
        if not certified:
            raise RuntimeError(f"element {e.id}: no lattice cube certified to meet it")
        z = certified[0]
        lo, hi = h * (np.asarray(z) - 1.0), h * (np.asarray(z) + 2.0)
        tol = 1e-12 * max(1.0, float(np.abs(box).max()))
        if np.any(box[0] < lo - tol) or np.any(box[1] > hi + tol):
            raise RuntimeError(f"element {e.id} is not contained in Q'_{z}")
        kappa[e.id] = z
        touching[e.id] = (len(certified), len(cands))
    return Covering(h, kappa, touching)


def locate(m: Mesh, pts, depth: int | None = None, candidates=None) -> np.ndarray:
    """Index of the element each point is certified Inside, or -1.

    Bounding boxes prune the search; ``candidates`` may restrict it further.
    """
    pts = np.asarray(pts, float).reshape(-1, 2)
    out = np.full(len(pts), -1, dtype=np.int64)
    idx = range(len(m.elements)) if candidates is None else candidates
    for i in idx:
        e = m.elements[i]
        box = _element_bbox(e)
        sel = np.nonzero((out < 0) & np.all(pts >= box[0], axis=1) & np.all(pts <= box[1], axis=1))[0]
        if len(sel) == 0:
            continue
        c = classify_points(e.geom, pts[sel], depth)
        out[sel[c == INSIDE]] = i
    return out


def partition_check(m: Mesh) -> dict:
    """Measure partition: sum of element midpoints against |Omega|."""
    total_mid = math.fsum(e.area_mid for e in m.elements)
    width = math.fsum(e.area_hi - e.area_lo for e in m.elements)
    dom = reference_area(m.domain)
    gap = abs(total_mid - dom)
    return {"sum_mid": total_mid, "domain_area": dom, "gap": gap, "width": width,
            "ok": gap <= width + 1e-12 * dom and m.area_lo <= dom <= m.area_hi + 1e-12 * dom}


def closed_form_area_sum(m: Mesh) -> float:
    """Sum of exact element areas (similarity scaling of the reference area)."""
    return math.fsum(reference_area(e.geom) for e in m.elements)


SNOWFLAKE_UNIT_AREA = SNOWFLAKE_AREA
