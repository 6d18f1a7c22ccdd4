import math

import numpy as np
import pytest

from fractalhp import geometry as G, mesh as M

AREA = 2 * math.sqrt(3) / 5


def test_level0(mesh0, snow):
    assert len(mesh0) == 1
    assert mesh0.h == pytest.approx(G.diameter(snow))


def test_level1_scales(mesh1):
    scales = np.array([e.scale for e in mesh1.elements])
    assert len(mesh1) == 13
    assert np.sum(np.isclose(scales, 1 / 3)) == 7
    assert np.sum(np.isclose(scales, 3 ** -1.5)) == 6


def test_level2(mesh2, snow):
    assert len(mesh2) == 169
    assert mesh2.h == pytest.approx(G.diameter(snow) / 9, rel=1e-12)


def test_closed_form_partition(mesh1, mesh2):
    for m in (mesh1, mesh2):
        assert M.closed_form_area_sum(m) == pytest.approx(AREA, rel=1e-13)
        assert M.partition_check(m)["ok"]


def test_substitution_tiles_without_overlap(mesh1, rng):
    pts = rng.uniform(-0.7, 0.7, (4000, 2))
    hits = np.zeros(len(pts), int)
    for e in mesh1.elements:
        hits += G.classify_points(e.geom, pts, 6) == G.INSIDE
    assert hits.max() <= 1
    inside = G.classify_points(G.Snowflake(1.0), pts, 6) == G.INSIDE
    assert hits[inside].mean() > 0.9


def test_refine_matches_level2(mesh1, mesh2):
    r = M.refine(mesh1)
    key = lambda m: sorted(tuple(np.round(e.geom.frame.to_list(), 10)) for e in m.elements)  # noqa: E731
    assert key(r) == key(mesh2)
    assert r.h == pytest.approx(mesh1.h / 3, rel=1e-12)


def test_level_guard():
    with pytest.raises(ValueError):
        M.snowflake_self_similar_mesh(M.MAX_LEVEL + 1)


def test_hybrid(hybrid0):
    assert len(hybrid0) == 12
    tris = [e for e in hybrid0.elements if isinstance(e.geom, G.Triangle)]
    frac = [e for e in hybrid0.elements if isinstance(e.geom, G.FractalEdged)]
    assert len(tris) == 6 and len(frac) == 6
    areas = {round(G.reference_area(e.geom), 12) for e in tris}
    assert len(areas) == 1
    assert len({e.geom.reference_region().key for e in frac}) == 1
    assert M.closed_form_area_sum(hybrid0) == pytest.approx(AREA, rel=1e-12)
    assert M.partition_check(hybrid0)["ok"]


def test_hybrid_refine(hybrid0):
    r = M.refine(hybrid0)
    assert r.h < hybrid0.h
    assert M.closed_form_area_sum(r) == pytest.approx(AREA, rel=1e-12)
    assert M.partition_check(r)["ok"]


def test_tampered_partition(mesh1):
    big = max(mesh1.elements, key=lambda e: e.area_mid)
    assert not M.partition_check(mesh1.without(big.id))["ok"]


def test_serialization(tmp_path, mesh1):
    p = tmp_path / "m.json"
    mesh1.save(p)
    back = M.Mesh.load(p)
    assert back.to_dict() == mesh1.to_dict()


def test_bad_mesh_file():
    with pytest.raises(ValueError):
        M.Mesh.from_dict({"format": "other"})


def test_overlap_count():
    for z in [(0, 0), (3, -2), (-5, 7)]:
        ws = M.containing_big_cubes(z)
        assert len(ws) == 9
        assert sorted(ws) == sorted((z[0] + a, z[1] + b) for a in (-1, 0, 1) for b in (-1, 0, 1))


@pytest.mark.parametrize("level", [0, 1, 2])
def test_covering(level):
    m = M.snowflake_self_similar_mesh(level)
    cov = M.build_covering(m)
    for eid, (cert, bbox) in cov.touching.items():
        assert 1 <= cert <= bbox <= 4
        lo, hi = cov.big_cube(cov.kappa[eid])
        box = M._element_bbox(m.element(eid))
        assert np.all(box[0] >= lo - 1e-12) and np.all(box[1] <= hi + 1e-12)


def test_covering_lexicographic_choice():
    # a small triangle straddling the line x = h, inside one row of cubes
    dom = G.Snowflake(1.0)
    T = G.Triangle(((0.9, 0.1), (1.1, 0.1), (1.0, 0.3)))
    e = M.make_element(0, T)
    m = M.Mesh((e,), dom, "custom", 0)
    cov = M.build_covering(m)
    h = m.h
    assert cov.touching[0][0] == 2 or h > 0.2
    z = cov.kappa[0]
    assert z == tuple(int(t) for t in np.floor(np.array([0.9, 0.1]) / h))


def test_locate(mesh1, rng):
    pts = rng.uniform(-0.6, 0.6, (500, 2))
    owner = M.locate(mesh1, pts)
    for i in np.unique(owner[owner >= 0]):
        sel = owner == i
        assert np.all(G.classify_points(mesh1.elements[i].geom, pts[sel]) == G.INSIDE)
    assert np.all(M.locate(mesh1, np.array([[5.0, 5.0]])) == -1)
