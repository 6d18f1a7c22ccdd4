"""Acceptance criteria 1-10, one test each, at the stated tolerances.

Every test records a one-line PASS/FAIL summary that is repeated in the
terminal summary under "acceptance criteria".
"""

import math
import time

import numpy as np
import pytest

from fractalhp import approx, geometry as G, mesh as M, norms, quadrature as Q, study
from fractalhp.functions import make_test_function

pytestmark = pytest.mark.acceptance

AREA = 2 * math.sqrt(3) / 5


def test_criterion_01_geometry_oracles(acceptance):
    t0 = time.perf_counter()
    snow = G.Snowflake(1.0)
    dec = Q.decompose(snow, 10)
    width = dec.measure_hi - dec.measure_lo
    slope = Q.box_counting_slope(snow, range(6, 13))
    dt = time.perf_counter() - t0
    ok = dec.measure_lo <= AREA <= dec.measure_hi and width < 5e-3 and 1.21 <= slope <= 1.31 and dt < 30
    acceptance(1, ok, f"bracket [{dec.measure_lo:.5f}, {dec.measure_hi:.5f}] width {width:.4g} (need < 5e-3), "
                      f"box slope {slope:.4f}, {dt:.1f} s")
    assert ok


def test_criterion_02_mesh_invariants(acceptance):
    t0 = time.perf_counter()
    m1 = M.snowflake_self_similar_mesh(1)
    sc = np.array([e.scale for e in m1.elements])
    ok13 = len(m1) == 13 and np.sum(np.isclose(sc, 1 / 3)) == 7 and np.sum(np.isclose(sc, 3 ** -1.5)) == 6
    part_ok, touch_ok, worst = True, True, 0
    for lv in range(4):
        m = M.snowflake_self_similar_mesh(lv)
        part_ok &= M.partition_check(m)["ok"]
        cov = M.build_covering(m)
        for cert, bbox in cov.touching.values():
            touch_ok &= 1 <= cert <= bbox <= 4
            worst = max(worst, bbox)
    nine = all(len(M.containing_big_cubes(z)) == 9 for z in [(0, 0), (4, -3), (-7, 2)])
    dt = time.perf_counter() - t0
    ok = ok13 and part_ok and touch_ok and nine and dt < 60
    acceptance(2, ok, f"13 elements 7+6 {ok13}, partition {part_ok}, 9 covers {nine}, "
                      f"max cubes per element {worst}, {dt:.1f} s")
    assert ok


def test_criterion_03_polynomial_reproduction(acceptance):
    worst = 0.0
    for lv in (1, 2):
        m = M.snowflake_self_similar_mesh(lv)
        cov = M.build_covering(m)
        for p in range(4):
            u = make_test_function({"id": "poly", "p0": p})
            ref = norms.broken_norm(u, None, m, 0).value
            v, _ = approx.l2_project(m, u, p)
            w = approx.covering_project(m, cov, u, p)
            worst = max(worst, norms.broken_norm(u, v, m, 0).value / ref,
                        norms.broken_norm(u, w, m, 0).value / ref)
    ok = worst < 1e-10
    acceptance(3, ok, f"max relative broken L2 error {worst:.2e} (need < 1e-10)")
    assert ok


def test_criterion_04_galerkin_optimality(acceptance):
    worst, margin, dominated = 0.0, math.inf, True
    for spec in ({"id": "gaussian"}, {"id": "radial_singular"}, {"id": "sinprod", "k": 2}):
        u = make_test_function(spec)
        for lv in (1, 2):
            m = M.snowflake_self_similar_mesh(lv)
            cov = M.build_covering(m)
            for p in range(4):
                v, rep = approx.l2_project(m, u, p)
                w = approx.covering_project(m, cov, u, p)
                ev = norms.broken_norm(u, v, m, 0).value
                ew = norms.broken_norm(u, w, m, 0).value
                worst = max(worst, rep.max_residual)
                margin = min(margin, ew - ev)
                dominated &= ev <= ew + 1e-12
    ok = worst <= 1e-8 and dominated
    acceptance(4, ok, f"max normalized residual {worst:.2e}, min(cov - proj) {margin:.2e}")
    assert ok


def test_criterion_05_h_rates_l2(acceptance):
    t0 = time.perf_counter()
    cfg = study.default_config("h", levels=[1, 2, 3], p_list=[0, 1, 2], m=3,
                               targets=[{"kind": "brokenWj", "j": 0}])
    res = study.run_h_study(cfg)
    dt = time.perf_counter() - t0
    parts, ok = [], dt < 600
    for p in (0, 1, 2):
        s = res.summary(p, "brokenW0")["slope"]
        ok &= p + 1 - 0.2 <= s <= p + 1 + 0.3
        parts.append(f"p={p} slope {s:.3f}")
    acceptance(5, ok, ", ".join(parts) + f" (bands [p+0.8, p+1.3]), {dt:.0f} s")
    assert ok


def test_criterion_06_h_rate_w1(acceptance):
    cfg = study.default_config("h", levels=[1, 2, 3], p_list=[2], m=3, targets=[{"kind": "brokenWj", "j": 1}])
    res = study.run_h_study(cfg)
    s = res.summary(2, "brokenW1")
    ok = 1.75 <= s["slope"] <= 2.4
    acceptance(6, ok, f"broken W1 slope {s['slope']:.3f} (band [1.75, 2.4], reference {s['reference_slope']})")
    assert ok


def test_criterion_07_fractional_rates(acceptance):
    cfg = study.default_config("frac", levels=[1, 2, 3], p_list=[0, 1])
    res = study.run_fractional_study(cfg)
    s1 = res.summary(1, "L2")["slope"]
    s0 = res.summary(0, "L2")["slope"]
    ok = 1.25 <= s1 <= 1.75 and 0.8 <= s0 <= 1.2
    acceptance(7, ok, f"p=1 slope {s1:.3f} (band [1.25, 1.75]), p=0 slope {s0:.3f} (band [0.8, 1.2])")
    assert ok


def test_criterion_08_negative_norm_rates(acceptance):
    t0 = time.perf_counter()
    cfg = study.default_config("neg", N=1024, pad=2.5,
                               targets=[{"kind": "negSobolev", "s1": -1.0, "s2": 1.0},
                                        {"kind": "negSobolev", "s1": 0.0, "s2": 1.0}])
    res = study.run_negative_norm_study(cfg)
    slope = res.summary(1, "negSobolev(-1)")["slope"]
    # s1 = 0 against the L2 norm of the same zero-extension samples
    u = cfg.function()
    m = M.snowflake_self_similar_mesh(cfg.levels[-1])
    v, _ = approx.l2_project(m, u, 1)
    g = norms.sample_zero_extension(u, v, norms.default_box(m.domain, 2.5), 1024)
    fft0 = norms.sobolev_norm_fourier(g, 0.0, self_convergence=False).value
    gap = abs(fft0 - g.grid_l2()) / g.grid_l2()
    rec0 = res.records[-1].errors["negSobolev(0)"]
    dt = time.perf_counter() - t0
    ok = 1.7 <= slope <= 2.3 and gap <= 1e-10 and rec0 == fft0 and dt < 300
    acceptance(8, ok, f"s1=-1 slope {slope:.3f} (band [1.7, 2.3]), s1=0 vs grid L2 gap {gap:.1e}, {dt:.0f} s")
    assert ok


def test_criterion_09_spectral_norms(acceptance):
    snow = G.Snowflake(1.0)
    g = norms.sample_zero_extension(make_test_function("gaussian"), None, None, 512, domain=snow)
    pars = abs(norms.sobolev_norm_fourier(g, 0.0, False).value - g.grid_l2()) / g.grid_l2()
    L = 16.0
    sigma = L / 16
    u = make_test_function({"id": "gaussian", "sigma": sigma, "x0": (0.0, 0.0)})
    grid = norms.sample_function(u, (-L / 2, -L / 2, L), 256)
    errs = {s: abs(norms.sobolev_norm_fourier(grid, s, False).value / norms.gaussian_norm_oracle(sigma, s) - 1)
            for s in (-1.0, -0.5, 1.0)}
    ok = pars <= 1e-12 and max(errs.values()) <= 1e-3
    acceptance(9, ok, f"Parseval gap {pars:.1e}, oracle gaps "
                      + ", ".join(f"s={s:g}: {e:.1e}" for s, e in errs.items()))
    assert ok


def test_criterion_10_determinism(acceptance, tmp_path):
    base = dict(levels=[0, 1, 2], p_list=[0, 1], targets=[{"kind": "L2"}, {"kind": "brokenWj", "j": 1}])
    a = study.emit_outputs(study.run_h_study(study.default_config("h", **base)), tmp_path / "a")
    b = study.emit_outputs(study.run_h_study(study.default_config("h", **base)), tmp_path / "b")
    same = a["csv"].read_bytes() == b["csv"].read_bytes()
    par = study.run_h_study(study.default_config("h", workers=4, **base))
    ser = study.run_h_study(study.default_config("h", **base))
    rel = max(abs(x.errors[k] - y.errors[k]) / abs(y.errors[k])
              for x, y in zip(par.records, ser.records) for k in x.errors)
    ok = same and rel <= 1e-10
    acceptance(10, ok, f"byte-identical CSV {same}, max multi-worker relative gap {rel:.1e}")
    assert ok
