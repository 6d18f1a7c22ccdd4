"""Convergence studies: configuration, runs over (level, p), slope fits,
CSV/SVG output and the invariant battery behind ``fractalhp verify``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import approx, geometry, mesh as meshmod, norms, quadrature
from .functions import TestFunction, make_test_function

STUDY_KINDS = ("h", "p", "frac", "neg")
TARGET_KINDS = ("brokenWj", "L2", "negSobolev")
MESH_FAMILIES = ("self_similar", "hybrid_then_refine")
EXACT_TOL = 1e-10
CERT_FRACTION = 0.1
R2_RELIABLE = 0.98
CSV_COLUMNS = ("study_id", "level", "h", "p", "dofs", "target_kind", "target_params", "error",
               "certificate", "slope", "R2", "row_type", "elements", "flag", "intercept",
               "reference_slope")


class ConfigError(ValueError):
    """Invalid study configuration (CLI exit code 2)."""


class CertificateError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# configuration


@dataclass
class StudyConfig:
    domain: dict = field(default_factory=lambda: {"kind": "snowflake", "side": 1.0})
    mesh_family: str = "self_similar"
    levels: list = field(default_factory=lambda: [1, 2, 3])
    p_list: list = field(default_factory=lambda: [0, 1, 2])
    m: int = 3
    targets: list = field(default_factory=lambda: [{"kind": "L2"}])
    test_function: dict = field(default_factory=lambda: {"id": "gaussian"})
    depth: int = quadrature.DEFAULT_DEPTH
    q: int | None = None
    N: int = norms.DEFAULT_N
    output_dir: str = "results"
    seed: int = 0
    study_id: str = "study"
    workers: int = 1
    pad: float = norms.PAD_FACTOR
    certificate_policy: str = "flag"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.mesh_family not in MESH_FAMILIES:
            raise ConfigError(f"mesh_family must be one of {MESH_FAMILIES}")
        if not self.levels or any(int(a) >= int(b) for a, b in zip(self.levels, self.levels[1:])):
            raise ConfigError("levels must be a non-empty increasing list")
        if any(int(lv) < 0 for lv in self.levels):
            raise ConfigError("levels must be >= 0")
        if not self.p_list or any(int(p) < 0 or int(p) > approx.MAX_DEGREE for p in self.p_list):
            raise ConfigError(f"p_list entries must lie in [0, {approx.MAX_DEGREE}]")
        if int(self.m) < 1:
            raise ConfigError("m must be >= 1")
        if self.certificate_policy not in ("flag", "abort"):
            raise ConfigError("certificate_policy must be 'flag' or 'abort'")
        if int(self.workers) < 1:
            raise ConfigError("workers must be >= 1")
        for t in self.targets:
            kind = t.get("kind")
            if kind not in TARGET_KINDS:
                raise ConfigError(f"unknown target kind {kind!r}")
            if kind == "brokenWj" and int(t.get("j", 0)) not in (0, 1, 2):
                raise ConfigError("brokenWj needs j in {0, 1, 2}")
            if kind == "negSobolev":
                s1 = float(t.get("s1", -1.0))
                s2 = float(t.get("s2", self.m))
                if not (-self.m <= s1 <= 0 <= s2 <= self.m):
                    raise ConfigError("negSobolev needs -m <= s1 <= 0 <= s2 <= m")
        try:
            self.function()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad test_function: {exc}") from exc
        try:
            self.domain_descriptor()
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad domain: {exc}") from exc

    def function(self) -> TestFunction:
        return make_test_function(self.test_function)

    def domain_descriptor(self):
        d = dict(self.domain)
        if d.get("kind") != "snowflake":
            raise ValueError("only the snowflake domain is supported")
        return geometry.Snowflake(float(d.get("side", 1.0)))

    @classmethod
    def from_mapping(cls, data: dict) -> "StudyConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a key-value mapping")
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "StudyConfig":
        import yaml

        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config: {exc}") from exc
        return cls.from_mapping(data or {})

    def to_dict(self) -> dict:
        return asdict(self)


def default_config(kind: str, **overrides) -> StudyConfig:
    base = {
        "h": dict(levels=[1, 2, 3], p_list=[0, 1, 2], m=3, test_function={"id": "gaussian"},
                  targets=[{"kind": "brokenWj", "j": 0}], study_id="h"),
        "p": dict(levels=[2], p_list=[0, 1, 2, 3, 4], m=2,
                  test_function={"id": "radial_singular", "alpha": 0.5},
                  targets=[{"kind": "brokenWj", "j": 0}], study_id="p"),
        "frac": dict(levels=[1, 2, 3], p_list=[0, 1], m=2,
                     test_function={"id": "radial_singular", "alpha": 0.5},
                     targets=[{"kind": "L2"}], study_id="frac"),
        "neg": dict(levels=[0, 1, 2], p_list=[1], m=1, test_function={"id": "gaussian"},
                    targets=[{"kind": "negSobolev", "s1": -1.0, "s2": 1.0}], study_id="neg"),
    }[kind]
    base.update(overrides)
    return StudyConfig(**base)


# ---------------------------------------------------------------------------
# records


@dataclass
class ConvergenceRecord:
    level: int
    h: float
    p: int
    elements: int
    dofs: int
    errors: dict
    certificates: dict
    flags: dict
    wall_time: float = 0.0


@dataclass
class StudyResult:
    kind: str
    config: StudyConfig
    records: list
    summaries: list
    notes: list = field(default_factory=list)

    def summary(self, p: int, target: str) -> dict:
        for s in self.summaries:
            if s["p"] == p and s["target"] == target:
                return s
        raise KeyError((p, target))


def target_label(t: dict) -> str:
    if t["kind"] == "brokenWj":
        return f"brokenW{int(t.get('j', 0))}"
    if t["kind"] == "L2":
        return "L2"
    return f"negSobolev({float(t.get('s1', -1.0)):g})"


def target_params(t: dict) -> str:
    return json.dumps({k: v for k, v in sorted(t.items()) if k != "kind"}, sort_keys=True)


def fit_slope(x, y) -> tuple[float, float, float]:
    """Least-squares line through (log x, log y): slope, intercept, R^2."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    if len(lx) < 2:
        return float("nan"), float("nan"), float("nan")
    A = np.vstack([lx, np.ones_like(lx)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, ly, rcond=None)
    pred = A @ np.array([slope, icpt])
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(icpt), r2


# ---------------------------------------------------------------------------
# running


def _mesh_for(cfg: StudyConfig, level: int) -> meshmod.Mesh:
    side = float(cfg.domain.get("side", 1.0))
    return meshmod.build_mesh(cfg.mesh_family, int(level), side, int(cfg.depth))


def _cell(cfg: StudyConfig, u: TestFunction, level: int, p: int, mesh_cache: dict) -> ConvergenceRecord:
    t0 = time.perf_counter()
    m = mesh_cache[level]
    q = cfg.q if cfg.q is not None else approx.default_q(p)
    v, _ = approx.l2_project(m, u, p, cfg.depth, q)
    errors, certs, flags = {}, {}, {}
    scale = None
    for t in cfg.targets:
        label = target_label(t)
        if t["kind"] in ("brokenWj", "L2"):
            j = int(t.get("j", 0)) if t["kind"] == "brokenWj" else 0
            b = norms.broken_norm(u, v, m, j, cfg.depth, q)
            err, cert = b.value, b.certificate
            if scale is None:
                scale = norms.broken_norm(u, None, m, 0, cfg.depth, q).value
        else:
            if cfg.N < 64.0 / m.h:
                raise ConfigError(f"N={cfg.N} is below 64/h = {64.0 / m.h:.1f} at level {level}")
            box = norms.default_box(m.domain, cfg.pad)
            g = norms.sample_zero_extension(u, v, box, int(cfg.N))
            r = norms.sobolev_norm_fourier(g, float(t.get("s1", -1.0)))
            err, cert = r.value, r.delta
        errors[label] = err
        certs[label] = cert
        flags[label] = "" if not (cert >= CERT_FRACTION * err) else "certificate"
    if scale is not None:
        for k in errors:
            if errors[k] <= EXACT_TOL * max(1.0, scale):
                flags[k] = "exact"
    return ConvergenceRecord(int(level), m.h, int(p), len(m), len(m) * (p + 1) * (p + 2) // 2,
                             errors, certs, flags, time.perf_counter() - t0)


def _run_cells(cfg: StudyConfig, cells) -> list:
    u = cfg.function()
    levels = sorted({lv for lv, _ in cells})
    mesh_cache = {lv: _mesh_for(cfg, lv) for lv in levels}
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=int(cfg.workers)) as pool:
            recs = list(pool.map(lambda c: _cell(cfg, u, c[0], c[1], mesh_cache), cells))
    else:
        recs = [_cell(cfg, u, lv, p, mesh_cache) for lv, p in cells]
    return sorted(recs, key=lambda r: (r.p, r.level))


def _check_certificates(cfg, records):
    if cfg.certificate_policy != "abort":
        return
    for r in records:
        for k, f in r.flags.items():
            if f == "certificate":
                raise CertificateError(
                    f"certificate {r.certificates[k]:.3g} exceeds {CERT_FRACTION:.0%} of error "
                    f"{r.errors[k]:.3g} (level {r.level}, p {r.p}, {k}); increase depth beyond {cfg.depth}")


def _reference_h_slope(cfg: StudyConfig, u: TestFunction, p: int, t: dict) -> float:
    reg = min(float(cfg.m), u.regularity)
    if t["kind"] == "negSobolev":
        s2 = float(t.get("s2", min(cfg.m, u.regularity)))
        return min(s2, p + 1) - float(t.get("s1", -1.0))
    j = int(t.get("j", 0)) if t["kind"] == "brokenWj" else 0
    return min(reg, p + 1) - j


def _h_summaries(cfg, records, kind):
    u = cfg.function()
    out = []
    for p in sorted({r.p for r in records}):
        rows = [r for r in records if r.p == p]
        for t in cfg.targets:
            label = target_label(t)
            exact = all(r.flags.get(label) == "exact" for r in rows)
            fit_rows = rows[1:] if len(rows) >= 3 else rows
            entry = {"p": p, "target": label, "target_kind": t["kind"], "params": target_params(t),
                     "reference_slope": _reference_h_slope(cfg, u, p, t), "exact": exact,
                     "slope": float("nan"), "intercept": float("nan"), "R2": float("nan"),
                     "reliable": False}
            if not exact:
                s, c, r2 = fit_slope([r.h for r in fit_rows], [r.errors[label] for r in fit_rows])
                entry.update(slope=s, intercept=c, R2=r2, reliable=r2 >= R2_RELIABLE)
            if kind == "h" and cfg.mesh_family == "self_similar":
                hs = [r.h for r in rows]
                entry["h_ratio_ok"] = all(abs(a / b - 3.0) < 1e-9 for a, b in zip(hs, hs[1:]))
            out.append(entry)
    return out


def run_h_study(cfg: StudyConfig) -> StudyResult:
    if len(cfg.levels) < 3:
        raise ConfigError("an h-study needs at least 3 levels")
    cells = [(lv, p) for p in cfg.p_list for lv in cfg.levels]
    recs = _run_cells(cfg, cells)
    _check_certificates(cfg, recs)
    return StudyResult("h", cfg, recs, _h_summaries(cfg, recs, "h"))


def run_fractional_study(cfg: StudyConfig) -> StudyResult:
    u = cfg.function()
    if not math.isfinite(u.regularity):
        raise ConfigError("a fractional study needs a test function with finite regularity")
    if u.regularity > cfg.m:
        raise ConfigError("test-function regularity must not exceed m")
    if len(cfg.levels) < 3:
        raise ConfigError("a fractional study needs at least 3 levels")
    cells = [(lv, p) for p in cfg.p_list for lv in cfg.levels]
    recs = _run_cells(cfg, cells)
    _check_certificates(cfg, recs)
    return StudyResult("frac", cfg, recs, _h_summaries(cfg, recs, "frac"))


def run_negative_norm_study(cfg: StudyConfig) -> StudyResult:
    for p in cfg.p_list:
        if p < cfg.m - 1:
            raise ConfigError("negative-norm rates need p >= m - 1")
    if not any(t["kind"] == "negSobolev" for t in cfg.targets):
        raise ConfigError("a negative-norm study needs a negSobolev target")
    finest = meshmod.build_mesh(cfg.mesh_family, int(cfg.levels[-1]),
                                float(cfg.domain.get("side", 1.0)), int(cfg.depth)).h
    if cfg.N < 64.0 / finest:
        raise ConfigError(f"N={cfg.N} is too small for h={finest:.4g} (needs N >= 64/h = {64 / finest:.0f})")
    cells = [(lv, p) for p in cfg.p_list for lv in cfg.levels]
    recs = _run_cells(cfg, cells)
    _check_certificates(cfg, recs)
    return StudyResult("neg", cfg, recs, _h_summaries(cfg, recs, "neg"))


def run_p_study(cfg: StudyConfig) -> StudyResult:
    if len(cfg.p_list) < 4:
        raise ConfigError("a p-study needs at least 4 degrees")
    if len(cfg.levels) != 1:
        raise ConfigError("a p-study runs at a single level")
    u = cfg.function()
    cells = [(cfg.levels[0], p) for p in cfg.p_list]
    recs = _run_cells(cfg, cells)
    _check_certificates(cfg, recs)
    summaries = []
    for t in cfg.targets:
        label = target_label(t)
        j = int(t.get("j", 0)) if t["kind"] == "brokenWj" else 0
        rows = [r for r in recs if r.flags.get(label) != "exact"]
        entry = {"p": -1, "target": label, "target_kind": t["kind"], "params": target_params(t),
                 "exact": not rows, "slope": float("nan"), "intercept": float("nan"),
                 "R2": float("nan"), "reliable": False}
        reg = min(float(cfg.m), u.regularity)
        entry["reference_slope"] = -(reg - j) if math.isfinite(reg) else float("nan")
        if len(rows) >= 2:
            x = [r.p + 1 for r in rows]
            y = [r.errors[label] for r in rows]
            s, c, r2 = fit_slope(x, y)
            entry.update(slope=s, intercept=c, R2=r2, reliable=r2 >= R2_RELIABLE)
            local = np.diff(np.log(y)) / np.diff(np.log(x))
            entry["local_slopes"] = local.tolist()
            entry["steepening"] = bool(np.all(np.diff(local) < 0)) if len(local) > 1 else False
            if math.isfinite(reg):
                entry["rate_ok"] = s <= -(reg - j) + 0.3
        summaries.append(entry)
    return StudyResult("p", cfg, recs, summaries)


RUNNERS = {"h": run_h_study, "p": run_p_study, "frac": run_fractional_study, "neg": run_negative_norm_study}


def run_study(kind: str, cfg: StudyConfig) -> StudyResult:
    if kind not in RUNNERS:
        raise ConfigError(f"unknown study kind {kind!r}")
    return RUNNERS[kind](cfg)


# ---------------------------------------------------------------------------
# output


def _fmt(x) -> str:
    if x is None or x == "":
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) and math.isnan(x):
        return ""
    return "%.17g" % x


def result_rows(res: StudyResult) -> list[dict]:
    rows = []
    sid = res.config.study_id
    for r in res.records:
        for t in res.config.targets:
            label = target_label(t)
            rows.append({"study_id": sid, "level": r.level, "h": r.h, "p": r.p, "dofs": r.dofs,
                         "target_kind": label, "target_params": target_params(t),
                         "error": r.errors[label], "certificate": r.certificates[label],
                         "slope": None, "R2": None, "row_type": "data", "elements": r.elements,
                         "flag": r.flags[label], "intercept": None, "reference_slope": None})
    for s in res.summaries:
        rows.append({"study_id": sid, "level": None, "h": None, "p": s["p"] if s["p"] >= 0 else None,
                     "dofs": None, "target_kind": s["target"], "target_params": s["params"],
                     "error": None, "certificate": None,
                     "slope": s["slope"], "R2": s["R2"], "row_type": "summary", "elements": None,
                     "flag": "exact" if s["exact"] else ("" if s["reliable"] else "unreliable_fit"),
                     "intercept": s["intercept"], "reference_slope": s["reference_slope"]})
    return rows


def write_csv(rows: list[dict], path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow([row[c] if isinstance(row.get(c), str) else _fmt(row.get(c)) for c in CSV_COLUMNS])
    Path(path).write_text(buf.getvalue())


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def plot_rows(rows: list[dict], path, x_key: str = "h") -> None:
    """Log-log error plot per (p, target) with a dashed reference slope line."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "fractalhp"
    data = [r for r in rows if r["row_type"] == "data" and r["error"] not in ("", None)]
    summ = {(r["p"], r["target_kind"]): r for r in rows if r["row_type"] == "summary"}
    fig, ax = plt.subplots(figsize=(6, 4.5))
    groups = {}
    for r in data:
        groups.setdefault((r["p"], r["target_kind"]), []).append(r)
    p_study = len({r["level"] for r in data}) == 1 and len(groups) >= 1 and len({r["p"] for r in data}) > 1
    for (p, tk), grp in sorted(groups.items()):
        if p_study:
            xs = np.array([int(r["p"]) + 1 for r in grp], float)
        else:
            xs = np.array([float(r["h"]) for r in grp])
        ys = np.array([float(r["error"]) for r in grp])
        if np.all(ys <= 0):
            continue
        lab = tk if p_study else f"p={p} {tk}"
        ax.loglog(xs, ys, "o-", label=lab)
        key = ("", tk) if p_study else (p, tk)
        s = summ.get(key)
        if s and s["reference_slope"] not in ("", None):
            ref = float(s["reference_slope"])
            x0, y0 = xs[-1], ys[-1]
            xx = np.array([xs.min(), xs.max()])
            ax.loglog(xx, y0 * (xx / x0) ** ref, "--", color=ax.lines[-1].get_color(), linewidth=1,
                      label=f"slope {ref:g}")
    ax.set_xlabel("p + 1" if p_study else "h")
    ax.set_ylabel("error")
    ax.grid(True, which="both", alpha=0.3)
    if groups:
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_outputs(result: StudyResult | None, outdir, name: str | None = None) -> dict:
    """Write <name>.csv and <name>.svg (plus timings JSON) into ``outdir``."""
    out = Path(outdir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    name = name or (result.config.study_id if result else "empty")
    rows = result_rows(result) if result else []
    csv_path = out / f"{name}.csv"
    svg_path = out / f"{name}.svg"
    write_csv(rows, csv_path)
    plot_rows(read_csv(csv_path), svg_path)
    paths = {"csv": csv_path, "svg": svg_path}
    if result:
        tpath = out / f"{name}.timings.json"
        tpath.write_text(json.dumps([{"level": r.level, "p": r.p, "wall_time": r.wall_time}
                                     for r in result.records], indent=1))
        paths["timings"] = tpath
    return paths


# ---------------------------------------------------------------------------
# verification battery


@dataclass
class Check:
    name: str
    ok: bool
    detail: str = ""


def _check(name, fn) -> Check:
    try:
        ok, detail = fn()
        return Check(name, bool(ok), detail)
    except Exception as exc:  # a crashing check is a failing check
        return Check(name, False, f"{type(exc).__name__}: {exc}")


def verify(cfg: StudyConfig | None = None, mesh: meshmod.Mesh | None = None, seed: int | None = None) -> list[Check]:
    """Run the invariant battery; every entry must pass."""
    cfg = cfg or StudyConfig()
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    depth = int(cfg.depth)
    snow = geometry.Snowflake(1.0)
    checks = []

    def area_oracle():
        d = quadrature.decompose(snow, depth)
        a = geometry.reference_area(snow)
        return d.measure_lo <= a <= d.measure_hi, f"{d.measure_lo:.6f} <= {a:.6f} <= {d.measure_hi:.6f}"

    def diameter_bracket():
        dm = geometry.diameter(snow)
        lo, hi = 2 / math.sqrt(3), 4 / 3 * 2 / math.sqrt(3)
        return lo - 1e-12 <= dm < hi, f"diam={dm:.15f}"

    def prefractal():
        ok = True
        for k in range(6):
            poly = geometry.snowflake_boundary(1.0, k)
            seg = np.roll(poly, -1, axis=0) - poly
            lengths = np.hypot(seg[:, 0], seg[:, 1])
            ok &= len(poly) == 3 * 4 ** k and np.allclose(lengths, 3.0 ** -k, rtol=1e-12)
            ok &= abs(lengths.sum() - 3 * (4 / 3) ** k) < 1e-10
        return ok, "segment counts and perimeters"

    def classification_consistency():
        pts = rng.uniform(-0.7, 0.7, (4000, 2))
        a = geometry.classify_points(snow, pts, 3)
        b = geometry.classify_points(snow, pts, 7)
        bad = np.sum((a == geometry.INSIDE) & (b == geometry.OUTSIDE)) + \
            np.sum((a == geometry.OUTSIDE) & (b == geometry.INSIDE))
        return bad == 0, f"{bad} contradictions"

    def overlap_count():
        z = (2, -1)
        ws = meshmod.containing_big_cubes(z)
        return len(ws) == 9, f"{len(ws)} cubes Q'_w contain Q_z"

    def level1_structure():
        m = meshmod.snowflake_self_similar_mesh(1, depth=depth)
        sc = sorted(round(e.scale * 3 ** 1.5, 12) for e in m.elements)
        ok = len(m) == 13 and sc.count(round(3 ** 0.5, 12)) == 7 and sc.count(1.0) == 6
        return ok, f"{len(m)} elements"

    def partition(m):
        def run():
            pc = meshmod.partition_check(m)
            return pc["ok"], f"gap={pc['gap']:.3g} width={pc['width']:.3g}"
        return run

    def covering_bounds():
        out = []
        for lv in (1, 2):
            m = meshmod.snowflake_self_similar_mesh(lv, depth=depth)
            cov = meshmod.build_covering(m)
            out += [1 <= c <= b <= 4 for c, b in cov.touching.values()]
        return all(out), f"{len(out)} elements checked"

    def reproduction():
        worst = 0.0
        for lv in (1, 2):
            m = meshmod.snowflake_self_similar_mesh(lv, depth=depth)
            cov = meshmod.build_covering(m)
            for p in range(3):
                u = make_test_function({"id": "poly", "p0": p})
                ref = norms.broken_norm(u, None, m, 0, depth).value
                v, _ = approx.l2_project(m, u, p, depth)
                w = approx.covering_project(m, cov, u, p, depth=depth)
                worst = max(worst, norms.broken_norm(u, v, m, 0, depth).value / ref,
                            norms.broken_norm(u, w, m, 0, depth).value / ref)
        return worst < 1e-10, f"max relative error {worst:.2e}"

    def galerkin_and_dominance():
        u = make_test_function({"id": "gaussian"})
        worst, dom = 0.0, True
        for lv in (1, 2):
            m = meshmod.snowflake_self_similar_mesh(lv, depth=depth)
            cov = meshmod.build_covering(m)
            for p in (0, 1, 2):
                v, rep = approx.l2_project(m, u, p, depth)
                w = approx.covering_project(m, cov, u, p, depth=depth)
                worst = max(worst, rep.max_residual)
                dom &= norms.broken_norm(u, v, m, 0, depth).value <= \
                    norms.broken_norm(u, w, m, 0, depth).value + 1e-12
                dom &= rep.minimality_ok
        return worst <= approx.TOL_GALERKIN and dom, f"max residual {worst:.2e}"

    def parseval():
        g = norms.sample_zero_extension(make_test_function({"id": "gaussian"}), None, None, 256, domain=snow)
        a = norms.sobolev_norm_fourier(g, 0.0, self_convergence=False).value
        b = g.grid_l2()
        rel = abs(a - b) / b
        return rel <= 1e-12, f"relative gap {rel:.2e}"

    checks.append(_check("geometry: area bracket", area_oracle))
    checks.append(_check("geometry: diameter bracket", diameter_bracket))
    checks.append(_check("geometry: prefractal substitution", prefractal))
    checks.append(_check("geometry: classification consistency", classification_consistency))
    checks.append(_check("mesh: 3^n overlap count", overlap_count))
    checks.append(_check("mesh: level-1 structure", level1_structure))
    for lv in (0, 1, 2):
        checks.append(_check(f"mesh: measure partition level {lv}",
                             partition(meshmod.snowflake_self_similar_mesh(lv, depth=depth))))
    checks.append(_check("mesh: measure partition hybrid", partition(meshmod.hybrid_mesh(depth=depth))))
    if mesh is not None:
        checks.append(_check("mesh: measure partition (supplied mesh)", partition(mesh)))
    checks.append(_check("mesh: element-cube bound", covering_bounds))
    checks.append(_check("approx: polynomial reproduction", reproduction))
    checks.append(_check("approx: Galerkin residual and optimality dominance", galerkin_and_dominance))
    checks.append(_check("norms: Parseval at s = 0", parseval))
    return checks
