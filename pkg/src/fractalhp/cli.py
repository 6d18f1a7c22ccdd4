"""Command-line interface.

Test functions are defined on the whole plane, so every study uses the
trivial extension of u; no extension operator is built.

Exit codes: 0 success, 1 invariant failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import mesh as meshmod, quadrature, study

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fractalhp",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=f"Set {quadrature.CACHE_ENV} to a directory to cache cell decompositions between runs.")
    sub = ap.add_subparsers(dest="command", required=True)

    mp = sub.add_parser("mesh", help="mesh utilities")
    msub = mp.add_subparsers(dest="mesh_command", required=True)
    info = msub.add_parser("info", help="build a mesh and print its summary")
    info.add_argument("--family", default="self_similar", choices=study.MESH_FAMILIES)
    info.add_argument("--level", type=int, default=1)
    info.add_argument("--side", type=float, default=1.0)
    info.add_argument("--depth", type=int, default=quadrature.DEFAULT_DEPTH)
    info.add_argument("--save", metavar="FILE", help="also write the mesh as JSON")

    sp = sub.add_parser("study", help="run a convergence study")
    sp.add_argument("kind", choices=study.STUDY_KINDS)
    sp.add_argument("--config", metavar="FILE", help="YAML or JSON file with StudyConfig fields")
    sp.add_argument("--workers", type=int, help="threads over (level, p) cells")
    sp.add_argument("--depth", type=int, help="quadrature depth override")
    sp.add_argument("-q", "--gauss-order", type=int, dest="q", help="Gauss order override")
    sp.add_argument("--output", metavar="DIR", help="output directory override")

    vp = sub.add_parser("verify", help="run the invariant battery")
    vp.add_argument("--config", metavar="FILE")
    vp.add_argument("--mesh", metavar="FILE", help="also check the measure partition of this mesh")

    pp = sub.add_parser("plot", help="redraw the SVG for a study CSV")
    pp.add_argument("--csv", required=True, metavar="FILE")
    pp.add_argument("--output", metavar="FILE", help="defaults to the CSV path with .svg")
    return ap


def _load_config(args, kind=None) -> study.StudyConfig:
    base = study.StudyConfig.load(args.config).to_dict() if args.config else \
        (study.default_config(kind).to_dict() if kind else {})
    for key in ("workers", "depth", "q"):
        val = getattr(args, key, None)
        if val is not None:
            base[key] = val
    if getattr(args, "output", None):
        base["output_dir"] = args.output
    return study.StudyConfig.from_mapping(base)


def _cmd_mesh(args) -> int:
    m = meshmod.build_mesh(args.family, args.level, args.side, args.depth)
    info = m.info()
    info["partition"] = meshmod.partition_check(m)
    print(json.dumps(info, indent=2, default=float))
    if args.save:
        m.save(args.save)
    return EXIT_OK if info["partition"]["ok"] else EXIT_FAIL


def _cmd_study(args) -> int:
    cfg = _load_config(args, args.kind)
    res = study.run_study(args.kind, cfg)
    paths = study.emit_outputs(res, cfg.output_dir)
    for s in res.summaries:
        tag = "exact" if s["exact"] else f"slope {s['slope']:.3f} (R2 {s['R2']:.3f}, reference {s['reference_slope']:g})"
        p = f"p={s['p']} " if s["p"] >= 0 else ""
        print(f"{p}{s['target']}: {tag}")
    print(f"wrote {paths['csv']} and {paths['svg']}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    cfg = study.StudyConfig.load(args.config) if args.config else None
    m = meshmod.Mesh.load(args.mesh) if args.mesh else None
    checks = study.verify(cfg, m)
    for c in checks:
        print(f"[{'PASS' if c.ok else 'FAIL'}] {c.name}: {c.detail}")
    return EXIT_OK if all(c.ok for c in checks) else EXIT_FAIL


def _cmd_plot(args) -> int:
    out = args.output or str(args.csv).rsplit(".", 1)[0] + ".svg"
    study.plot_rows(study.read_csv(args.csv), out)
    print(f"wrote {out}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    handler = {"mesh": _cmd_mesh, "study": _cmd_study, "verify": _cmd_verify, "plot": _cmd_plot}[args.command]
    try:
        return handler(args)
    except study.ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except study.CertificateError as exc:
        print(f"certificate check failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
