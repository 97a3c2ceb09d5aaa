"""Command-line front end: ``condtime {run,verify,sweep,presets}``.

Exit codes: 0 success, 1 verification failure, 2 usage or parse error,
3 engine failure.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__
from .config import ConfigError, load
from .presets import PRESET_NAMES, load_preset, preset_text
from .runner import SWEEP_PARAMETERS, EngineError, cmd_run, cmd_sweep, sweep_csv
from .verify import summary, verify

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_ENGINE = 0, 1, 2, 3


def _configs(args):
    cfgs = []
    for path in args.config or ():
        cfgs.append(load(path))
    for name in args.preset or ():
        cfgs.append(load_preset(name))
    if getattr(args, "all_presets", False):
        cfgs += [load_preset(n) for n in PRESET_NAMES]
    if not cfgs:
        raise ConfigError("--config", "give --config PATH or --preset NAME")
    return cfgs


def _out_dir(args, cfg, multi):
    if args.out is None:
        return Path(cfg.output.path)
    return Path(args.out, cfg.name) if multi else Path(args.out)


def _cmd_run(args):
    cfgs = _configs(args)
    for cfg in cfgs:
        out = _out_dir(args, cfg, len(cfgs) > 1)
        report = cmd_run(cfg, out, tol=args.tol, seed=args.seed)
        print(f"{cfg.name}: wrote {', '.join(report['trajectory_files'].values())} and report.json to {out}")
        for name, m in report["engines"].items():
            print(f"  {name:8s} residual_modified_se={m['residual_modified_se']:.3e} "
                  f"max_norm_deviation={m['max_norm_deviation']:.3e}")
        if report["max_cross_difference"] is not None:
            print(f"  max cross-engine difference {report['max_cross_difference']:.3e}")
    return EXIT_OK


def _cmd_verify(args):
    ok = True
    cfgs = _configs(args)
    for cfg in cfgs:
        t = time.perf_counter()
        results = verify(cfg, tol=args.tol, seed=args.seed)
        elapsed = time.perf_counter() - t
        summ = summary(results)
        summ["scenario"] = cfg.name
        summ["elapsed_s"] = elapsed
        print(f"== {cfg.name} ({elapsed:.1f} s)")
        for r in results:
            print("  " + r.line())
        out = _out_dir(args, cfg, len(cfgs) > 1)
        out.mkdir(parents=True, exist_ok=True)
        (out / "verify.json").write_text(json.dumps(summ, indent=2, default=float) + "\n", encoding="utf-8")
        ok &= summ["passed"]
    print("verify: " + ("all checks passed" if ok else "FAILED"))
    return EXIT_OK if ok else EXIT_VERIFY


def _cmd_sweep(args):
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ConfigError("--values", f"could not parse {args.values!r} as comma-separated numbers") from None
    for cfg in _configs(args):
        rows = cmd_sweep(cfg, args.param, values, seed=args.seed, tol=args.tol, order=args.order)
        text = sweep_csv(rows)
        out = Path(args.out) if args.out else Path(cfg.output.path)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"sweep_{args.param}.csv").write_text(text, encoding="utf-8")
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_presets(args):
    if args.show:
        sys.stdout.write(preset_text(args.show))
        return EXIT_OK
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for name in PRESET_NAMES:
            (out / f"{name}.json").write_text(preset_text(name), encoding="utf-8")
        print(f"wrote {len(PRESET_NAMES)} presets to {out}")
        return EXIT_OK
    for name in PRESET_NAMES:
        print(f"{name}: {load_preset(name).description}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="condtime", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"condtime {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, multi=True):
        sp.add_argument("--config", action="append", metavar="PATH", help="scenario JSON (repeatable)")
        sp.add_argument("--preset", action="append", choices=PRESET_NAMES, help="shipped scenario (repeatable)")
        if multi:
            sp.add_argument("--all-presets", action="store_true", help="use every shipped scenario")
        sp.add_argument("--out", metavar="DIR", help="output directory (default: output.path of the config)")
        sp.add_argument("--tol", type=float, metavar="X", help="physical-state tolerance on |eigenvalue|")
        sp.add_argument("--seed", type=int, metavar="N", help="seed for randomly generated couplings")

    common(sub.add_parser("run", help="run the configured engines and export trajectories"))
    common(sub.add_parser("verify", help="run the invariant suite; exit 1 on any failure"))
    sw = sub.add_parser("sweep", help="scan lambda, dt or d and report residuals with log-log slopes")
    common(sw, multi=False)
    sw.add_argument("--param", required=True, choices=SWEEP_PARAMETERS)
    sw.add_argument("--values", required=True, help="comma-separated, strictly increasing")
    sw.add_argument("--order", type=int, default=1, help="series order for composition/isometry columns (default 1)")
    pr = sub.add_parser("presets", help="list, show or export the shipped scenarios")
    pr.add_argument("--show", choices=PRESET_NAMES)
    pr.add_argument("--out", metavar="DIR")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "verify": _cmd_verify, "sweep": _cmd_sweep, "presets": _cmd_presets}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"condtime: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"condtime: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EngineError as exc:
        print(f"condtime: {exc}", file=sys.stderr)
        return EXIT_ENGINE


if __name__ == "__main__":
    sys.exit(main())
