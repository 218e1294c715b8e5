"""Command-line runner: ``momentumgl run|sweep|validate|template``.

Exit codes: 0 success, 1 failed acceptance criteria, 2 usage error,
3 solver divergence (artifacts are still written).
"""
import argparse
import json
import logging
import os
import subprocess
import sys
import time
from importlib import metadata

import numpy as np

from .config import KINDS, ConfigError, defaults_for, load_config
from .io import write_pgm, write_rows_csv, write_trace_csv

log = logging.getLogger("momentumgl")

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3


def version_string():
    """``git describe`` of the source tree when available, else the package version."""
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here,
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _overrides(pairs):
    out = []
    for item in pairs or []:
        key, sep, value = item.partition("=")
        sec, dot, name = key.partition(".")
        if not sep or not dot:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        out.append((sec.strip(), name.strip(), value.strip()))
    return out


def _write_summary(outdir, cfg, summary, wall):
    doc = {"config": cfg.as_dict(), "version": version_string(),
           "wall_time_seconds": wall}
    doc.update(summary)
    with open(os.path.join(outdir, "summary.json"), "w") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_run(args):
    from .experiments import run_experiment

    cfg = load_config(args.config, _overrides(args.set))
    outdir = args.output or cfg["io"]["output"]
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "resolved.config"), "w") as fh:
        fh.write(cfg.to_text())
    t0 = time.perf_counter()
    result = run_experiment(cfg)
    wall = time.perf_counter() - t0
    write_trace_csv(os.path.join(outdir, "trace.csv"), result.trace)
    for name, rows in result.tables.items():
        write_rows_csv(os.path.join(outdir, name), rows)
    if result.snapshots:
        snapdir = os.path.join(outdir, "snapshots")
        os.makedirs(snapdir, exist_ok=True)
        for name, u in result.snapshots:
            write_pgm(os.path.join(snapdir, name + ".pgm"), u)
    _write_summary(outdir, cfg, result.summary, wall)
    print(f"{cfg.kind}: {result.summary.get('status', 'ok')} in {wall:.2f}s -> {outdir}")
    return EXIT_DIVERGED if result.diverged else EXIT_OK


def _parse_values(text):
    return [float(v) for v in text.split(",") if v.strip()]


def cmd_sweep(args):
    from .experiments import sweep

    cfg = load_config(args.config, _overrides(args.set))
    outdir = args.output or cfg["io"]["output"]
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "resolved.config"), "w") as fh:
        fh.write(cfg.to_text())
    values = _parse_values(args.values)
    t0 = time.perf_counter()
    rows = sweep(cfg, args.param, values)
    wall = time.perf_counter() - t0
    write_rows_csv(os.path.join(outdir, "sweep.csv"), rows,
                   ["value", "steps", "final_energy", "status"])
    _write_summary(outdir, cfg, {"parameter": args.param, "rows": rows,
                                 "diverged": any(r["status"] == "diverged" for r in rows)},
                   wall)
    for r in rows:
        print(f"{args.param}={r['value']:g}\tsteps={r['steps']}\t{r['status']}")
    return EXIT_OK


def cmd_validate(args):
    from .acceptance import CRITERIA, run_criteria

    only = None
    if args.only:
        only = [int(c) for c in args.only.split(",") if c.strip()]
        bad = [c for c in only if c not in CRITERIA]
        if bad:
            raise ConfigError(f"unknown criteria {bad}; valid are 1..{max(CRITERIA)}")
    results = run_criteria(only)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


def cmd_template(args):
    sys.stdout.write(defaults_for(args.kind).to_text())
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="momentumgl", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment from a config file")
    r.add_argument("config")
    r.add_argument("-o", "--output", help="output directory (overrides [io] output)")
    r.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="step counts to convergence over parameter values")
    s.add_argument("config")
    s.add_argument("--param", default="tau")
    s.add_argument("--values", required=True, help="comma-separated values (may be empty)")
    s.add_argument("-o", "--output")
    s.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("validate", help="run the acceptance criteria")
    v.add_argument("--only", help="comma-separated criterion numbers")
    v.set_defaults(func=cmd_validate)

    t = sub.add_parser("template", help="print the default config of an experiment kind")
    t.add_argument("kind", choices=KINDS)
    t.set_defaults(func=cmd_template)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
