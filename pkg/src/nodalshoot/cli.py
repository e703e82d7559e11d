"""Command line entry point: ``nodalshoot run`` and ``nodalshoot regress``."""
from __future__ import annotations

import argparse
import json
import sys

from . import io
from .config import ConfigError, load_config
from .harness import regress, run


def _config_error(exc: ConfigError) -> int:
    sys.stderr.write(io.dumps({"status": 2, "error": "invalid config", "fields": exc.errors}))
    return 2


def cmd_run(args) -> int:
    overrides = {"seed": args.seed} if args.seed is not None else None
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        return _config_error(exc)
    status = run(cfg, args.out, jobs=args.jobs)
    out = args.out or cfg.out_dir
    if status:
        sys.stderr.write(f"run failed, see {out}/error.json\n")
    else:
        print(f"wrote {out}/manifest.json")
    return status


def cmd_regress(args) -> int:
    overrides = {"rel_tol": args.rel_tol} if args.rel_tol is not None else None
    results = regress(args.golden, overrides, args.only)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}")
        for p in r.problems:
            print(f"    {p}")
    if args.report:
        with open(args.report, "w") as fh:
            json.dump([r.to_dict() for r in results], fh, indent=2)
    return 0 if results and all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nodalshoot", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment from a config file")
    p.add_argument("--config", required=True, help="JSON config with flat dotted keys")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.add_argument("--seed", type=int, help="random seed (overrides config)")
    p.add_argument("--jobs", type=int, default=1, help="worker threads for sweeps")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("regress", help="recompute shipped goldens and compare")
    p.add_argument("--golden", help="golden directory (default: the packaged goldens)")
    p.add_argument("--rel-tol", type=float, help="override integrator.rel_tol for all goldens")
    p.add_argument("--only", nargs="*", help="golden names to run")
    p.add_argument("--report", help="write a JSON pass/fail report here")
    p.set_defaults(func=cmd_regress)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) is not None and getattr(args, "jobs", 1) < 1:
        sys.stderr.write("--jobs must be >= 1\n")
        return 2
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
