"""Command line entry point: ``cavmhd <verb> [--config FILE] [--out DIR] [--seed S] [--quiet]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, describe_keys, load_config

VERBS = ("run", "continue-eps", "continue-delta", "refine", "weak-vs-strong", "check")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cavmhd",
        description="Compressible MHD in a cavity of a free rigid body (body frame).",
        epilog="configuration keys (key = value, one per line):\n" + describe_keys(),
        formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("verb", choices=VERBS,
                   help="run | continue-eps | continue-delta | refine | weak-vs-strong | check")
    p.add_argument("checkpoint", nargs="?", help="checkpoint file (check only)")
    p.add_argument("--config", help="configuration file")
    p.add_argument("--out", help="output directory (overrides out.dir)")
    p.add_argument("--seed", type=int, help="perturbation seed (overrides ic.seed)")
    p.add_argument("--quiet", action="store_true", help="only report errors")
    p.add_argument("--refine-kind", choices=("dt", "N"), default=None,
                   help="refine: dt or N (default from study.mode)")
    return p


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig().validate()
    kw = {}
    if args.out:
        kw["out_dir"] = args.out
    if args.seed is not None:
        kw["seed"] = args.seed
    return cfg.with_(**kw) if kw else cfg


def _check(path: str, quiet: bool) -> int:
    from .diagnostics import invariant_report
    from .io import read_checkpoint
    state, header = read_checkpoint(path)
    rep = invariant_report(state)
    if not quiet:
        for k, v in rep.values.items():
            thr = rep.thresholds.get(k)
            flag = "" if thr is None else ("ok" if v <= thr else f"FAIL (> {thr:g})")
            print(f"{k:<12} {v:.6e} {flag}")
    return 0 if rep.ok else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    from . import driver
    try:
        if args.verb == "check":
            if not args.checkpoint:
                print("check needs a checkpoint path", file=sys.stderr)
                return 2
            return _check(args.checkpoint, args.quiet)
        cfg = _config(args)
        out = Path(cfg.out_dir)
        if args.verb == "run":
            res = driver.run_simulation(cfg, out_dir=out, quiet=args.quiet)
            if not args.quiet:
                print(f"status {res.status}: {res.message} ({len(res.rows)} rows in {out})")
            return res.status
        if args.verb in ("continue-eps", "continue-delta"):
            param = "eps" if args.verb == "continue-eps" else "delta"
            table = driver.continuation_run(cfg, param, cfg.levels, out_dir=out)
            if not args.quiet:
                for r in table.rows:
                    print(json.dumps(r))
                print("successive relative energies decreasing:", table.decreasing)
            return 0 if all("error" not in r for r in table.rows) else 2
        if args.verb == "refine":
            kind = args.refine_kind or ("N" if cfg.mode == "refine_N" else "dt")
            res = driver.refine_study(cfg, kind, out_dir=out)
            if not args.quiet:
                for r in res["rows"]:
                    print(json.dumps({k: v for k, v in r.items() if k != "final"}))
            return 0
        if args.verb == "weak-vs-strong":
            res = driver.weak_vs_strong_study(cfg, out_dir=out)
            if not args.quiet:
                for n, reps in res.items():
                    print(f"N={n}: E(T) = {reps[-1].total:.6e}")
            return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
