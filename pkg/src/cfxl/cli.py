"""Command-line entry point: ``cfxl {run,sweep,complexity,summarize}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import yaml

from . import harness


def _base_dict(args) -> dict:
    d = {}
    if getattr(args, "preset", None):
        if args.preset not in harness.PRESETS:
            raise SystemExit(f"unknown preset {args.preset!r}; choose from {sorted(harness.PRESETS)}")
        d = harness.merge_dicts(d, harness.PRESETS[args.preset])
    if args.config:
        d = harness.merge_dicts(d, yaml.safe_load(Path(args.config).read_text()) or {})
    exp = dict(d.get("experiment") or {})
    if args.seed is not None:
        exp["seeds"] = list(args.seed)
    if args.arch:
        exp["arch"] = args.arch
    if getattr(args, "axis", None):
        exp["sweep_axis"] = args.axis
    if getattr(args, "values", None):
        exp["sweep_values"] = _parse_values(args.values)
    if getattr(args, "episodes", None) is not None:
        d.setdefault("layer", {})["episodes"] = args.episodes
    if getattr(args, "random_episodes", None) is not None:
        d.setdefault("layer", {})["random_episodes"] = args.random_episodes
    if args.out_dir:
        exp["out_dir"] = args.out_dir
    d["experiment"] = exp
    return d


def _parse_values(text: str):
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            out.append(int(tok))
        except ValueError:
            try:
                out.append(float(tok))
            except ValueError:
                out.append(tok)
    return out


def _config(args) -> harness.ExperimentConfig:
    try:
        return harness.ExperimentConfig.from_dict(_base_dict(args))
    except ValueError as exc:
        raise SystemExit(f"invalid configuration: {exc}")


def _common(p):
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--preset", help="named sweep preset, applied before --config")
    p.add_argument("--seed", type=int, nargs="+", help="one or more master seeds")
    p.add_argument("--arch", help="architecture name")
    p.add_argument("--out-dir", dest="out_dir", help="output directory (default runs)")
    p.add_argument("--episodes", type=int)
    p.add_argument("--random-episodes", dest="random_episodes", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cfxl", description="Cell-free XL-MIMO clustering and power-control experiments")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)
    p = sub.add_parser("run", help="train one configuration for each seed")
    _common(p)
    p = sub.add_parser("sweep", help="train over a sweep axis")
    _common(p)
    p.add_argument("--axis", choices=harness.SWEEP_AXES)
    p.add_argument("--values", help="comma-separated sweep values")
    p = sub.add_parser("complexity", help="print operation counts")
    _common(p)
    p.add_argument("--n-b", dest="n_b", type=float, help="mean serving APs per UE")
    p.add_argument("--n-share", dest="n_share", type=float, help="mean sharing partners per UE")
    p = sub.add_parser("summarize", help="aggregate run directories")
    p.add_argument("runs", nargs="+", help="run directories containing metrics.csv")
    p.add_argument("--out-dir", dest="out_dir", default=".")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.verb == "run":
        cfg = _config(args)
        recs = [harness.run(cfg, s) for s in cfg.seeds]
        harness.write_summary(harness.summarize(recs), cfg.out_dir)
        for r in recs:
            print(f"{r.path} seed={r.seed} " + " ".join(f"{k}={v}" for k, v in sorted(r.summary.items())))
    elif args.verb == "sweep":
        cfg = _config(args)
        recs = harness.sweep(cfg)
        print(f"{len(recs)} runs written under {cfg.out_dir}")
    elif args.verb == "complexity":
        cfg = _config(args)
        archs = [cfg.arch] if args.arch else list(harness.ARCHS)
        for a in archs:
            print(json.dumps(harness.estimate_complexity(cfg, a, args.n_b, args.n_share)))
    else:
        recs = harness.load_records(args.runs)
        harness.write_summary(harness.summarize(recs), args.out_dir)
        print(f"summarized {len(recs)} runs into {args.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
