"""Command-line entry point (``gmsransac``).

Exit status: 0 when every row succeeded, 1 when any row failed, 2 on a
configuration error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import bench, imageio
from .config import load_config, override
from .errors import ConfigError

SUBCOMMANDS = ("run", "sweep-presets", "sweep-ratios", "compare", "synth")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gmsransac", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=SUBCOMMANDS)
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", type=int, help="base seed; runs use seed, seed+1, ...")
    p.add_argument("--repeats", type=int)
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "jsonl"))
    p.add_argument("--preset", type=int)
    p.add_argument("--ratio", help="group ratio, e.g. 1/2 or 0.5")
    p.add_argument("--method", choices=sorted(bench.METHODS))
    p.add_argument("--presets", help="comma-separated preset list")
    p.add_argument("--ratios", help="comma-separated ratio list")
    p.add_argument("--methods", help="comma-separated method list")
    p.add_argument("--workers", type=int)
    p.add_argument("--single-worker", action="store_true", default=None)
    p.add_argument("--summary", help="write the experiment summary as JSON here")
    return p


def _settings(args) -> dict:
    cfg = load_config(args.config) if args.config else {}
    flags = {k: getattr(args, k) for k in
             ("seed", "repeats", "out", "format", "preset", "ratio", "method",
              "presets", "ratios", "methods", "workers", "single_worker")}
    cfg = override(cfg, flags)
    if args.seed is not None:
        cfg.pop("seeds", None)
    return cfg


def _workers(cfg: dict) -> int:
    if cfg.get("single_worker"):
        return 1
    w = cfg.get("workers", 1)
    if w < 1:
        raise ConfigError("workers must be >= 1")
    return min(w, os.cpu_count() or 1)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _synth(cfg: dict) -> int:
    scen = bench.scenario_from_config(cfg)
    src = scen.source
    if not isinstance(src, bench.SyntheticSource):
        raise ConfigError("synth needs source = synthetic")
    seed = scen.seed_list()[0]
    dims = (src.width, src.height)
    h = src.homography if src.homography is not None else \
        imageio.random_homography(np.random.default_rng([seed, 1]), dims)
    pa, pb, gt = imageio.synth_correspondences(src.n_inliers, src.n_outliers, h, src.noise_sigma, dims, seed)
    lines = ["# homography " + " ".join(f"{v:.17g}" for v in gt.homography.ravel()),
             "xa,ya,xb,yb,inlier"]
    lines += [f"{a[0]:.17g},{a[1]:.17g},{b[0]:.17g},{b[1]:.17g},{int(l)}"
              for a, b, l in zip(pa, pb, gt.inlier_labels)]
    _emit("\n".join(lines) + "\n", cfg.get("out"))
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _settings(args)
        if args.command == "synth":
            return _synth(cfg)
        fmt = cfg.get("format", "csv")
        if fmt not in ("csv", "jsonl"):
            raise ConfigError(f"unknown format {fmt!r}")
        base = bench.scenario_from_config(cfg)
        workers = _workers(cfg)
        summary = None
        if args.command == "run":
            records = bench.run_scenario(base, workers)
        elif args.command == "sweep-presets":
            sweep = bench.sweep_presets(base, cfg.get("presets", [base.preset]), workers)
            records, summary = sweep.records, sweep.summary()
        elif args.command == "sweep-ratios":
            ratios = cfg.get("ratios", list(bench.DEFAULT_RATIOS))
            records = bench.sweep_ratios(base, ratios, cfg.get("presets"), workers)
        else:
            cmp = bench.compare_methods(base, cfg.get("methods", list(bench.METHODS)),
                                        cfg.get("presets"), workers=workers)
            records, summary = cmp.records, cmp.summary()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    _emit(bench.records_to_text(records, fmt), cfg.get("out"))
    if summary is not None:
        text = json.dumps(summary, indent=2, default=str)
        if args.summary:
            Path(args.summary).write_text(text + "\n")
        else:
            print(text, file=sys.stderr)
    failed = [r for r in records if not r.ok]
    for r in failed:
        print(f"failed: {r.scenario} seed {r.seed}: {r.reason}", file=sys.stderr)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
