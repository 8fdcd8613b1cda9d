"""Command-line entry points.

``multiphoton-scan``   detuning sweep -> CSV
``multiphoton-clicks`` quantum-jump click record -> text file
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import sys

import numpy as np

from .hilbert import SpaceConfig
from .scan import PRESETS, ScanConfig, figure_preset, parse_grid, run_scan
from .trajectories import mcwf_ensemble, thin_record


def _timestamp() -> str:
    # SOURCE_DATE_EPOCH pins the stamp for reproducible output
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        when = _dt.datetime.fromtimestamp(int(epoch), tz=_dt.timezone.utc)
    else:
        when = _dt.datetime.now(tz=_dt.timezone.utc)
    return when.strftime("%Y-%m-%dT%H:%M:%SZ")


def load_config(path: str) -> ScanConfig:
    with open(path) as fh:
        data = json.load(fh)
    preset = data.pop("preset", None)
    if preset is not None:
        base = figure_preset(preset).to_dict()
        base.update(data)
        data = base
    return ScanConfig.from_dict(data)


def scan_main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="multiphoton-scan",
                                 description="Sweep the drive detuning of the driven JC system and write a CSV spectrum.")
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=sorted(PRESETS))
    src.add_argument("--config", help="JSON file with ScanConfig fields (may name a base 'preset')")
    ap.add_argument("--out", default="-", help="output CSV path ('-' for stdout)")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--grid", help="detuning grid in units of g, min:max:count")
    ap.add_argument("--no-timestamp", action="store_true", help="omit the timestamp line from the preamble")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    cfg = figure_preset(args.preset) if args.preset else load_config(args.config)
    if args.grid:
        lo, hi, n = parse_grid(args.grid)
        cfg = cfg.replace(delta_min=lo, delta_max=hi, delta_count=n)
    table = run_scan(cfg, workers=args.workers)
    text = table.to_csv(timestamp=None if args.no_timestamp else _timestamp())
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
    if table.failed:
        logging.error("%d of %d rows failed", len(table.failed), len(table.rows))
        return 2
    return 0


def clicks_main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="multiphoton-clicks",
                                 description="Simulate photodetection records by quantum-jump trajectories.")
    ap.add_argument("--preset", choices=sorted(PRESETS), default="fig2")
    ap.add_argument("--delta", type=float, default=float(1 / np.sqrt(2)), help="detuning in units of g")
    ap.add_argument("--n-traj", type=int, default=100)
    ap.add_argument("--duration", type=float, default=1e5, help="recorded time per trajectory, units of 1/g")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--efficiency", type=float, default=1.0)
    ap.add_argument("--n-photon-max", type=int)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="-")
    args = ap.parse_args(argv)

    cfg = figure_preset(args.preset)
    space = SpaceConfig(args.n_photon_max or cfg.n_photon_max)
    rec = mcwf_ensemble(cfg.params(args.delta), space, args.duration, args.n_traj, args.seed,
                        workers=args.workers)
    if args.efficiency < 1:
        rec = thin_record(rec, args.efficiency, args.seed)
    text = rec.to_text()
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(scan_main())
