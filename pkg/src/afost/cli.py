"""Command line front end: ``afost run``, ``afost compare``, ``afost trace gen``."""

import argparse
import logging
import os
import sys
import tempfile

import numpy as np

from .config import ExperimentConfig, apply_overrides, load_config
from .harness import comparison_to_csv, compare_modes, run_experiment, sweep_to_csv
from .media import StreamConfig, generate_trace, write_trace

# flag name -> config key
_RUN_FLAGS = {"mode": "phy_mode", "scheduler": "scheduler", "senders": "n_senders",
              "relays": "n_relays", "snr_min": "snr_min", "snr_max": "snr_max",
              "snr_step": "snr_step", "fec": "fec", "bitrate": "bitrate", "fps": "fps",
              "gop": "gop_size", "startup_delay": "startup_delay", "trials": "n_trials",
              "seed": "base_seed", "workers": "n_workers", "slot": "slot_duration_s",
              "gops": "n_gops"}


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="afost", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one SNR sweep and write a CSV")
    run.add_argument("--config", help="INI file with an [experiment] section")
    run.add_argument("--mode", choices=["AFOST", "COOP", "DIR"])
    run.add_argument("--scheduler", choices=["Opt", "NoOpt"])
    run.add_argument("--senders", type=int)
    run.add_argument("--relays", type=int, help="default N-1 for AFOST, 1 otherwise")
    run.add_argument("--snr-min", type=float)
    run.add_argument("--snr-max", type=float)
    run.add_argument("--snr-step", type=float)
    run.add_argument("--fec", help="RS code as n,k (e.g. 19,10)")
    run.add_argument("--bitrate", type=float, help="bits/s per flow")
    run.add_argument("--fps", type=float)
    run.add_argument("--gop", type=int, help="frames per GOP")
    run.add_argument("--startup-delay", type=float, help="seconds")
    run.add_argument("--trials", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--gops", type=int, help="GOPs per trace")
    run.add_argument("--slot", type=float, help="slot duration in seconds")
    run.add_argument("--workers", type=int)
    run.add_argument("--out", default="-", help="CSV path, '-' for stdout")
    run.add_argument("--trial-log", help="optional per-packet log CSV")

    cmp_ = sub.add_parser("compare", help="paired comparison of several config files")
    cmp_.add_argument("configs", nargs="+")
    cmp_.add_argument("--out", default="-")

    trace = sub.add_parser("trace", help="trace utilities")
    tsub = trace.add_subparsers(dest="trace_command", required=True)
    gen = tsub.add_parser("gen", help="emit a synthetic packet trace")
    gen.add_argument("--bitrate", type=float, default=StreamConfig.bitrate)
    gen.add_argument("--fps", type=float, default=StreamConfig.fps)
    gen.add_argument("--gop", type=int, default=StreamConfig.gop_size)
    gen.add_argument("--startup-delay", type=float, default=StreamConfig.startup_delay)
    gen.add_argument("--gops", type=int, default=10)
    gen.add_argument("--flows", type=int, default=1)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", default="-")
    return ap


def _run_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {key: getattr(args, flag) for flag, key in _RUN_FLAGS.items()
                 if getattr(args, flag) is not None}
    if args.relays is None and "n_senders" in overrides:
        n = int(overrides["n_senders"])
        mode = overrides.get("phy_mode", cfg.phy_mode)
        overrides["n_relays"] = max(1, n - 1) if mode == "AFOST" else max(1, cfg.n_relays)
    return apply_overrides(cfg, overrides)


def _write(writer, target, obj):
    """Call a path-based CSV writer; ``-`` routes its output to stdout."""
    if target == "-":
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, "out.csv")
            writer(obj, path)
            with open(path) as fh:
                sys.stdout.write(fh.read())
    else:
        writer(obj, target)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            cfg = _run_config(args)
            result = run_experiment(cfg, trial_log=args.trial_log)
            _write(sweep_to_csv, args.out, result)
        elif args.command == "compare":
            rows = compare_modes([load_config(p) for p in args.configs])
            _write(comparison_to_csv, args.out, rows)
        else:
            cfg = StreamConfig(bitrate=args.bitrate, fps=args.fps, gop_size=args.gop,
                               startup_delay=args.startup_delay)
            ss = np.random.SeedSequence(args.seed)
            packets = []
            for fl, child in enumerate(ss.spawn(args.flows)):
                packets.extend(generate_trace(cfg, args.gops, np.random.default_rng(child), fl))
            _write(write_trace, args.out, packets)
    except (ValueError, OSError) as exc:
        print(f"afost: error: {exc}", file=sys.stderr)
        return 2
    return 0
