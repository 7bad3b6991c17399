"""Command line entry point: ``fafdm {sweep,occupancy,complexity,validate}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .channel import (
    channel_from_speeds,
    daft_channel_matrix,
    fd_channel_matrix,
    get_profile,
    matrix_occupancy,
    occupied_halfwidth,
    sample_channel,
    td_channel_matrix,
)
from .equalizers.complexity import complexity_model
from .sim import SCHEMES, ResultWriter, SimConfig, emit_matrix_occupancy, load_config, run_sweep
from .validation import REFERENCE_POWERS_DB, REFERENCE_SPEEDS_KMH, run_checks


def _esn0_list(text: str) -> tuple:
    vals = []
    for part in text.split(","):
        part = part.strip()
        if ":" in part:
            start, stop, step = (float(v) for v in part.split(":"))
            vals.extend(np.arange(start, stop + step / 2, step).tolist())
        elif part:
            vals.append(float(part))
    if not vals:
        raise argparse.ArgumentTypeError("empty Es/N0 list")
    return tuple(vals)


def _base_config(args) -> SimConfig:
    cfg = load_config(args.config) if args.config else SimConfig()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _cmd_sweep(args) -> int:
    cfg = _base_config(args)
    eq, sw = {}, {}
    for key, name in (("scheme", "scheme"), ("beta", "beta"), ("alpha", "alpha")):
        if getattr(args, key) is not None:
            eq[name] = getattr(args, key)
    if args.no_fallback:
        eq["fallback_enabled"] = False
    for key, name in (("esn0", "esn0_db"), ("max_frames", "max_frames"), ("target_errors", "target_bit_errors"), ("workers", "workers")):
        if getattr(args, key) is not None:
            sw[name] = getattr(args, key)
    if args.timing:
        sw["record_timing"] = True
    cfg = cfg.replace(equalizer=eq, sweep=sw)
    out = Path(args.out)
    if out.exists() and not args.append:
        out.unlink()
    writer = ResultWriter(out, args.format, cfg)

    def report(rec):
        writer.write(rec)
        if not args.quiet:
            print(
                f"Es/N0 {rec.esn0_db:5.1f} dB  frames {rec.frames:6d}  errors {rec.bit_errors:6d}  "
                f"BER {rec.ber:.3e}  mean CM {rec.mean_cm:.0f}",
                file=sys.stderr,
            )

    run_sweep(cfg, on_record=report)
    return 0


def _cmd_occupancy(args) -> int:
    cfg = _base_config(args)
    fcfg, pc = cfg.system.frame(), cfg.system.pulse()
    if args.random:
        rng = np.random.default_rng([cfg.seed, 0])
        ch = sample_channel(cfg.channel.resolve(), cfg.channel.fc, cfg.channel.v_max, rng, fcfg)
    else:
        prof = get_profile("EVA")
        ch = channel_from_speeds(prof.tap_delays_s, REFERENCE_POWERS_DB, REFERENCE_SPEEDS_KMH, cfg.channel.fc, fcfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mats = {
        "td": td_channel_matrix(ch, fcfg, pc),
        "fd": fd_channel_matrix(ch, fcfg, pc),
        "daft": daft_channel_matrix(ch, fcfg, pc),
    }
    for name, M in mats.items():
        count = emit_matrix_occupancy(M, args.threshold, out / f"occupancy_{name}.csv")
        hw = occupied_halfwidth(matrix_occupancy(M, args.threshold), fcfg.N)
        print(f"{name:5s} entries above {args.threshold:g} dB: {count:7d}  occupied half-width: {hw}")
    return 0


def _cmd_complexity(args) -> int:
    rec = complexity_model(args.N, args.beta, args.order, args.i_soft, args.i_hard)
    for name in ("eta0", "eta_soft", "eta_hard", "total"):
        v = getattr(rec, name)
        print(f"{name:9s} = {v}  ({float(v):.6f})")
    return 0


def _cmd_validate(args) -> int:
    failed = 0
    for chk in run_checks():
        print(f"[{'PASS' if chk.passed else 'FAIL'}] {chk.name}: {chk.detail}")
        failed += not chk.passed
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fafdm", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    sw = sub.add_parser("sweep", help="Monte Carlo BER / complexity sweep")
    sw.add_argument("--config", help="INI configuration file")
    sw.add_argument("--seed", type=int)
    sw.add_argument("--out", required=True, help="output file")
    sw.add_argument("--format", choices=("csv", "json"), default="csv")
    sw.add_argument("--scheme", choices=SCHEMES)
    sw.add_argument("--beta", type=int, help="FD bandwidth (odd)")
    sw.add_argument("--alpha", type=int, help="TD bandwidth (odd)")
    sw.add_argument("--esn0", type=_esn0_list, help="comma list or start:stop:step in dB")
    sw.add_argument("--max-frames", dest="max_frames", type=int)
    sw.add_argument("--target-errors", dest="target_errors", type=int)
    sw.add_argument("--workers", type=int)
    sw.add_argument("--no-fallback", action="store_true", help="disable the hard-decision fallback")
    sw.add_argument("--timing", action="store_true", help="record wall time (makes output non-reproducible)")
    sw.add_argument("--append", action="store_true", help="append to an existing CSV instead of replacing it")
    sw.add_argument("--quiet", action="store_true")
    sw.set_defaults(func=_cmd_sweep)

    oc = sub.add_parser("occupancy", help="write channel-matrix occupancy triplets")
    oc.add_argument("--config")
    oc.add_argument("--seed", type=int)
    oc.add_argument("--out", required=True, help="output directory")
    oc.add_argument("--threshold", type=float, default=-30.0, help="dB relative to the matrix maximum")
    oc.add_argument("--random", action="store_true", help="draw a random channel instead of the reference realization")
    oc.set_defaults(func=_cmd_occupancy)

    cx = sub.add_parser("complexity", help="evaluate the CM count formulas")
    cx.add_argument("--N", type=int, default=512)
    cx.add_argument("--beta", type=int, default=7)
    cx.add_argument("--order", type=int, default=4, help="constellation size")
    cx.add_argument("--i-soft", dest="i_soft", type=int, default=0)
    cx.add_argument("--i-hard", dest="i_hard", type=int, default=0)
    cx.set_defaults(func=_cmd_complexity)

    va = sub.add_parser("validate", help="run the numerical self-checks")
    va.set_defaults(func=_cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"fafdm: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
