"""Batch command-line interface.

Subcommands: ``run`` (experiment from a config file), ``sweep`` (rate vs
distance, optionally optimizing V_A per distance), ``keyrate`` (pure rate
calculator from a parameter set), ``characterize`` (trace analysis) and
``loopback`` (pipeline self-test).  Usage and configuration errors exit
with code 2, runtime failures with code 1.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

EXIT_USAGE = 2
EXIT_RUNTIME = 1


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvqkdsim",
        description="CV-QKD link simulator: DSP chain, parameter estimation "
                    "and secret-key-rate analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a batch experiment from a config file")
    run.add_argument("--config", required=True, help="JSON experiment config")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--frames", type=int, default=None,
                     help="override the number of frames")
    run.add_argument("--out", default="out", help="output directory")
    run.add_argument("--format", choices=("json", "csv", "both"), default="json")

    sweep = sub.add_parser("sweep", help="secret key rate vs distance (and V_A)")
    sweep.add_argument("--va", type=float, required=True)
    sweep.add_argument("--xi-b", type=float, required=True,
                       help="Bob-side excess noise at the reference transmittance")
    sweep.add_argument("--t-ref", type=float, required=True,
                       help="reference transmittance at which xi-b was measured")
    sweep.add_argument("--eta", type=float, required=True)
    sweep.add_argument("--v-el", type=float, required=True)
    sweep.add_argument("--beta", type=float, default=0.95)
    sweep.add_argument("--symbol-rate", type=float, default=100e6)
    sweep.add_argument("--alpha", type=float, default=0.2, help="fiber dB/km")
    sweep.add_argument("--d-max", type=float, default=50.0)
    sweep.add_argument("--d-step", type=float, default=0.5)
    sweep.add_argument("--n-list", default="",
                       help="comma-separated finite-size N values")
    sweep.add_argument("--va-grid", default="",
                       help="comma-separated V_A grid; reports the per-distance argmax")
    sweep.add_argument("--out", default=None, help="CSV output path")

    kr = sub.add_parser("keyrate", help="rate calculator from a parameter set")
    kr.add_argument("--va", type=float, required=True)
    kr.add_argument("--t", type=float, required=True)
    kr.add_argument("--xi-b", type=float, required=True)
    kr.add_argument("--eta", type=float, required=True)
    kr.add_argument("--v-el", type=float, required=True)
    kr.add_argument("--beta", type=float, default=0.95)
    kr.add_argument("--symbol-rate", type=float, default=100e6)
    kr.add_argument("--n", default="",
                    help="comma-separated total symbol counts for finite-size rates")

    ch = sub.add_parser("characterize", help="clearance analysis of recorded traces")
    ch.add_argument("--illuminated", required=True, help="frame file, shot+electronic")
    ch.add_argument("--dark", required=True, help="frame file, electronic only")
    ch.add_argument("--segment-len", type=int, default=4096)
    ch.add_argument("--threshold-db", type=float, default=10.0)
    ch.add_argument("--out", default=None, help="CSV output path")

    lb = sub.add_parser("loopback", help="noiseless end-to-end self-test")
    lb.add_argument("--symbols", type=int, default=20000)
    lb.add_argument("--seed", type=int, default=1)
    return parser


def _floats(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _cmd_run(args) -> int:
    from .config import ConfigError
    from .experiment import ExperimentConfig, emit_results, run_experiment

    try:
        cfg = ExperimentConfig.from_json(args.config)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.frames is not None:
            overrides["num_frames"] = args.frames
        if overrides:
            d = cfg.to_dict()
            d.update(overrides)
            cfg = ExperimentConfig.from_dict(d)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = run_experiment(cfg)
    paths = emit_results(report, args.out, args.format)
    print(f"frames ok: {report.n_ok}/{len(report.frames)}  FER: {report.fer:.3f}")
    if "skr_asym_bps_mean" in report.summary:
        print(f"mean asymptotic SKR: "
              f"{report.summary['skr_asym_bps_mean'] / 1e6:.3f} Mbit/s")
    for p in paths:
        print(f"wrote {p}")
    return 0


def _cmd_sweep(args) -> int:
    from .experiment import sweep_to_csv, va_sweep
    from .keyrate import LinkParams, SecurityParams, skr_sweep

    params = LinkParams.from_xi_bob(args.va, args.t_ref, args.eta,
                                    args.xi_b, args.v_el)
    sec = SecurityParams(beta_ec=args.beta)
    distances = np.arange(args.d_step, args.d_max + args.d_step / 2, args.d_step)
    n_list = _floats(args.n_list)
    sweep = skr_sweep(params, sec, distances, args.alpha, n_list,
                      args.symbol_rate)
    if sweep.zero_crossing_km is not None:
        print(f"asymptotic zero crossing: {sweep.zero_crossing_km:.2f} km")
    else:
        print("asymptotic rate positive over the whole range")
    for n, d in sweep.zero_crossings_finite.items():
        label = f"{d:.2f} km" if d is not None else "none in range"
        print(f"finite-size N={n:.0e} zero crossing: {label}")
    if args.va_grid:
        for row in sweep.rows[:: max(len(sweep.rows) // 10, 1)]:
            p_d = LinkParams(va=params.va, t=row.transmittance, eta=params.eta,
                             xi=params.xi, v_el=params.v_el)
            res = va_sweep(p_d, sec, _floats(args.va_grid), args.symbol_rate)
            print(f"d={row.distance_km:6.2f} km: best V_A = {res['argmax_va']:.2f} "
                  f"({res['argmax_skr_bps'] / 1e6:.3f} Mbit/s)")
    if args.out:
        path = sweep_to_csv(sweep, n_list, args.out)
        print(f"wrote {path}")
    return 0


def _cmd_keyrate(args) -> int:
    from .keyrate import LinkParams, SecurityParams, asymptotic_skr, finite_size_skr

    params = LinkParams.from_xi_bob(args.va, args.t, args.eta, args.xi_b,
                                    args.v_el)
    sec = SecurityParams(beta_ec=args.beta)
    report = asymptotic_skr(params, sec, args.symbol_rate)
    print(f"SNR/quad {report.snr:.4f}  I_AB {report.i_ab:.4f} bit/sym  "
          f"chi_BE {report.chi_be:.4f} bit/sym")
    print(f"asymptotic k = {report.k_asym:+.5f} bit/symbol")
    print(f"asymptotic SKR = {report.skr_asym / 1e6:.3f} Mbit/s")
    print(f"convention: {report.convention}")
    for n in _floats(args.n):
        fin = finite_size_skr(params, sec, n, args.symbol_rate)
        print(f"finite-size N={n:.0e}: k = {fin.k_finite:+.5f} bit/sym, "
              f"SKR = {fin.skr_finite / 1e6:.4f} Mbit/s")
    return 0


def _cmd_characterize(args) -> int:
    import csv

    from .characterization import (bandwidth_at_clearance, clearance_curve,
                                   compute_psd)
    from .frameio import FrameFormatError, load_frames

    try:
        illuminated = load_frames(args.illuminated)[0]
        dark = load_frames(args.dark)[0]
    except (FrameFormatError, FileNotFoundError, IndexError) as exc:
        print(f"cannot load traces: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    psd_ill = compute_psd(illuminated, args.segment_len)
    psd_dark = compute_psd(dark, args.segment_len)
    freqs, cl = clearance_curve(psd_ill, psd_dark)
    bw = bandwidth_at_clearance(freqs, cl, args.threshold_db)
    positive = freqs > 0
    print(f"clearance: {cl[positive].max():.1f} dB peak, "
          f"{cl[positive].min():.1f} dB minimum over the grid")
    if bw is None:
        print(f"clearance never reaches {args.threshold_db:.1f} dB")
    else:
        print(f"{args.threshold_db:.1f} dB bandwidth: {bw / 1e6:.1f} MHz")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["frequency_hz", "clearance_db"])
            writer.writerows(zip(freqs.tolist(), cl.tolist()))
        print(f"wrote {args.out}")
    return 0


def _cmd_loopback(args) -> int:
    from .config import DspConfig
    from .linksim import ChannelParams, ReceiverModel, simulate_link
    from .modulation import entropy_source, gen_gaussian
    from .rxdsp import receive_frame
    from .txdsp import build_tx_frame

    cfg = DspConfig(num_symbols=args.symbols)
    rng = entropy_source(args.seed)
    alice = gen_gaussian(cfg.num_symbols, 4.10, rng)
    tx = build_tx_frame(alice, cfg)
    ideal = ReceiverModel(efficiency=1.0, v_el=0.0, laser_offset_hz=0.0,
                          shot_noise=False)
    rx, _ = simulate_link(tx, ChannelParams(transmittance=1.0), ideal, rng)
    from .frames import SymbolFrame
    disclosed = SymbolFrame(alice.symbols[0::2], alice.modulation, alice.target_va)
    recovered = receive_frame(rx, cfg, calib=None, disclosed=disclosed)
    err = recovered.symbols.symbols - alice.symbols
    nmse = float(np.sum(np.abs(err) ** 2) / np.sum(np.abs(alice.symbols) ** 2))
    print(f"loopback NMSE over {args.symbols} symbols: {nmse:.3e}")
    ok = nmse < 1e-4
    print("PASS" if ok else "FAIL")
    return 0 if ok else EXIT_RUNTIME


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "sweep": _cmd_sweep,
        "keyrate": _cmd_keyrate,
        "characterize": _cmd_characterize,
        "loopback": _cmd_loopback,
    }
    try:
        return handlers[args.command](args)
    except Exception as exc:   # runtime failures -> exit 1, not a traceback
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
