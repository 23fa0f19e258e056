"""Command-line interface: run, sweep, bench, plot-data."""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import ExperimentConfig, preset
from .runner import bench_throughput, run_single
from .sweep import run_sweep


def _load_config(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.load(args.config)
    else:
        cfg = preset(args.preset)
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _add_common(p):
    p.add_argument("--config", help="JSON experiment configuration file")
    p.add_argument("--preset", default="ci", choices=["paper", "ci"],
                   help="built-in configuration when --config is not given")
    p.add_argument("--seed", type=int, default=None, help="override the seed")
    p.add_argument("--out", default="out", help="output directory")


def cmd_run(args) -> int:
    cfg = _load_config(args)
    report = run_single(cfg, output_dir=args.out, save_captures=args.save_captures)
    for p in report["points"]:
        if p["status"] == "ok":
            print(f"{p['distance_km']:8.0f} km  BER {p['ber']:.3e}  "
                  f"Q {p['q_db']:6.2f} dB  EVM {p['evm_pct']:5.2f}%")
        else:
            print(f"{p['distance_km']:8.0f} km  FAILED ({p.get('reason', '?')})")
    print(f"report: {os.path.join(args.out, 'report.json')}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    if cfg.sweep is None:
        print("config has no sweep section", file=sys.stderr)
        return 2
    result = run_sweep(cfg, output_dir=args.out)
    n_ok = sum(1 for r in result["rows"] if r["status"] == "ok")
    print(f"{len(result['rows'])} rows ({n_ok} ok) -> {os.path.join(args.out, 'sweep.csv')}")
    for s in result["summary"]:
        print(f"  {s['distance_km']:8.0f} km: best {result['axis']} = "
              f"{s['best_value']} (Q {s['best_q_db']:.2f} dB)")
    return 0


def cmd_bench(args) -> int:
    cfg = _load_config(args)
    result = bench_throughput(cfg, n_samples=args.samples, repeats=args.repeats)
    print(f"samples/s: {result['samples_per_second']:.3e} "
          f"({result['ratio_to_adc_rate'] * 100:.2f}% of the ADC rate)")
    for name, sec in sorted(result["stage_seconds"].items()):
        frac = sec / max(result["stage_total_seconds"], 1e-12)
        print(f"  {name:10s} {sec:8.3f} s  ({frac * 100:5.1f}%)")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "bench.json"), "w") as f:
            json.dump(result, f, indent=2, sort_keys=True)
    return 0


def cmd_plot_data(args) -> int:
    from .plots import plot_report, plot_sweep

    made = []
    if args.report:
        made += plot_report(args.report, args.out)
    if args.csv:
        fec = None
        if args.report:
            with open(args.report) as f:
                fec = json.load(f)["config"]["metrics"]["fec_thresholds"]
        made += plot_sweep(args.csv, args.out, fec_thresholds=fec)
    if not made:
        print("nothing to plot (pass --report and/or --csv)", file=sys.stderr)
        return 2
    for path in made:
        print(path)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="kkmodem",
        description="software-defined optical modem and link simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single end-to-end run with monitors")
    _add_common(p)
    p.add_argument("--save-captures", action="store_true",
                   help="write per-distance bit/symbol/diagnostic captures")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="parameter sweep to CSV")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="receiver throughput benchmark")
    _add_common(p)
    p.add_argument("--samples", type=int, default=1 << 22, help="ADC samples to process")
    p.add_argument("--repeats", type=int, default=3)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("plot-data", help="render figures from report/CSV files")
    p.add_argument("--report", help="report.json from a run")
    p.add_argument("--csv", help="sweep.csv from a sweep")
    p.add_argument("--out", default="out", help="output directory")
    p.set_defaults(func=cmd_plot_data)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
