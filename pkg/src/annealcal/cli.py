"""Command-line pipeline: make-device, calibrate, benchmark, verify, report.

Configuration comes from an optional JSON file plus flag overrides (flags
win).  Every output embeds the effective configuration hash and the seed,
and reruns with the same inputs produce byte-identical files.  Exit codes:
0 success, 1 validation error, 2 oracle failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .benchmark import BenchmarkReport, build_report, elite_mean, render_report_text, run_benchmark
from .calibrate import CalibrationTable, ProtocolConfig, persistence_correlation, run_calibration
from .chimera import build_chimera, graph_from_dict, parse_chimera_spec
from .device import DeviceModel, device_from_dict, device_to_dict, synthesize_device
from .metropolis import McConfig
from .persist import (
    OutputExists,
    config_hash,
    default_out_dir,
    read_json,
    write_frame,
    write_json,
    write_scan,
)
from . import persist
from .verify import run_checks

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_ORACLE = 2
EXIT_IO = 3


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits 2; we reserve that
        raise CliError(message)


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip() != ""]


def load_device(path) -> DeviceModel:
    data = read_json(path)
    return device_from_dict(data["device"] if "device" in data else data)


# --- make-device ----------------------------------------------------------------


def cmd_make_device(args) -> int:
    rows, cols, shore = parse_chimera_spec(args.chimera)
    if args.broken and args.broken_count:
        raise CliError("pass either --broken or --broken-count, not both")
    broken: set[int] = set(args.broken or ())
    if args.broken_count:
        nominal = rows * cols * 2 * shore
        rng = np.random.default_rng(np.random.SeedSequence(entropy=(args.seed, 901)))
        broken = set(
            rng.choice(np.arange(1, nominal + 1), size=args.broken_count, replace=False).tolist()
        )
    graph = build_chimera(rows, cols, shore, broken)
    params = {
        "temperature": args.temperature,
        "h_bias_sd": 0.0 if args.ideal else args.h_bias_sd,
        "j_bias_sd": 0.0 if args.ideal else args.j_bias_sd,
        "run_noise_sd_h": 0.0 if args.ideal else args.run_noise_h,
        "run_noise_sd_j": 0.0 if args.ideal else args.run_noise_j,
        "drift_sd_h": 0.0 if args.ideal else args.drift_h,
        "drift_sd_j": 0.0 if args.ideal else args.drift_j,
        "dac_step": 0.0 if args.ideal else args.dac_step,
        "qubit_temp_sd": 0.0 if args.ideal else args.qubit_temp_sd,
        "saturation_alpha": args.saturation,
    }
    device = synthesize_device(graph, seed=args.seed, **params)
    spec = {"chimera": args.chimera, "broken": sorted(broken), "seed": args.seed, **params}
    out = Path(args.out) if args.out else default_out_dir() / "device.json"
    write_json(
        out,
        {
            "format": "annealcal-device-v1",
            "seed": args.seed,
            "config_hash": config_hash(spec),
            "device": device_to_dict(device),
        },
        args.force,
    )
    print(f"wrote {out} ({graph.n} active qubits, {len(graph.edges)} couplers)")
    return EXIT_OK


# --- calibrate --------------------------------------------------------------------


_PROTOCOL_KEYS = (
    "h_window", "h_points", "j_window", "j_points", "runs", "reads_per_run",
    "h_iterations", "j_iterations", "estimator", "temperature_method",
    "damp_h", "damp_j", "per_qubit_temperature", "stop_factor", "schedule",
)


def _merge_protocol(args) -> ProtocolConfig:
    merged = {}
    if args.config:
        file_cfg = read_json(args.config)
        unknown = set(file_cfg) - set(_PROTOCOL_KEYS)
        if unknown:
            raise CliError(f"unknown config keys: {sorted(unknown)}")
        merged.update(file_cfg)
    for key in _PROTOCOL_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return ProtocolConfig(**merged)


def cmd_calibrate(args) -> int:
    device = load_device(args.device)
    protocol = _merge_protocol(args)
    out_dir = Path(args.out_dir) if args.out_dir else default_out_dir() / "calibration"
    eff = {
        "protocol": {k: getattr(protocol, k) for k in _PROTOCOL_KEYS},
        "seed": args.seed,
        "repeat": args.repeat,
        "skip_h": args.skip_h,
        "skip_j": args.skip_j,
        "device_seed": device.master_seed,
    }
    chash = config_hash(eff)
    write_json(out_dir / "manifest.json", {"config_hash": chash, **eff}, args.force)

    tables: list[CalibrationTable] = []
    labels = []
    for rep in range(args.repeat):
        label = args.gap_label if (args.gap_label and args.repeat == 1) else (
            f"{args.gap_label or 'rep'}{rep + 1}" if args.repeat > 1 else ""
        )
        suffix = f"_{label}" if label else ""
        result = run_calibration(
            device, protocol, stream=(args.seed, rep),
            calibrate_h=not args.skip_h, calibrate_j=not args.skip_j,
        )
        table = result.table
        tables.append(table)
        labels.append(label or "table")
        write_json(
            out_dir / f"table{suffix}.json",
            {"config_hash": chash, "seed": args.seed, "table": table.to_dict()},
            args.force,
        )
        _emit_scan_products(out_dir, suffix, result, protocol, chash, args.force)
    if args.repeat > 1:
        pairs = {}
        for i in range(len(tables)):
            for j in range(i + 1, len(tables)):
                key = f"{labels[i]}|{labels[j]}"
                entry = {}
                if not args.skip_h:
                    entry["h"] = persistence_correlation(tables[i], tables[j], "h")
                if not args.skip_j:
                    entry["J"] = persistence_correlation(tables[i], tables[j], "J")
                pairs[key] = entry
        write_json(
            out_dir / "persistence.json",
            {"config_hash": chash, "seed": args.seed, "correlations": pairs},
            args.force,
        )
    print(f"wrote calibration products to {out_dir}")
    return EXIT_OK


def _emit_scan_products(out_dir: Path, suffix: str, result, protocol, chash: str, force: bool) -> None:
    meta = {"config_hash": chash}
    table = result.table
    bias_frame = persist.bias_estimates_frame(table)
    if len(bias_frame):
        write_frame(out_dir / f"plots{suffix}/bias_estimates.csv", bias_frame, meta, force)
    floors = []
    for scans, records in ((result.h_scans, table.h_iterations), (result.j_scans, table.j_iterations)):
        for scan, record in zip(scans, records):
            estimator = record.estimator if scan.kind == "J" else "naive"
            name = f"{scan.kind}_scan_k{scan.iteration_index}"
            write_scan(out_dir / f"scans{suffix}", name, scan, force, {"config_hash": chash})
            write_frame(
                out_dir / f"plots{suffix}/alpha_curves_{name}.csv",
                persist.alpha_curves_frame(scan, estimator), meta, force,
            )
            write_frame(
                out_dir / f"plots{suffix}/alpha_median_{name}.csv",
                persist.alpha_median_frame(scan, estimator), meta, force,
            )
            sigma, per_target, grand = persist.noise_floor_frames(
                scan, record.temperature_used, estimator
            )
            write_frame(out_dir / f"plots{suffix}/sigma_vs_programmed_{name}.csv", sigma, meta, force)
            write_frame(out_dir / f"plots{suffix}/noise_floor_{name}.csv", per_target, meta, force)
            write_frame(
                out_dir / f"plots{suffix}/estimate_band_{name}.csv",
                persist.estimate_band_frame(scan, record.temperature_used, estimator), meta, force,
            )
            floors.append(
                {"kind": scan.kind, "iteration": scan.iteration_index,
                 "grand_mean_sigma": grand,
                 "temperature_mean": record.temperature_mean,
                 "temperature_median": record.temperature_median,
                 "predicted_estimate_floor": record.noise_floor}
            )
    write_json(out_dir / f"noise_floor{suffix}.json", {"config_hash": chash, "floors": floors}, force)


# --- benchmark ---------------------------------------------------------------------


def cmd_benchmark(args) -> int:
    device = load_device(args.device)
    table = None
    if args.table:
        data = read_json(args.table)
        table = CalibrationTable.from_dict(data["table"] if "table" in data else data)
    graph = device.graph
    ranges = tuple(args.ranges)
    mc = McConfig(
        chains=args.chains,
        burn_sweeps=args.burn_sweeps,
        thin_sweeps=args.thin_sweeps,
        anneal_from=args.anneal_from,
    )
    params = {
        "ranges": list(ranges),
        "instances_per_range": args.instances,
        "gauges": args.gauges,
        "runs": args.runs,
        "reads_per_run": args.reads,
        "correct_h": args.correct_h,
        "correct_j": args.correct_j,
        "seed": args.seed,
        "mc": {"chains": mc.chains, "burn_sweeps": mc.burn_sweeps,
               "thin_sweeps": mc.thin_sweeps, "anneal_from": mc.anneal_from},
        "device_seed": device.master_seed,
        "elite_fraction": args.elite_fraction,
    }
    chash = config_hash(params)
    records = run_benchmark(
        device, graph, ranges, args.instances, args.gauges, args.runs, args.reads,
        calibration=table, correct_h=args.correct_h, correct_j=args.correct_j,
        seed=args.seed, mc=mc,
    )
    out_dir = Path(args.out_dir) if args.out_dir else default_out_dir() / "benchmark"
    text = ""
    if table is not None:
        report = build_report(records, parameters={**params, "config_hash": chash},
                              elite_fraction=args.elite_fraction)
        write_json(out_dir / "report.json", report.to_dict(), args.force)
        text = render_report_text(report)
        target = out_dir / "report.txt"
        if target.exists() and not args.force:
            raise OutputExists(f"{target} exists; pass --force to overwrite")
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text)
    import pandas as pd

    summary = pd.DataFrame(
        [
            {
                "instance_id": rec.instance_id,
                "r": rec.r,
                "condition": rec.condition,
                "samples": len(rec.energies),
                "min_energy": float(rec.energies.min()),
                "elite_mean": elite_mean(rec, args.elite_fraction),
            }
            for rec in records
        ]
    )
    write_frame(out_dir / "summary.csv", summary, {"config_hash": chash, "seed": args.seed}, args.force)
    if args.export_energies:
        rows = []
        for rec in records:
            rows.append(
                pd.DataFrame(
                    {
                        "instance_id": rec.instance_id,
                        "r": rec.r,
                        "condition": rec.condition,
                        "gauge": rec.gauge_ids,
                        "energy": rec.energies,
                    }
                )
            )
        write_frame(out_dir / "energies.csv", pd.concat(rows, ignore_index=True),
                    {"config_hash": chash, "seed": args.seed}, args.force)
    print(text, end="")
    print(f"wrote benchmark products to {out_dir}")
    return EXIT_OK


# --- verify / report -----------------------------------------------------------------


def cmd_verify(args) -> int:
    report = run_checks(quick=args.quick)
    for check in report["checks"]:
        status = "PASS" if check["passed"] else "FAIL"
        print(f"{status}  {check['name']}: {check['detail']}")
    if args.out:
        write_json(args.out, report, args.force)
    return EXIT_OK if report["passed"] else EXIT_ORACLE


def cmd_report(args) -> int:
    data = read_json(args.input)
    report = BenchmarkReport.from_dict(data)
    print(render_report_text(report), end="")
    return EXIT_OK


# --- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="annealcal", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-device", help="synthesize a device-model file", parents=[])
    p.add_argument("--out", help="output path (default $ANNEALCAL_OUT/device.json)")
    p.add_argument("--chimera", default="8x8,shore=4", help="grid spec, e.g. 8x8,shore=4")
    p.add_argument("--broken", type=_int_list, help="comma-separated broken qubit indices")
    p.add_argument("--broken-count", type=int, help="draw this many broken qubits at random")
    p.add_argument("--temperature", type=float, default=0.25)
    p.add_argument("--h-bias-sd", type=float, default=0.05)
    p.add_argument("--j-bias-sd", type=float, default=0.035)
    p.add_argument("--run-noise-h", type=float, default=0.015)
    p.add_argument("--run-noise-j", type=float, default=0.01)
    p.add_argument("--drift-h", type=float, default=0.0)
    p.add_argument("--drift-j", type=float, default=0.0)
    p.add_argument("--dac-step", type=float, default=0.025)
    p.add_argument("--qubit-temp-sd", type=float, default=0.0)
    p.add_argument("--saturation", type=float, default=None,
                   help="enable thermal-model saturation with this scale")
    p.add_argument("--ideal", action="store_true", help="zero biases, noise and DAC step")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_make_device)

    p = sub.add_parser("calibrate", help="run h/J bias calibration against a device")
    p.add_argument("--device", required=True)
    p.add_argument("--out-dir", help="output directory (default $ANNEALCAL_OUT/calibration)")
    p.add_argument("--config", help="JSON protocol config; flags override")
    p.add_argument("--h-window", type=float, dest="h_window")
    p.add_argument("--h-points", type=int, dest="h_points")
    p.add_argument("--j-window", type=float, dest="j_window")
    p.add_argument("--j-points", type=int, dest="j_points")
    p.add_argument("--runs", type=int, dest="runs")
    p.add_argument("--reads", type=int, dest="reads_per_run")
    p.add_argument("--h-iterations", type=int, dest="h_iterations")
    p.add_argument("--j-iterations", type=int, dest="j_iterations")
    p.add_argument("--estimator", choices=("naive", "exact"), dest="estimator")
    p.add_argument("--temperature-method", choices=("median", "mean"), dest="temperature_method")
    p.add_argument("--damp-h", action=argparse.BooleanOptionalAction, dest="damp_h", default=None)
    p.add_argument("--damp-j", action=argparse.BooleanOptionalAction, dest="damp_j", default=None)
    p.add_argument("--per-qubit-temperature", action=argparse.BooleanOptionalAction,
                   dest="per_qubit_temperature", default=None)
    p.add_argument("--stop-factor", type=float, dest="stop_factor")
    p.add_argument("--schedule", choices=("sequential", "alternating"), dest="schedule")
    p.add_argument("--skip-h", action="store_true")
    p.add_argument("--skip-j", action="store_true")
    p.add_argument("--repeat", type=int, default=1, help="independent calibrations to run")
    p.add_argument("--gap-label", help="label suffix for repeated experiments")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("benchmark", help="score corrected vs uncorrected programming")
    p.add_argument("--device", required=True)
    p.add_argument("--table", help="calibration table JSON; omit for uncorrected-only")
    p.add_argument("--out-dir", help="output directory (default $ANNEALCAL_OUT/benchmark)")
    p.add_argument("--ranges", type=_int_list, default=[1, 2, 4, 8, 16])
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--gauges", type=int, default=10)
    p.add_argument("--runs", type=int, default=2)
    p.add_argument("--reads", type=int, default=1000)
    p.add_argument("--correct-h", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--correct-j", action=argparse.BooleanOptionalAction, default=False)
    p.add_argument("--elite-fraction", type=float, default=0.02)
    p.add_argument("--chains", type=int, default=25)
    p.add_argument("--burn-sweeps", type=int, default=192)
    p.add_argument("--thin-sweeps", type=int, default=8)
    p.add_argument("--anneal-from", type=float, default=8.0)
    p.add_argument("--export-energies", action="store_true")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("verify", help="run the oracle suite")
    p.add_argument("--out", help="write the machine-readable report here")
    p.add_argument("--quick", action="store_true", help="skip the sampling checks")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="render a saved benchmark report")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (CliError, OutputExists, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
