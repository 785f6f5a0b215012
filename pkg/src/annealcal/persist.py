"""Deterministic file persistence for experiments.

Every artifact embeds the configuration hash and master seed so a run can
be replayed exactly; nothing written here depends on wall time or absolute
paths.  CSV files carry the metadata as leading '#' comment lines.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np
import pandas as pd

from . import calibrate as cal

OUT_ENV = "ANNEALCAL_OUT"


class OutputExists(RuntimeError):
    """Refusing to overwrite an existing output without force."""


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_ENV, "."))


def config_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _check_target(path: Path, force: bool) -> Path:
    path = Path(path)
    if path.exists() and not force:
        raise OutputExists(f"{path} exists; pass --force to overwrite")
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_json(path, obj, force: bool = False) -> Path:
    path = _check_target(path, force)
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")
    return path


def write_text(path, text: str, force: bool = False) -> Path:
    path = _check_target(path, force)
    path.write_text(text)
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def write_frame(path, frame: pd.DataFrame, meta: dict, force: bool = False) -> Path:
    path = _check_target(path, force)
    with open(path, "w") as fh:
        for key in sorted(meta):
            fh.write(f"# {key}={meta[key]}\n")
        frame.to_csv(fh, index=False, lineterminator="\n")
    return path


def read_frame(path) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


# --- Scan data ----------------------------------------------------------------


def _target_label(target) -> str:
    if isinstance(target, tuple):
        return f"{target[0]},{target[1]}"
    return str(target)


def scan_to_frame(scan: cal.ScanData) -> pd.DataFrame:
    """Long-format rows: kind, iteration, target, programmed_value, run, probs."""
    v, r, t = scan.probs.shape[:3]
    labels = [_target_label(x) for x in scan.targets]
    base = {
        "kind": np.repeat(scan.kind, v * r * t),
        "iteration": np.repeat(scan.iteration_index, v * r * t),
        "target": np.tile(np.repeat(labels, 1), v * r),
        "programmed_value": np.repeat(scan.programmed_values, r * t),
        "run_id": np.tile(np.repeat(np.arange(r), t), v),
    }
    frame = pd.DataFrame(base)
    if scan.kind == "h":
        frame["p_up"] = scan.probs.reshape(-1)
    else:
        flat = scan.probs.reshape(-1, 4)
        for k, name in enumerate(("p_uu", "p_ud", "p_du", "p_dd")):
            frame[name] = flat[:, k]
    return frame


def scan_meta(scan: cal.ScanData, extra: dict | None = None) -> dict:
    meta = {
        "kind": scan.kind,
        "iteration": scan.iteration_index,
        "runs": scan.runs,
        "reads_per_run": scan.reads_per_run,
        "master_seed": scan.master_seed,
        "stream": list(scan.stream),
        "programmed_values": scan.programmed_values.tolist(),
        "targets": [_target_label(t) for t in scan.targets],
        "correction_applied": scan.correction_applied.tolist(),
    }
    if extra:
        meta.update(extra)
    return meta


def write_scan(directory, name: str, scan: cal.ScanData, force: bool = False, extra_meta: dict | None = None) -> tuple[Path, Path]:
    directory = Path(directory)
    meta = scan_meta(scan, extra_meta)
    csv_path = write_frame(
        directory / f"{name}.csv",
        scan_to_frame(scan),
        {"kind": scan.kind, "iteration": scan.iteration_index,
         "master_seed": scan.master_seed,
         "config_hash": extra_meta.get("config_hash", "") if extra_meta else ""},
        force,
    )
    meta_path = write_json(directory / f"{name}.meta.json", meta, force)
    return csv_path, meta_path


def read_scan(csv_path, meta_path) -> cal.ScanData:
    meta = read_json(meta_path)
    frame = read_frame(csv_path)
    values = np.array(meta["programmed_values"], dtype=np.float64)
    labels = meta["targets"]
    kind = meta["kind"]
    runs = int(meta["runs"])
    v, t = len(values), len(labels)
    if kind == "h":
        probs = frame["p_up"].to_numpy().reshape(v, runs, t)
        targets = tuple(int(x) for x in labels)
    else:
        cols = ["p_uu", "p_ud", "p_du", "p_dd"]
        probs = frame[cols].to_numpy().reshape(v, runs, t, 4)
        targets = tuple(tuple(int(p) for p in x.split(",")) for x in labels)
    return cal.ScanData(
        kind=kind,
        programmed_values=values,
        targets=targets,
        probs=probs,
        runs=runs,
        reads_per_run=int(meta["reads_per_run"]),
        iteration_index=int(meta["iteration"]),
        correction_applied=np.array(meta["correction_applied"], dtype=np.float64),
        master_seed=int(meta["master_seed"]),
        stream=tuple(meta.get("stream", ())),
    )


# --- Plot data ------------------------------------------------------------------


def bias_estimates_frame(table: cal.CalibrationTable) -> pd.DataFrame:
    """Per-iteration bias estimates, histogram-ready."""
    rows = []
    for kind in ("h", "J"):
        labels = [_target_label(t) for t in table.targets(kind)]
        for rec in table._records(kind):
            for label, est, step in zip(labels, rec.bias_estimates, rec.correction_step):
                rows.append(
                    {"kind": kind, "iteration": rec.iteration, "target": label,
                     "bias_estimate": est, "correction_step": step}
                )
    return pd.DataFrame(rows)


def alpha_curves_frame(scan: cal.ScanData, estimator: str = "naive") -> pd.DataFrame:
    """Per-target median-alpha curves against the programmed value."""
    matrix = cal.median_alpha_matrix(scan, estimator if scan.kind == "J" else "naive")
    labels = [_target_label(t) for t in scan.targets]
    v, t = matrix.shape
    return pd.DataFrame(
        {
            "kind": np.repeat(scan.kind, v * t),
            "iteration": np.repeat(scan.iteration_index, v * t),
            "programmed_value": np.repeat(scan.programmed_values, t),
            "target": np.tile(labels, v),
            "alpha": matrix.reshape(-1),
        }
    )


def alpha_median_frame(scan: cal.ScanData, estimator: str = "naive") -> pd.DataFrame:
    """Median over targets of the median-alpha curves (device curve)."""
    matrix = cal.median_alpha_matrix(scan, estimator if scan.kind == "J" else "naive")
    return pd.DataFrame(
        {
            "kind": scan.kind,
            "iteration": scan.iteration_index,
            "programmed_value": scan.programmed_values,
            "median_alpha": np.median(matrix, axis=1),
        }
    )


def noise_floor_frames(
    scan: cal.ScanData, temperature: float, estimator: str = "naive"
) -> tuple[pd.DataFrame, pd.DataFrame, float]:
    """Sigma-vs-programmed rows, per-target means, and the grand mean."""
    stats = cal.noise_floor_stats(scan, temperature, estimator if scan.kind == "J" else "naive")
    labels = [_target_label(t) for t in scan.targets]
    v, t = stats.per_value_sigma.shape
    sigma = pd.DataFrame(
        {
            "kind": np.repeat(scan.kind, v * t),
            "iteration": np.repeat(scan.iteration_index, v * t),
            "programmed_value": np.repeat(scan.programmed_values, t),
            "target": np.tile(labels, v),
            "sigma": stats.per_value_sigma.reshape(-1),
        }
    )
    per_target = pd.DataFrame(
        {
            "kind": scan.kind,
            "iteration": scan.iteration_index,
            "target": labels,
            "mean_sigma": stats.per_target_mean,
        }
    )
    return sigma, per_target, stats.grand_mean


def estimate_band_frame(
    scan: cal.ScanData, temperature: float, estimator: str = "naive"
) -> pd.DataFrame:
    """Mean and spread over targets of alpha * T at each programmed value."""
    matrix = cal.median_alpha_matrix(scan, estimator if scan.kind == "J" else "naive")
    est = matrix * temperature
    return pd.DataFrame(
        {
            "kind": scan.kind,
            "iteration": scan.iteration_index,
            "programmed_value": scan.programmed_values,
            "mean_estimate": est.mean(axis=1),
            "std_estimate": est.std(axis=1, ddof=1),
        }
    )
