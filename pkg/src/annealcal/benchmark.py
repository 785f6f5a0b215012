"""Random-ensemble benchmark scoring corrected against uncorrected programming.

Each instance is run under several spin-reversal gauges.  The programmed
values realize the gauged instance while correction offsets stay in the
device frame (the persistent biases they cancel do not transform with the
gauge): programmed = gauge(desired) - offsets.  Samples are mapped back
through the gauge and scored against the original instance, pooling all
gauges and runs.

Two comparison metrics: a greedy lexicographic comparison of the sorted
distinct energies (counts break ties level by level) and the elite mean,
the mean energy of the lowest few percent of all returned samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .calibrate import CalibrationTable
from .chimera import CouplingGraph, random_range_instance
from .device import DeviceModel, sample
from .ising import IsingInstance, apply_gauge, energies, instance_hash, ungauge_sample
from .metropolis import McConfig

UNCORRECTED = "uncorrected"
ELITE_FRACTION = 0.02
_DOMAIN_BENCH = 21


@dataclass(frozen=True)
class EnergyRecord:
    """Merged energy multiset for one instance under one condition."""

    instance_id: str
    condition: str
    r: int
    energies: np.ndarray
    gauge_ids: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        e = np.asarray(self.energies, dtype=np.float64)
        g = np.asarray(self.gauge_ids, dtype=np.int64)
        if e.shape != g.shape:
            raise ValueError("energies and gauge_ids must align")
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "gauge_ids", g)


def condition_label(correct_h: bool, correct_j: bool) -> str:
    if correct_h and correct_j:
        return "hJ-corrected"
    if correct_h:
        return "h-corrected"
    if correct_j:
        return "J-corrected"
    return UNCORRECTED


def _corrected_program(
    instance: IsingInstance,
    gauge: np.ndarray,
    offset_h: np.ndarray,
    offset_j: np.ndarray,
) -> IsingInstance:
    gauged = apply_gauge(instance, gauge)
    graph = instance.graph
    h_vec = gauged.h_vector - offset_h
    j_vec = gauged.j_vector - offset_j
    h = {q: float(h_vec[p]) for p, q in enumerate(graph.active) if h_vec[p] != 0}
    J = {e: float(j_vec[p]) for p, e in enumerate(graph.edges) if j_vec[p] != 0}
    return IsingInstance(graph, h, J)


def run_condition(
    device: DeviceModel,
    instance: IsingInstance,
    gauges: np.ndarray,
    runs: int,
    reads_per_run: int,
    condition: str,
    offset_h: np.ndarray,
    offset_j: np.ndarray,
    stream: tuple[int, ...],
    r: int,
    mc: McConfig,
    method: str = "auto",
) -> EnergyRecord:
    """Sample one instance under every gauge and merge the energies.

    The sampling streams depend only on (instance, gauge, run), never on
    the condition, so a zero-offset "corrected" condition reproduces the
    uncorrected samples bit for bit.
    """
    all_e: list[np.ndarray] = []
    all_g: list[np.ndarray] = []
    for gi, gauge in enumerate(gauges):
        programmed = _corrected_program(instance, gauge, offset_h, offset_j)
        samplesets = sample(
            device, programmed, runs, reads_per_run,
            stream=stream + (gi,), drift_key=0,
            scope="effective", method=method, mc=mc,
        )
        for ss in samplesets:
            original_frame = ungauge_sample(ss.reads, gauge)
            e = energies(instance, original_frame)
            all_e.append(e)
            all_g.append(np.full(len(e), gi, dtype=np.int64))
    return EnergyRecord(
        instance_id=instance_hash(instance),
        condition=condition,
        r=r,
        energies=np.concatenate(all_e),
        gauge_ids=np.concatenate(all_g),
    )


def run_benchmark(
    device: DeviceModel,
    graph: CouplingGraph,
    ranges: tuple[int, ...],
    instances_per_range: int,
    gauges: int,
    runs: int,
    reads_per_run: int,
    calibration: CalibrationTable | None = None,
    correct_h: bool = True,
    correct_j: bool = False,
    seed: int = 0,
    mc: McConfig | None = None,
    method: str = "auto",
) -> list[EnergyRecord]:
    """Paired corrected/uncorrected runs over the random range ensemble.

    Instances draw each coupling uniformly from the scaled integer range;
    gauges are uniform random sign vectors shared by both conditions.
    """
    if graph != device.graph:
        raise ValueError("benchmark graph must match the device graph")
    n, m = graph.n, len(graph.edges)
    zero_h, zero_j = np.zeros(n), np.zeros(m)
    if calibration is not None:
        if tuple(calibration.h_targets) != graph.active or tuple(
            tuple(e) for e in calibration.j_targets
        ) != graph.edges:
            raise ValueError("calibration table does not match the benchmark graph")
        offset_h = calibration.total_correction("h") if correct_h else zero_h
        offset_j = calibration.total_correction("J") if correct_j else zero_j
        corrected = condition_label(correct_h, correct_j)
    else:
        offset_h, offset_j = zero_h, zero_j
        corrected = condition_label(False, False)
    mc = mc or McConfig()
    records: list[EnergyRecord] = []
    for r in ranges:
        for t in range(instances_per_range):
            ss = np.random.SeedSequence(entropy=(int(seed), _DOMAIN_BENCH, int(r), t))
            inst_rng = np.random.default_rng(ss)
            instance = random_range_instance(graph, r, inst_rng)
            gauge_matrix = np.where(
                inst_rng.random((gauges, n)) < 0.5, 1, -1
            ).astype(np.int8)
            stream = (_DOMAIN_BENCH, int(r), t)
            records.append(
                run_condition(
                    device, instance, gauge_matrix, runs, reads_per_run,
                    UNCORRECTED, zero_h, zero_j, stream, r, mc, method,
                )
            )
            if calibration is not None:
                records.append(
                    run_condition(
                        device, instance, gauge_matrix, runs, reads_per_run,
                        corrected, offset_h, offset_j, stream, r, mc, method,
                    )
                )
    return records


# --- Scoring -----------------------------------------------------------------


def greedy_compare(a: EnergyRecord, b: EnergyRecord) -> str:
    """Lexicographic comparison of sorted distinct energies with counts.

    Lower energy wins at the first differing level; at equal energies the
    higher count wins; identical sequences tie.  Returns "a", "b" or "tie".
    """
    if a.instance_id != b.instance_id:
        raise ValueError("records belong to different instances")
    ea, ca = np.unique(a.energies, return_counts=True)
    eb, cb = np.unique(b.energies, return_counts=True)
    ia = ib = 0
    while ia < len(ea) and ib < len(eb):
        if ea[ia] < eb[ib]:
            return "a"
        if eb[ib] < ea[ia]:
            return "b"
        if ca[ia] != cb[ib]:
            return "a" if ca[ia] > cb[ib] else "b"
        ia += 1
        ib += 1
    if ia < len(ea):
        return "a"
    if ib < len(eb):
        return "b"
    return "tie"


def elite_mean(record: EnergyRecord, fraction: float = ELITE_FRACTION) -> float:
    """Mean of the lowest ceil(fraction * N) energies."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    e = record.energies
    if e.size == 0:
        raise ValueError("empty energy record")
    k = int(np.ceil(fraction * e.size))
    return float(np.sort(e)[:k].mean())


@dataclass(frozen=True)
class RangeCell:
    wins: int
    losses: int
    ties: int

    @property
    def count(self) -> int:
        return self.wins + self.losses + self.ties

    @property
    def win_probability(self) -> float:
        return self.wins / self.count if self.count else float("nan")


@dataclass(frozen=True)
class BenchmarkReport:
    """Win statistics of the corrected condition per range and metric."""

    corrected_condition: str
    elite_fraction: float
    cells: dict[str, dict[int, RangeCell]]
    pooled: dict[str, RangeCell]
    pooled_pvalue: dict[str, float]
    parameters: dict

    def to_dict(self) -> dict:
        return {
            "corrected_condition": self.corrected_condition,
            "elite_fraction": self.elite_fraction,
            "cells": {
                metric: {
                    str(r): {"wins": c.wins, "losses": c.losses, "ties": c.ties,
                             "win_probability": c.win_probability}
                    for r, c in by_range.items()
                }
                for metric, by_range in self.cells.items()
            },
            "pooled": {
                metric: {"wins": c.wins, "losses": c.losses, "ties": c.ties,
                         "win_probability": c.win_probability}
                for metric, c in self.pooled.items()
            },
            "pooled_pvalue": self.pooled_pvalue,
            "parameters": self.parameters,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BenchmarkReport":
        def cell(d):
            return RangeCell(int(d["wins"]), int(d["losses"]), int(d["ties"]))

        return cls(
            corrected_condition=data["corrected_condition"],
            elite_fraction=float(data["elite_fraction"]),
            cells={
                metric: {int(r): cell(c) for r, c in by_range.items()}
                for metric, by_range in data["cells"].items()
            },
            pooled={metric: cell(c) for metric, c in data["pooled"].items()},
            pooled_pvalue={k: float(v) for k, v in data["pooled_pvalue"].items()},
            parameters=data.get("parameters", {}),
        )


def _pair_records(records: list[EnergyRecord]):
    by_instance: dict[str, dict[str, EnergyRecord]] = {}
    order: list[str] = []
    for rec in records:
        if rec.instance_id not in by_instance:
            order.append(rec.instance_id)
        by_instance.setdefault(rec.instance_id, {})[rec.condition] = rec
    pairs = []
    for iid in order:
        group = by_instance[iid]
        others = [c for c in group if c != UNCORRECTED]
        if UNCORRECTED not in group or len(others) != 1:
            raise ValueError(f"instance {iid} lacks a paired corrected/uncorrected record")
        pairs.append((group[others[0]], group[UNCORRECTED]))
    return pairs


def summarize(
    records: list[EnergyRecord],
    metric: str = "greedy",
    elite_fraction: float = ELITE_FRACTION,
) -> dict[int, RangeCell]:
    """Per-range win/tie/loss counts of the corrected condition."""
    if metric not in ("greedy", "elite"):
        raise ValueError(f"unknown metric {metric!r}")
    tallies: dict[int, list[int]] = {}
    for corrected, uncorrected in _pair_records(records):
        t = tallies.setdefault(corrected.r, [0, 0, 0])
        if metric == "greedy":
            verdict = greedy_compare(corrected, uncorrected)
        else:
            em_c = elite_mean(corrected, elite_fraction)
            em_u = elite_mean(uncorrected, elite_fraction)
            verdict = "tie" if em_c == em_u else ("a" if em_c < em_u else "b")
        t[{"a": 0, "b": 1, "tie": 2}[verdict]] += 1
    return {r: RangeCell(*t) for r, t in sorted(tallies.items())}


def build_report(
    records: list[EnergyRecord],
    parameters: dict | None = None,
    elite_fraction: float = ELITE_FRACTION,
) -> BenchmarkReport:
    corrected = {rec.condition for rec in records if rec.condition != UNCORRECTED}
    label = corrected.pop() if corrected else UNCORRECTED
    cells: dict[str, dict[int, RangeCell]] = {}
    pooled: dict[str, RangeCell] = {}
    pvalues: dict[str, float] = {}
    for metric in ("greedy", "elite"):
        by_range = summarize(records, metric, elite_fraction)
        cells[metric] = by_range
        wins = sum(c.wins for c in by_range.values())
        losses = sum(c.losses for c in by_range.values())
        ties = sum(c.ties for c in by_range.values())
        pooled[metric] = RangeCell(wins, losses, ties)
        if wins + losses:
            pvalues[metric] = float(
                stats.binomtest(wins, wins + losses, 0.5, alternative="greater").pvalue
            )
        else:
            pvalues[metric] = 1.0
    return BenchmarkReport(
        corrected_condition=label,
        elite_fraction=elite_fraction,
        cells=cells,
        pooled=pooled,
        pooled_pvalue=pvalues,
        parameters=parameters or {},
    )


def render_report_text(report: BenchmarkReport) -> str:
    """Aligned text table: one row per metric, one column per range."""
    ranges = sorted({r for by in report.cells.values() for r in by})
    header = ["Range r_J"] + [str(r) for r in ranges] + ["pooled", "p-value"]
    rows = [header]
    names = {"greedy": "Greedy", "elite": f"Elite mean ({report.elite_fraction:.0%})"}
    for metric in ("greedy", "elite"):
        row = [names[metric]]
        for r in ranges:
            cell = report.cells[metric].get(r)
            row.append(f"{cell.win_probability:.2f}" if cell else "-")
        row.append(f"{report.pooled[metric].win_probability:.2f}")
        row.append(f"{report.pooled_pvalue[metric]:.3g}")
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = []
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(widths[j]) for j, cell in enumerate(row)).rstrip())
        if i == 0:
            lines.append("-" * (sum(widths) + 2 * (len(widths) - 1)))
    tie_notes = []
    for metric in ("greedy", "elite"):
        ties = report.pooled[metric].ties
        if ties:
            tie_notes.append(f"{names[metric]}: {ties} ties")
    if tie_notes:
        lines.append("(" + "; ".join(tie_notes) + ")")
    return "\n".join(lines) + "\n"
