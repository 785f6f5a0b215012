"""Thermal-regime bias estimation and iterative correction.

The protocols exploit the fact that for weak programmed parameters the
device's outcome statistics follow a Boltzmann distribution, so the
log-odds transform

    alpha(p) = (1/2) ln((1 - p) / p)

of a qubit's spin-up probability equals (h_prog + h_bias) / T.  Sweeping
the programmed value and fitting a line to (h_prog, alpha) yields the
inverse temperature (slope) and the bias (intercept times temperature).
Couplers are treated the same way through the aligned-pair probability
(naive estimator) or the four-outcome cross ratio

    alpha_ij = (1/4) ln(p_ud p_du / (p_uu p_dd)),

which recovers J / T exactly even when the paired qubits carry field
biases.  Iterative correction programs the desired value minus the sum of
previously estimated biases; a variance-weighted (damped) step guards
against overcorrection when estimates are noisy.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .chimera import CouplerBatches, CouplingGraph, edge_batches, graph_to_dict
from .device import DeviceModel, sample_pair_counts, sample_up_counts
from .ising import IsingInstance

logger = logging.getLogger(__name__)

DEFAULT_H_WINDOW = 0.1
DEFAULT_J_WINDOW = 0.1
DEFAULT_H_POINTS = 41
DEFAULT_J_POINTS = 21


# --- Log-odds estimators ----------------------------------------------------


def _clamped(p: np.ndarray, clamp: float | None, what: str) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if clamp is not None:
        if not 0 < clamp < 0.5:
            raise ValueError("clamp bound must lie in (0, 0.5)")
        n_out = int((p <= 0).sum() + (p >= 1).sum())
        if n_out:
            logger.warning("clamped %d %s probabilities to [%g, %g]", n_out, what, clamp, 1 - clamp)
        p = np.clip(p, clamp, 1.0 - clamp)
    if np.any(p <= 0) or np.any(p >= 1):
        raise ValueError(f"{what} probability outside (0, 1) and no clamp given")
    return p


def alpha_from_prob(p, clamp: float | None = None):
    """Log-odds transform alpha(p) = (1/2) ln((1-p)/p).

    Empirical probabilities of exactly 0 or 1 are clipped to
    [clamp, 1 - clamp] when a clamp bound (typically the half-count bound
    1 / (2 reads)) is supplied; otherwise they raise.
    """
    p = _clamped(p, clamp, "spin-up")
    out = 0.5 * np.log((1.0 - p) / p)
    return float(out) if out.ndim == 0 else out


def prob_from_alpha(alpha):
    """Inverse of alpha_from_prob: p = 1 / (1 + exp(2 alpha))."""
    alpha = np.asarray(alpha, dtype=np.float64)
    out = 1.0 / (1.0 + np.exp(2.0 * alpha))
    return float(out) if out.ndim == 0 else out


def alpha_ij_naive(p_aligned, clamp: float | None = None):
    """Coupler log-odds from the aligned-pair probability p(uu or dd).

    Equals J / T only when neither paired qubit carries a field bias.
    """
    p = _clamped(p_aligned, clamp, "aligned-pair")
    out = 0.5 * np.log((1.0 - p) / p)
    return float(out) if out.ndim == 0 else out


def alpha_ij_exact(p_uu, p_ud, p_du, p_dd, clamp: float | None = None):
    """Coupler log-odds from the four pair outcomes (cross ratio).

    Returns (1/4) ln(p_ud p_du / (p_uu p_dd)), which equals J / T for
    Boltzmann statistics regardless of the qubits' field biases.  The
    four probabilities must sum to 1 (tightly for analytic inputs; a
    loose sanity bound applies to clamped empirical inputs).
    """
    stacked = np.stack(
        [np.asarray(x, dtype=np.float64) for x in (p_uu, p_ud, p_du, p_dd)], axis=-1
    )
    # analytic inputs must sum tightly; per-channel medians of clamped
    # empirical runs only approximately, so a loose sanity bound applies
    tol = 1e-6 if clamp is None else 0.25
    if np.any(np.abs(stacked.sum(axis=-1) - 1.0) > tol):
        raise ValueError("pair-outcome probabilities do not sum to 1")
    stacked = _clamped(stacked, clamp, "pair-outcome")
    out = 0.25 * (
        np.log(stacked[..., 1])
        + np.log(stacked[..., 2])
        - np.log(stacked[..., 0])
        - np.log(stacked[..., 3])
    )
    return float(out) if out.ndim == 0 else out


# --- Scan data ----------------------------------------------------------------


@dataclass(frozen=True)
class ScanData:
    """Per-run outcome probabilities from one calibration experiment.

    ``probs`` has shape (values, runs, targets) holding p(up) for field
    scans, or (values, runs, targets, 4) holding (p_uu, p_ud, p_du, p_dd)
    for coupler scans.
    """

    kind: str
    programmed_values: np.ndarray
    targets: tuple
    probs: np.ndarray
    runs: int
    reads_per_run: int
    iteration_index: int
    correction_applied: np.ndarray
    master_seed: int = 0
    stream: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in ("h", "J"):
            raise ValueError(f"unknown scan kind {self.kind!r}")
        v = np.asarray(self.programmed_values, dtype=np.float64)
        p = np.asarray(self.probs, dtype=np.float64)
        c = np.asarray(self.correction_applied, dtype=np.float64)
        object.__setattr__(self, "programmed_values", v)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "correction_applied", c)
        want = (len(v), self.runs, len(self.targets))
        if self.kind == "J":
            want = want + (4,)
        if p.shape != want:
            raise ValueError(f"probs shape {p.shape} does not match {want}")
        if np.any(p < 0) or np.any(p > 1):
            raise ValueError("probabilities must lie in [0, 1]")
        if self.kind == "J" and np.any(np.abs(p.sum(axis=-1) - 1.0) > 1e-9):
            raise ValueError("pair-outcome probabilities must sum to 1 per run")

    @property
    def clamp_bound(self) -> float:
        return 1.0 / (2.0 * self.reads_per_run)

    def target_column(self, target) -> int:
        try:
            return self.targets.index(target)
        except ValueError:
            raise KeyError(f"target {target!r} not in scan") from None


def _scan_stream(base: int | tuple[int, ...], *extra: int) -> tuple[int, ...]:
    key = (base,) if isinstance(base, int) else tuple(base)
    return key + extra


def run_h_scan(
    device: DeviceModel,
    hp_values,
    runs: int,
    reads_per_run: int,
    prior_corrections: np.ndarray | None = None,
    stream: int | tuple[int, ...] = 0,
    iteration_index: int = 1,
    window: float = DEFAULT_H_WINDOW,
) -> ScanData:
    """Sweep a common programmed field over all qubits simultaneously.

    Each qubit is programmed to hp minus its accumulated prior correction;
    all couplings stay at zero.  Records every qubit's per-run spin-up
    probability.
    """
    hp_values = np.asarray(hp_values, dtype=np.float64)
    if hp_values.size == 0:
        raise ValueError("empty programmed-value list")
    if np.any(np.abs(hp_values) > window + 1e-12):
        raise ValueError(f"programmed fields exceed the thermal window +-{window}")
    graph = device.graph
    corr = np.zeros(graph.n) if prior_corrections is None else np.asarray(prior_corrections, dtype=np.float64)
    if corr.shape != (graph.n,):
        raise ValueError("prior_corrections must have one entry per active qubit")
    base_key = _scan_stream(stream)
    probs = np.empty((len(hp_values), runs, graph.n))
    for vi, hp in enumerate(hp_values):
        h_prog = hp - corr
        inst = IsingInstance(graph, h={q: float(h_prog[p]) for p, q in enumerate(graph.active)})
        counts = sample_up_counts(
            device, inst, runs, reads_per_run,
            stream=base_key + (vi,), drift_key=hash_key(base_key),
        )
        probs[vi] = counts / reads_per_run
    return ScanData(
        kind="h",
        programmed_values=hp_values,
        targets=graph.active,
        probs=probs,
        runs=runs,
        reads_per_run=reads_per_run,
        iteration_index=iteration_index,
        correction_applied=corr,
        master_seed=device.master_seed,
        stream=base_key,
    )


def hash_key(key: tuple[int, ...]) -> int:
    """Fold a stream tuple into one stable integer (drift keying)."""
    out = 0
    for k in key:
        out = (out * 1000003 + int(k) + 7) & 0x7FFFFFFF
    return out


def run_j_scan(
    device: DeviceModel,
    jp_values,
    batches: CouplerBatches,
    runs: int,
    reads_per_run: int,
    prior_corrections: np.ndarray | None = None,
    stream: int | tuple[int, ...] = 0,
    iteration_index: int = 1,
    window: float = DEFAULT_J_WINDOW,
) -> ScanData:
    """Sweep a common programmed coupling, six disjoint batches at a time.

    Within a batch every member coupler is programmed to jp minus its
    accumulated prior correction while all other couplers and all fields
    stay at zero.  Aggregates the four pair-outcome probabilities so every
    coupler has per-run data at every programmed value.
    """
    jp_values = np.asarray(jp_values, dtype=np.float64)
    if jp_values.size == 0:
        raise ValueError("empty programmed-value list")
    if np.any(np.abs(jp_values) > window + 1e-12):
        raise ValueError(f"programmed couplings exceed the thermal window +-{window}")
    graph = device.graph
    batches.validate_partition(graph)
    m = len(graph.edges)
    corr = np.zeros(m) if prior_corrections is None else np.asarray(prior_corrections, dtype=np.float64)
    if corr.shape != (m,):
        raise ValueError("prior_corrections must have one entry per coupler")
    eidx = graph.edge_index
    base_key = _scan_stream(stream)
    probs = np.empty((len(jp_values), runs, m, 4))
    for vi, jp in enumerate(jp_values):
        for bi, batch in enumerate(batches.batches):
            if not batch:
                continue
            pairs = sorted(batch)
            cols = np.array([eidx[e] for e in pairs], dtype=np.int64)
            inst = IsingInstance(
                graph, J={e: float(jp - corr[eidx[e]]) for e in pairs}
            )
            counts = sample_pair_counts(
                device, inst, pairs, runs, reads_per_run,
                stream=base_key + (vi, bi), drift_key=hash_key(base_key),
            )
            probs[vi][:, cols, :] = counts / reads_per_run
    return ScanData(
        kind="J",
        programmed_values=jp_values,
        targets=graph.edges,
        probs=probs,
        runs=runs,
        reads_per_run=reads_per_run,
        iteration_index=iteration_index,
        correction_applied=corr,
        master_seed=device.master_seed,
        stream=base_key,
    )


# --- Fits and estimates -------------------------------------------------------


def median_alpha_matrix(scan: ScanData, estimator: str = "naive") -> np.ndarray:
    """Per-value, per-target alpha of the run-median probability, (values, targets)."""
    clamp = scan.clamp_bound
    if scan.kind == "h":
        med = np.median(scan.probs, axis=1)
        return alpha_from_prob(med, clamp=clamp)
    if estimator == "naive":
        aligned = scan.probs[..., 0] + scan.probs[..., 3]
        return alpha_ij_naive(np.median(aligned, axis=1), clamp=clamp)
    if estimator == "exact":
        med = np.median(scan.probs, axis=1)
        return alpha_ij_exact(
            med[..., 0], med[..., 1], med[..., 2], med[..., 3], clamp=clamp
        )
    raise ValueError(f"unknown estimator {estimator!r}")


def median_alpha(scan: ScanData, target, estimator: str = "naive") -> list[tuple[float, float]]:
    """(programmed value, median alpha) pairs for one qubit or coupler."""
    col = scan.target_column(target)
    matrix = median_alpha_matrix(scan, estimator)
    return [(float(x), float(a)) for x, a in zip(scan.programmed_values, matrix[:, col])]


def fit_line(points) -> tuple[float, float, float]:
    """Ordinary least squares fit; returns (slope, intercept, residual sum)."""
    pts = np.asarray(list(points), dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise ValueError("need at least two (x, y) points")
    x, y = pts[:, 0], pts[:, 1]
    if np.ptp(x) == 0:
        raise ValueError("degenerate fit: all x values identical")
    slope, intercept, ssr, _, _ = _fit_columns(x, y[:, None])
    return float(slope[0]), float(intercept[0]), float(ssr[0])


def _fit_columns(x: np.ndarray, ys: np.ndarray):
    """Vectorized OLS of each column of ys against x.

    Returns slopes, intercepts, residual sums and standard errors of both
    parameters (nan when fewer than 3 points).
    """
    v = len(x)
    xbar = x.mean()
    xc = x - xbar
    sxx = float(xc @ xc)
    slopes = (xc @ ys) / sxx
    intercepts = ys.mean(axis=0) - slopes * xbar
    resid = ys - (intercepts[None, :] + np.outer(x, slopes))
    ssr = (resid**2).sum(axis=0)
    if v > 2:
        s2 = ssr / (v - 2)
        se_slope = np.sqrt(s2 / sxx)
        se_intercept = np.sqrt(s2 * (1.0 / v + xbar**2 / sxx))
    else:
        se_slope = np.full_like(slopes, np.nan)
        se_intercept = np.full_like(slopes, np.nan)
    return slopes, intercepts, ssr, se_slope, se_intercept


@dataclass(frozen=True)
class TargetFits:
    """Per-target line fits of median alpha against the programmed value."""

    kind: str
    targets: tuple
    programmed_values: np.ndarray
    estimator: str
    slopes: np.ndarray
    intercepts: np.ndarray
    ssr: np.ndarray
    se_slope: np.ndarray
    se_intercept: np.ndarray


def fit_targets(scan: ScanData, estimator: str = "naive") -> TargetFits:
    matrix = median_alpha_matrix(scan, estimator)
    slopes, intercepts, ssr, se_s, se_i = _fit_columns(scan.programmed_values, matrix)
    return TargetFits(
        kind=scan.kind,
        targets=scan.targets,
        programmed_values=scan.programmed_values,
        estimator=estimator,
        slopes=slopes,
        intercepts=intercepts,
        ssr=ssr,
        se_slope=se_s,
        se_intercept=se_i,
    )


def estimate_device_temperature(
    scan: ScanData,
    method: str = "median",
    estimator: str = "naive",
    fits: TargetFits | None = None,
) -> float:
    """Single effective temperature for the device.

    "mean" averages the per-target fitted temperatures 1/slope (targets
    with non-positive slope are excluded and logged); "median" fits one
    line to the per-value median over targets of alpha and inverts its
    slope.
    """
    if method == "mean":
        if fits is None:
            fits = fit_targets(scan, estimator)
        good = fits.slopes > 0
        bad = int((~good).sum())
        if bad:
            logger.warning("excluding %d targets with non-positive fitted slope", bad)
        if not good.any():
            raise ValueError("no targets with positive fitted slope")
        return float((1.0 / fits.slopes[good]).mean())
    if method == "median":
        matrix = median_alpha_matrix(scan, estimator)
        curve = np.median(matrix, axis=1)
        slope, _, _ = fit_line(zip(scan.programmed_values, curve))
        if slope <= 0:
            raise ValueError("median-alpha fit has non-positive slope")
        return 1.0 / slope
    raise ValueError(f"unknown temperature method {method!r}")


def estimate_biases(
    scan: ScanData,
    temperature: float | None,
    estimator: str = "naive",
    fits: TargetFits | None = None,
) -> np.ndarray:
    """Per-target bias estimates: fitted intercept times temperature.

    Passing an explicit temperature uses the shared device value; passing
    None uses each target's own fitted temperature 1/slope (targets with
    non-positive slope come back as nan).
    """
    if fits is None:
        fits = fit_targets(scan, estimator)
    if temperature is None:
        temps = np.where(fits.slopes > 0, 1.0 / fits.slopes, np.nan)
        bad = int(np.isnan(temps).sum())
        if bad:
            logger.warning("%d targets lack a positive fitted slope; estimates are nan", bad)
        return fits.intercepts * temps
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    return fits.intercepts * temperature


def damped_correction(estimate, estimate_variance, noise_variance):
    """Variance-weighted correction step lambda * estimate.

    lambda = prior / (prior + estimate_variance) with the bias-population
    variance as prior; a perfectly certain estimate (variance 0) is applied
    in full.
    """
    est = np.asarray(estimate, dtype=np.float64)
    ev = np.broadcast_to(np.asarray(estimate_variance, dtype=np.float64), est.shape)
    nv = np.broadcast_to(np.asarray(noise_variance, dtype=np.float64), est.shape)
    if np.any(ev < 0) or np.any(nv < 0):
        raise ValueError("variances must be >= 0")
    with np.errstate(invalid="ignore", divide="ignore"):
        lam = np.where(ev == 0, 1.0, nv / (nv + ev))
    out = lam * est
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class NoiseFloorStats:
    """Run-to-run spread of single-run parameter estimates."""

    per_value_sigma: np.ndarray  # (values, targets)
    per_target_mean: np.ndarray  # (targets,)
    grand_mean: float


def noise_floor_stats(
    scan: ScanData, temperature: float, estimator: str = "naive"
) -> NoiseFloorStats:
    """Std over runs of alpha(p_run) * T, then means over values and targets."""
    if scan.runs < 2:
        raise ValueError("noise floor needs at least two runs")
    clamp = scan.clamp_bound
    if scan.kind == "h":
        per_run = alpha_from_prob(scan.probs, clamp=clamp) * temperature
    else:
        aligned = scan.probs[..., 0] + scan.probs[..., 3]
        per_run = alpha_ij_naive(aligned, clamp=clamp) * temperature
    sigma = per_run.std(axis=1, ddof=1)
    per_target = sigma.mean(axis=0)
    return NoiseFloorStats(sigma, per_target, float(per_target.mean()))


def persistence_correlation(table_a: "CalibrationTable", table_b: "CalibrationTable", kind: str = "h") -> float:
    """Pearson correlation of two experiments' bias estimates."""
    ta = table_a.targets(kind)
    tb = table_b.targets(kind)
    if ta != tb:
        raise ValueError("calibration tables cover different target sets")
    a = table_a.bias_estimate(kind)
    b = table_b.bias_estimate(kind)
    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt((a @ a) * (b @ b))
    if denom == 0:
        raise ValueError("zero-variance bias vector")
    return float((a @ b) / denom)


# --- Iteration history ---------------------------------------------------------


@dataclass(frozen=True)
class IterationRecord:
    kind: str
    iteration: int
    estimator: str
    slopes: np.ndarray
    intercepts: np.ndarray
    se_intercept: np.ndarray
    temperature_mean: float
    temperature_median: float
    temperature_used: float
    bias_estimates: np.ndarray
    correction_step: np.ndarray
    correction_before: np.ndarray
    noise_floor: float
    damping_lambda: np.ndarray | None = None

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "iteration": self.iteration,
            "estimator": self.estimator,
            "slopes": self.slopes.tolist(),
            "intercepts": self.intercepts.tolist(),
            "se_intercept": self.se_intercept.tolist(),
            "temperature_mean": self.temperature_mean,
            "temperature_median": self.temperature_median,
            "temperature_used": self.temperature_used,
            "bias_estimates": self.bias_estimates.tolist(),
            "correction_step": self.correction_step.tolist(),
            "correction_before": self.correction_before.tolist(),
            "noise_floor": self.noise_floor,
            "damping_lambda": None if self.damping_lambda is None else self.damping_lambda.tolist(),
        }
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "IterationRecord":
        lam = data.get("damping_lambda")
        return cls(
            kind=data["kind"],
            iteration=int(data["iteration"]),
            estimator=data["estimator"],
            slopes=np.array(data["slopes"]),
            intercepts=np.array(data["intercepts"]),
            se_intercept=np.array(data["se_intercept"]),
            temperature_mean=float(data["temperature_mean"]),
            temperature_median=float(data["temperature_median"]),
            temperature_used=float(data["temperature_used"]),
            bias_estimates=np.array(data["bias_estimates"]),
            correction_step=np.array(data["correction_step"]),
            correction_before=np.array(data["correction_before"]),
            noise_floor=float(data["noise_floor"]),
            damping_lambda=None if lam is None else np.array(lam),
        )


@dataclass
class CalibrationTable:
    """Full history of an h/J calibration on one device."""

    graph_config: dict
    h_targets: tuple[int, ...]
    j_targets: tuple[tuple[int, int], ...]
    master_seed: int = 0
    temperature_method: str = "median"
    h_iterations: list[IterationRecord] = field(default_factory=list)
    j_iterations: list[IterationRecord] = field(default_factory=list)

    def _records(self, kind: str) -> list[IterationRecord]:
        if kind == "h":
            return self.h_iterations
        if kind == "J":
            return self.j_iterations
        raise ValueError(f"unknown kind {kind!r}")

    def targets(self, kind: str):
        return self.h_targets if kind == "h" else self.j_targets

    def total_correction(self, kind: str) -> np.ndarray:
        """Accumulated applied correction, to subtract from desired values."""
        recs = self._records(kind)
        size = len(self.targets(kind))
        out = np.zeros(size)
        for rec in recs:
            out = out + rec.correction_step
        return out

    def bias_estimate(self, kind: str) -> np.ndarray:
        """Best estimate of the persistent bias after all iterations."""
        recs = self._records(kind)
        if not recs:
            return np.zeros(len(self.targets(kind)))
        total = np.zeros(len(self.targets(kind)))
        for rec in recs[:-1]:
            total = total + rec.correction_step
        return total + np.nan_to_num(recs[-1].bias_estimates)

    def to_dict(self) -> dict:
        return {
            "graph": self.graph_config,
            "h_targets": list(self.h_targets),
            "j_targets": [list(e) for e in self.j_targets],
            "master_seed": self.master_seed,
            "temperature_method": self.temperature_method,
            "h_iterations": [r.to_dict() for r in self.h_iterations],
            "j_iterations": [r.to_dict() for r in self.j_iterations],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CalibrationTable":
        return cls(
            graph_config=data["graph"],
            h_targets=tuple(int(q) for q in data["h_targets"]),
            j_targets=tuple((int(i), int(j)) for i, j in data["j_targets"]),
            master_seed=int(data.get("master_seed", 0)),
            temperature_method=data.get("temperature_method", "median"),
            h_iterations=[IterationRecord.from_dict(d) for d in data.get("h_iterations", [])],
            j_iterations=[IterationRecord.from_dict(d) for d in data.get("j_iterations", [])],
        )

    @classmethod
    def empty(cls, graph: CouplingGraph, master_seed: int = 0, temperature_method: str = "median") -> "CalibrationTable":
        return cls(
            graph_config=graph_to_dict(graph),
            h_targets=graph.active,
            j_targets=graph.edges,
            master_seed=master_seed,
            temperature_method=temperature_method,
        )


def iterate_correction(table: CalibrationTable, desired, kind: str = "h") -> np.ndarray:
    """Programmed values realizing ``desired`` after the table's corrections."""
    size = len(table.targets(kind))
    desired = np.broadcast_to(np.asarray(desired, dtype=np.float64), (size,))
    return desired - table.total_correction(kind)


# --- Calibration loops ----------------------------------------------------------


@dataclass(frozen=True)
class ProtocolConfig:
    """Scan windows, sampling effort and estimator choices for a calibration."""

    h_window: float = DEFAULT_H_WINDOW
    h_points: int = DEFAULT_H_POINTS
    j_window: float = DEFAULT_J_WINDOW
    j_points: int = DEFAULT_J_POINTS
    runs: int = 100
    reads_per_run: int = 1000
    h_iterations: int = 2
    j_iterations: int = 3
    estimator: str = "exact"
    temperature_method: str = "median"
    damp_h: bool = False
    damp_j: bool = True
    per_qubit_temperature: bool = False
    stop_factor: float = 1.5
    schedule: str = "sequential"

    def __post_init__(self) -> None:
        if self.h_points < 2 or self.j_points < 2:
            raise ValueError("scans need at least two programmed values")
        if self.runs < 1 or self.reads_per_run < 1:
            raise ValueError("runs and reads_per_run must be >= 1")
        if self.estimator not in ("naive", "exact"):
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.temperature_method not in ("median", "mean"):
            raise ValueError(f"unknown temperature method {self.temperature_method!r}")
        if self.schedule not in ("sequential", "alternating"):
            raise ValueError(f"unknown schedule {self.schedule!r}")

    def grid(self, kind: str) -> np.ndarray:
        if kind == "h":
            return np.linspace(-self.h_window, self.h_window, self.h_points)
        return np.linspace(-self.j_window, self.j_window, self.j_points)


@dataclass
class CalibrationResult:
    table: CalibrationTable
    h_scans: list[ScanData] = field(default_factory=list)
    j_scans: list[ScanData] = field(default_factory=list)


def _run_iteration(
    device: DeviceModel,
    config: ProtocolConfig,
    table: CalibrationTable,
    kind: str,
    iteration: int,
    stream: int | tuple[int, ...],
    batches: CouplerBatches | None,
) -> tuple[IterationRecord, ScanData]:
    prior = table.total_correction(kind)
    key = _scan_stream(stream, 0 if kind == "h" else 1, iteration)
    if kind == "h":
        scan = run_h_scan(
            device, config.grid("h"), config.runs, config.reads_per_run,
            prior_corrections=prior, stream=key, iteration_index=iteration,
            window=config.h_window,
        )
        estimator = "field"
        fits = fit_targets(scan)
    else:
        scan = run_j_scan(
            device, config.grid("J"), batches, config.runs, config.reads_per_run,
            prior_corrections=prior, stream=key, iteration_index=iteration,
            window=config.j_window,
        )
        estimator = config.estimator
        fits = fit_targets(scan, estimator)
    t_mean = estimate_device_temperature(scan, "mean", fits=fits)
    t_median = estimate_device_temperature(
        scan, "median", estimator=estimator if kind == "J" else "naive"
    )
    t_used = t_median if config.temperature_method == "median" else t_mean
    per_qubit = config.per_qubit_temperature and kind == "h"
    raw = estimate_biases(scan, None if per_qubit else t_used, fits=fits)
    raw_filled = np.nan_to_num(raw)
    est_var = (fits.se_intercept * t_used) ** 2
    est_var = np.nan_to_num(est_var)
    damp = config.damp_h if kind == "h" else config.damp_j
    lam = None
    if damp:
        prior_var = max(float(raw_filled.var()) - float(est_var.mean()), 0.0)
        step = damped_correction(raw_filled, est_var, prior_var)
        with np.errstate(invalid="ignore", divide="ignore"):
            lam = np.where(raw_filled != 0, step / np.where(raw_filled == 0, 1.0, raw_filled), 1.0)
    else:
        step = raw_filled
    noise_floor = float(np.nanmean(fits.se_intercept) * t_used)
    record = IterationRecord(
        kind=kind,
        iteration=iteration,
        estimator=estimator,
        slopes=fits.slopes,
        intercepts=fits.intercepts,
        se_intercept=fits.se_intercept,
        temperature_mean=t_mean,
        temperature_median=t_median,
        temperature_used=t_used,
        bias_estimates=raw,
        correction_step=step,
        correction_before=prior,
        noise_floor=noise_floor,
        damping_lambda=lam,
    )
    return record, scan


def run_calibration(
    device: DeviceModel,
    config: ProtocolConfig,
    stream: int | tuple[int, ...] = 0,
    calibrate_h: bool = True,
    calibrate_j: bool = True,
) -> CalibrationResult:
    """Run the configured h and J iterations against a device.

    The sequential schedule runs every h iteration before the first J
    iteration; the alternating schedule interleaves them.  Iterations stop
    early once the spread of fresh bias estimates drops below
    ``stop_factor`` times the predicted estimate noise.
    """
    table = CalibrationTable.empty(
        device.graph, master_seed=device.master_seed,
        temperature_method=config.temperature_method,
    )
    result = CalibrationResult(table=table)
    batches = edge_batches(device.graph) if calibrate_j else None
    plan: list[tuple[str, int]] = []
    if config.schedule == "sequential":
        if calibrate_h:
            plan += [("h", k) for k in range(1, config.h_iterations + 1)]
        if calibrate_j:
            plan += [("J", k) for k in range(1, config.j_iterations + 1)]
    else:
        for k in range(1, max(config.h_iterations, config.j_iterations) + 1):
            if calibrate_h and k <= config.h_iterations:
                plan.append(("h", k))
            if calibrate_j and k <= config.j_iterations:
                plan.append(("J", k))
    done: set[str] = set()
    for kind, k in plan:
        if kind in done:
            continue
        record, scan = _run_iteration(device, config, table, kind, k, stream, batches)
        if kind == "h":
            table.h_iterations.append(record)
            result.h_scans.append(scan)
        else:
            table.j_iterations.append(record)
            result.j_scans.append(scan)
        spread = float(np.nanstd(record.bias_estimates))
        if spread < config.stop_factor * record.noise_floor:
            done.add(kind)
            logger.info(
                "%s calibration converged after iteration %d (spread %.3g, floor %.3g)",
                kind, k, spread, record.noise_floor,
            )
    return result
