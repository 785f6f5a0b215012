"""Software stand-in for a thermal-regime quantum annealer.

The device programs an Ising instance and returns spin samples drawn from
a Boltzmann distribution at the device temperature.  The effective value
of each programmed parameter differs from the requested one:

    h_eff_i  = quantize(h_prog_i)  + h_bias_i + drift_i + delta_i
    J_eff_ij = quantize(J_prog_ij) + j_bias_ij + drift_ij + delta_ij

where the bias terms are persistent, the drift terms are redrawn per
experiment (keyed draws, zero by default), and the delta terms are
Gaussian deviations redrawn once per run (optionally per read).
Quantization models the finite DAC resolution.

Sampling targets the measure exp(-sum_i h_i s_i / T_i - sum J_ij s_i s_j / T_ij),
which reduces to the ordinary Boltzmann distribution when all temperatures
are equal.  Instances that decompose into connected components of at most
two qubits are sampled exactly; anything larger falls back to seeded
Metropolis sweeps.  The ``scope`` argument controls which couplings count
as structural: "programmed" keeps only couplers with a nonzero programmed
value (bias and noise on the rest are neglected, which is what makes the
one- and two-qubit calibration experiments exactly decomposable), while
"effective" keeps every coupling that can be nonzero.

All sampling is deterministic given ``master_seed`` and the call arguments;
independent experiments should pass distinct ``stream`` values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .chimera import CouplingGraph, graph_from_dict, graph_to_dict
from .ising import IsingInstance, check_user_ranges, instance_hash
from .metropolis import McConfig, metropolis_sample

# Stream-domain tags keep the RNG streams of unrelated draws disjoint.
_DOMAIN_RUN_NOISE = 11
_DOMAIN_DRIFT = 12
_DOMAIN_OUTCOME = 13
_DOMAIN_KERNEL = 14

DEFAULT_H_BIAS_SD = 0.05
DEFAULT_J_BIAS_SD = 0.035
DEFAULT_DAC_STEP = 0.025


def _flat_key(key) -> tuple[int, ...]:
    """Flatten nested int/tuple stream keys into a tuple of ints."""
    out: list[int] = []
    for part in key:
        if isinstance(part, (tuple, list)):
            out.extend(_flat_key(part))
        else:
            out.append(int(part))
    return tuple(out)


def quantize_dac(value, step: float):
    """Round to the nearest multiple of ``step`` (ties toward +inf); 0 disables."""
    if step < 0:
        raise ValueError("DAC step must be >= 0")
    if step == 0:
        return value
    return np.floor(np.asarray(value) / step + 0.5) * step


@dataclass(frozen=True)
class DeviceModel:
    """Ground truth for a simulated annealer.

    Bias and temperature arrays are aligned with ``graph.active`` and
    ``graph.edges``.  ``saturation_alpha`` optionally compresses large
    parameter-to-temperature ratios (alpha -> lam * tanh(alpha / lam)) to
    imitate the breakdown of the thermal model away from zero; it only
    affects the exact sampling paths.
    """

    graph: CouplingGraph
    h_bias: np.ndarray
    j_bias: np.ndarray
    qubit_temp: np.ndarray
    edge_temp: np.ndarray
    run_noise_sd_h: float = 0.0
    run_noise_sd_j: float = 0.0
    drift_sd_h: float = 0.0
    drift_sd_j: float = 0.0
    dac_step: float = 0.0
    per_read_noise: bool = False
    saturation_alpha: float | None = None
    master_seed: int = 0

    def __post_init__(self) -> None:
        n, m = self.graph.n, len(self.graph.edges)
        for name, arr, size in (
            ("h_bias", self.h_bias, n),
            ("j_bias", self.j_bias, m),
            ("qubit_temp", self.qubit_temp, n),
            ("edge_temp", self.edge_temp, m),
        ):
            arr = np.ascontiguousarray(np.asarray(arr, dtype=np.float64))
            if arr.shape != (size,):
                raise ValueError(f"{name} must have shape ({size},)")
            object.__setattr__(self, name, arr)
        if (self.qubit_temp <= 0).any() or (m and (self.edge_temp <= 0).any()):
            raise ValueError("all temperatures must be positive")
        for name in ("run_noise_sd_h", "run_noise_sd_j", "drift_sd_h", "drift_sd_j"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.dac_step < 0:
            raise ValueError("dac_step must be >= 0")

    @property
    def temperature(self) -> float:
        """Mean device temperature over qubits."""
        return float(self.qubit_temp.mean())

    def _rng(self, *key) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(entropy=(int(self.master_seed),) + _flat_key(key))
        )

    def drift_vectors(self, drift_key: int) -> tuple[np.ndarray, np.ndarray]:
        """Experiment-level common parameter drift, deterministic per (seed, key).

        One draw per parameter kind per experiment shifts every qubit (edge)
        coherently, modeling slow device-state wander between experiments.
        """
        n, m = self.graph.n, len(self.graph.edges)
        dh = np.zeros(n)
        dj = np.zeros(m)
        if self.drift_sd_h > 0:
            dh += self._rng(_DOMAIN_DRIFT, drift_key, 0).normal(0.0, self.drift_sd_h)
        if self.drift_sd_j > 0:
            dj += self._rng(_DOMAIN_DRIFT, drift_key, 1).normal(0.0, self.drift_sd_j)
        return dh, dj


def make_device(
    graph: CouplingGraph,
    temperature: float = 0.25,
    h_bias: np.ndarray | None = None,
    j_bias: np.ndarray | None = None,
    **kwargs,
) -> DeviceModel:
    """DeviceModel with uniform temperature and explicit (default zero) biases."""
    n, m = graph.n, len(graph.edges)
    return DeviceModel(
        graph=graph,
        h_bias=np.zeros(n) if h_bias is None else np.asarray(h_bias, dtype=float),
        j_bias=np.zeros(m) if j_bias is None else np.asarray(j_bias, dtype=float),
        qubit_temp=np.full(n, float(temperature)),
        edge_temp=np.full(m, float(temperature)),
        **kwargs,
    )


def synthesize_device(
    graph: CouplingGraph,
    seed: int,
    temperature: float = 0.25,
    h_bias_sd: float = DEFAULT_H_BIAS_SD,
    j_bias_sd: float = DEFAULT_J_BIAS_SD,
    run_noise_sd_h: float = 0.015,
    run_noise_sd_j: float = 0.01,
    drift_sd_h: float = 0.0,
    drift_sd_j: float = 0.0,
    dac_step: float = DEFAULT_DAC_STEP,
    qubit_temp_sd: float = 0.0,
    per_read_noise: bool = False,
    saturation_alpha: float | None = None,
) -> DeviceModel:
    """Draw a synthetic device with Gaussian persistent biases.

    ``qubit_temp_sd`` adds relative spread to the per-qubit temperatures;
    edge temperatures stay at the nominal value.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(int(seed), 900)))
    n, m = graph.n, len(graph.edges)
    h_bias = rng.normal(0.0, h_bias_sd, n) if h_bias_sd > 0 else np.zeros(n)
    j_bias = rng.normal(0.0, j_bias_sd, m) if j_bias_sd > 0 else np.zeros(m)
    qubit_temp = np.full(n, temperature)
    if qubit_temp_sd > 0:
        qubit_temp = temperature * np.clip(rng.normal(1.0, qubit_temp_sd, n), 0.2, None)
    return DeviceModel(
        graph=graph,
        h_bias=h_bias,
        j_bias=j_bias,
        qubit_temp=qubit_temp,
        edge_temp=np.full(m, temperature),
        run_noise_sd_h=run_noise_sd_h,
        run_noise_sd_j=run_noise_sd_j,
        drift_sd_h=drift_sd_h,
        drift_sd_j=drift_sd_j,
        dac_step=dac_step,
        per_read_noise=per_read_noise,
        saturation_alpha=saturation_alpha,
        master_seed=int(seed),
    )


def _saturate(theta: np.ndarray, lam: float | None) -> np.ndarray:
    if lam is None:
        return theta
    return lam * np.tanh(theta / lam)


def _program_vectors(model: DeviceModel, programmed: IsingInstance):
    if programmed.graph is not model.graph and programmed.graph != model.graph:
        raise ValueError("programmed instance does not live on the device graph")
    check_user_ranges(programmed)
    return programmed.h_vector, programmed.j_vector


def effective_instance(
    model: DeviceModel,
    programmed: IsingInstance,
    run_seed: int = 0,
    drift_key: int = 0,
) -> IsingInstance:
    """One run's effective parameters on every active qubit and edge."""
    h_prog, j_prog = _program_vectors(model, programmed)
    dh, dj = model.drift_vectors(drift_key)
    rng = model._rng(_DOMAIN_RUN_NOISE, run_seed)
    n, m = model.graph.n, len(model.graph.edges)
    delta_h = rng.normal(0.0, model.run_noise_sd_h, n) if model.run_noise_sd_h > 0 else 0.0
    delta_j = rng.normal(0.0, model.run_noise_sd_j, m) if model.run_noise_sd_j > 0 else 0.0
    h_eff = quantize_dac(h_prog, model.dac_step) + model.h_bias + dh + delta_h
    j_eff = quantize_dac(j_prog, model.dac_step) + model.j_bias + dj + delta_j
    h = {q: float(h_eff[p]) for p, q in enumerate(model.graph.active)}
    J = {e: float(j_eff[p]) for p, e in enumerate(model.graph.edges)}
    return IsingInstance(model.graph, h, J)


def sample_up_counts(
    model: DeviceModel,
    programmed: IsingInstance,
    runs: int,
    reads_per_run: int,
    stream: int = 0,
    drift_key: int = 0,
) -> np.ndarray:
    """Exact field-only sampling: spin-up counts, shape (runs, n).

    Requires every programmed coupling to be zero; coupler biases are
    neglected (programmed scope), so qubits are independent.
    """
    if runs < 1 or reads_per_run < 1:
        raise ValueError("runs and reads_per_run must be >= 1")
    h_prog, j_prog = _program_vectors(model, programmed)
    if np.any(j_prog != 0):
        raise ValueError("field-only sampling requires all programmed couplings = 0")
    dh, _ = model.drift_vectors(drift_key)
    base = quantize_dac(h_prog, model.dac_step) + model.h_bias + dh
    noise_rng = model._rng(_DOMAIN_RUN_NOISE, stream)
    outcome_rng = model._rng(_DOMAIN_OUTCOME, stream)
    n = model.graph.n
    if model.per_read_noise:
        counts = np.empty((runs, n), dtype=np.int64)
        for r in range(runs):
            delta = noise_rng.normal(0.0, model.run_noise_sd_h, (reads_per_run, n))
            theta = _saturate((base + delta) / model.qubit_temp, model.saturation_alpha)
            p_up = 1.0 / (1.0 + np.exp(2.0 * theta))
            counts[r] = (outcome_rng.random((reads_per_run, n)) < p_up).sum(axis=0)
        return counts
    delta = (
        noise_rng.normal(0.0, model.run_noise_sd_h, (runs, n))
        if model.run_noise_sd_h > 0
        else np.zeros((runs, n))
    )
    theta = _saturate((base + delta) / model.qubit_temp, model.saturation_alpha)
    p_up = 1.0 / (1.0 + np.exp(2.0 * theta))
    return outcome_rng.binomial(reads_per_run, p_up)


# Pair outcomes are indexed [uu, ud, du, dd], first symbol = lower qubit index.
PAIR_OUTCOMES = ("uu", "ud", "du", "dd")
_PAIR_SIGNS = np.array(
    [
        [+1.0, +1.0, +1.0],  # uu: s_i, s_j, s_i s_j
        [+1.0, -1.0, -1.0],  # ud
        [-1.0, +1.0, -1.0],  # du
        [-1.0, -1.0, +1.0],  # dd
    ]
)


def _pair_probs(theta_i, theta_j, theta_ij) -> np.ndarray:
    """Four-outcome probabilities, broadcasting over leading axes."""
    loge = -(
        _PAIR_SIGNS[:, 0] * theta_i[..., None]
        + _PAIR_SIGNS[:, 1] * theta_j[..., None]
        + _PAIR_SIGNS[:, 2] * theta_ij[..., None]
    )
    loge -= loge.max(axis=-1, keepdims=True)
    w = np.exp(loge)
    return w / w.sum(axis=-1, keepdims=True)


def sample_pair_counts(
    model: DeviceModel,
    programmed: IsingInstance,
    pairs: Iterable[tuple[int, int]],
    runs: int,
    reads_per_run: int,
    stream: int = 0,
    drift_key: int = 0,
) -> np.ndarray:
    """Exact matched-pair sampling: outcome counts, shape (runs, n_pairs, 4).

    ``pairs`` must be a matching of graph edges covering every programmed
    coupling; couplings outside the matching are neglected (programmed scope).
    """
    if runs < 1 or reads_per_run < 1:
        raise ValueError("runs and reads_per_run must be >= 1")
    pairs = [tuple(p) for p in pairs]
    h_prog, j_prog = _program_vectors(model, programmed)
    eidx = model.graph.edge_index
    qidx = model.graph.index_of
    touched: set[int] = set()
    for i, j in pairs:
        if (i, j) not in eidx:
            raise ValueError(f"pair {(i, j)} is not an edge of the topology")
        if i in touched or j in touched:
            raise ValueError("pairs must form a matching")
        touched.update((i, j))
    programmed_edges = {e for e, v in programmed.J.items() if v != 0}
    if not programmed_edges <= set(pairs):
        raise ValueError("programmed couplings outside the sampled matching")

    epos = np.array([eidx[p] for p in pairs], dtype=np.int64)
    ipos = np.array([qidx[i] for i, _ in pairs], dtype=np.int64)
    jpos = np.array([qidx[j] for _, j in pairs], dtype=np.int64)
    dh, dj = model.drift_vectors(drift_key)
    base_h = quantize_dac(h_prog, model.dac_step) + model.h_bias + dh
    base_j = (quantize_dac(j_prog, model.dac_step) + model.j_bias + dj)[epos]

    noise_rng = model._rng(_DOMAIN_RUN_NOISE, stream)
    outcome_rng = model._rng(_DOMAIN_OUTCOME, stream)
    n_pairs = len(pairs)

    def theta_for(delta_hi, delta_hj, delta_j):
        ti = _saturate(
            (base_h[ipos] + delta_hi) / model.qubit_temp[ipos], model.saturation_alpha
        )
        tj = _saturate(
            (base_h[jpos] + delta_hj) / model.qubit_temp[jpos], model.saturation_alpha
        )
        tij = _saturate((base_j + delta_j) / model.edge_temp[epos], model.saturation_alpha)
        return ti, tj, tij

    if model.per_read_noise:
        counts = np.zeros((runs, n_pairs, 4), dtype=np.int64)
        for r in range(runs):
            shape = (reads_per_run, n_pairs)
            dhi = noise_rng.normal(0.0, model.run_noise_sd_h, shape)
            dhj = noise_rng.normal(0.0, model.run_noise_sd_h, shape)
            djr = noise_rng.normal(0.0, model.run_noise_sd_j, shape)
            probs = _pair_probs(*theta_for(dhi, dhj, djr))
            u = outcome_rng.random(shape)
            outcome = (u[..., None] > probs.cumsum(axis=-1)).sum(axis=-1)
            for o in range(4):
                counts[r, :, o] = (outcome == o).sum(axis=0)
        return counts

    shape = (runs, n_pairs)
    dhi = noise_rng.normal(0.0, model.run_noise_sd_h, shape) if model.run_noise_sd_h > 0 else np.zeros(shape)
    dhj = noise_rng.normal(0.0, model.run_noise_sd_h, shape) if model.run_noise_sd_h > 0 else np.zeros(shape)
    djr = noise_rng.normal(0.0, model.run_noise_sd_j, shape) if model.run_noise_sd_j > 0 else np.zeros(shape)
    probs = _pair_probs(*theta_for(dhi, dhj, djr))
    return outcome_rng.multinomial(reads_per_run, probs)


@dataclass(frozen=True)
class SampleSet:
    """One run's reads, in active-qubit order."""

    run_id: int
    instance_id: str
    reads: np.ndarray
    programmed: IsingInstance = field(repr=False)

    def __post_init__(self) -> None:
        reads = np.asarray(self.reads, dtype=np.int8)
        if reads.ndim != 2 or reads.shape[1] != self.programmed.n:
            raise ValueError("reads must have shape (reads, n)")
        object.__setattr__(self, "reads", reads)


def _components(n: int, edge_pos: np.ndarray) -> list[np.ndarray]:
    parent = np.arange(n)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in edge_pos:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra
    groups: dict[int, list[int]] = {}
    for v in range(n):
        groups.setdefault(find(v), []).append(v)
    return [np.array(g) for g in groups.values()]


def sample(
    model: DeviceModel,
    programmed: IsingInstance,
    runs: int,
    reads_per_run: int,
    stream: int = 0,
    drift_key: int = 0,
    scope: str = "effective",
    method: str = "auto",
    mc: McConfig | None = None,
) -> list[SampleSet]:
    """Draw ``runs`` sample sets of ``reads_per_run`` configurations each.

    The effective instance is drawn once per run.  Exact sampling is used
    when the structural graph decomposes into components of at most two
    qubits, otherwise Metropolis sweeps (see module docstring for scope).
    """
    if runs < 1 or reads_per_run < 1:
        raise ValueError("runs and reads_per_run must be >= 1")
    if scope not in ("effective", "programmed"):
        raise ValueError(f"unknown scope {scope!r}")
    if method not in ("auto", "exact", "metropolis"):
        raise ValueError(f"unknown method {method!r}")
    h_prog, j_prog = _program_vectors(model, programmed)
    dh, dj = model.drift_vectors(drift_key)
    base_h = quantize_dac(h_prog, model.dac_step) + model.h_bias + dh
    base_j = quantize_dac(j_prog, model.dac_step) + model.j_bias + dj

    n, m = model.graph.n, len(model.graph.edges)
    all_edge_pos = programmed.edge_positions if m else np.zeros((0, 2), dtype=np.int64)
    if scope == "programmed":
        struct = j_prog != 0
        base_j = np.where(struct, base_j, 0.0)
        noisy_j = struct
    else:
        struct = (base_j != 0) | (model.run_noise_sd_j > 0)
        noisy_j = np.ones(m, dtype=bool) if model.run_noise_sd_j > 0 else struct
    struct_pos = all_edge_pos[struct]
    struct_idx = np.flatnonzero(struct)

    comps = _components(n, struct_pos)
    decomposable = all(len(c) <= 2 for c in comps)
    if method == "exact" and not decomposable:
        raise ValueError("exact sampling requires components of at most 2 qubits")
    use_exact = decomposable if method == "auto" else method == "exact"

    inst_id = instance_hash(programmed)
    noise_rng = model._rng(_DOMAIN_RUN_NOISE, stream)
    outcome_rng = model._rng(_DOMAIN_OUTCOME, stream)
    kernel_seeds = np.random.SeedSequence(
        entropy=(int(model.master_seed), _DOMAIN_KERNEL) + _flat_key((stream,))
    ).generate_state(runs, dtype=np.uint64)

    singles = np.array([c[0] for c in comps if len(c) == 1], dtype=np.int64)
    pair_cells = [c for c in comps if len(c) == 2]
    # map each 2-qubit component to its structural edge index
    pair_edge: list[int] = []
    if pair_cells:
        lookup = {tuple(sorted(p)): e for p, e in zip(struct_pos.tolist(), struct_idx.tolist())}
        pair_edge = [lookup[tuple(sorted(c.tolist()))] for c in pair_cells]

    out: list[SampleSet] = []
    for run in range(runs):
        delta_h = noise_rng.normal(0.0, model.run_noise_sd_h, n) if model.run_noise_sd_h > 0 else 0.0
        delta_j = np.zeros(m)
        if model.run_noise_sd_j > 0:
            draw = noise_rng.normal(0.0, model.run_noise_sd_j, m)
            delta_j = np.where(noisy_j, draw, 0.0)
        h_eff = base_h + delta_h
        j_eff = base_j + delta_j
        if use_exact:
            reads = np.empty((reads_per_run, n), dtype=np.int8)
            if len(singles):
                theta = _saturate(
                    h_eff[singles] / model.qubit_temp[singles], model.saturation_alpha
                )
                p_up = 1.0 / (1.0 + np.exp(2.0 * theta))
                ups = outcome_rng.random((reads_per_run, len(singles))) < p_up
                reads[:, singles] = np.where(ups, 1, -1).astype(np.int8)
            for cell, epos in zip(pair_cells, pair_edge):
                i, j = sorted(cell.tolist())
                ti = _saturate(h_eff[i] / model.qubit_temp[i], model.saturation_alpha)
                tj = _saturate(h_eff[j] / model.qubit_temp[j], model.saturation_alpha)
                tij = _saturate(j_eff[epos] / model.edge_temp[epos], model.saturation_alpha)
                probs = _pair_probs(np.array(ti), np.array(tj), np.array(tij))
                u = outcome_rng.random(reads_per_run)
                outcome = np.searchsorted(np.cumsum(probs), u)
                reads[:, i] = np.where(outcome < 2, 1, -1).astype(np.int8)
                reads[:, j] = np.where(outcome % 2 == 0, 1, -1).astype(np.int8)
        else:
            theta_h = h_eff / model.qubit_temp
            theta_j = j_eff[struct] / model.edge_temp[struct]
            reads = metropolis_sample(
                theta_h,
                struct_pos,
                theta_j,
                reads_per_run,
                int(kernel_seeds[run]),
                mc or McConfig(),
            )
        out.append(SampleSet(run, inst_id, reads, programmed))
    return out


# --- Persistence ------------------------------------------------------------


def device_to_dict(model: DeviceModel) -> dict:
    active = model.graph.active
    edges = model.graph.edges
    return {
        "graph": graph_to_dict(model.graph),
        "h_bias": {str(q): float(v) for q, v in zip(active, model.h_bias)},
        "j_bias": {f"{i},{j}": float(v) for (i, j), v in zip(edges, model.j_bias)},
        "qubit_temp": {str(q): float(v) for q, v in zip(active, model.qubit_temp)},
        "edge_temp": {f"{i},{j}": float(v) for (i, j), v in zip(edges, model.edge_temp)},
        "run_noise_sd_h": model.run_noise_sd_h,
        "run_noise_sd_j": model.run_noise_sd_j,
        "drift_sd_h": model.drift_sd_h,
        "drift_sd_j": model.drift_sd_j,
        "dac_step": model.dac_step,
        "per_read_noise": model.per_read_noise,
        "saturation_alpha": model.saturation_alpha,
        "master_seed": model.master_seed,
    }


def device_from_dict(data: dict) -> DeviceModel:
    graph = graph_from_dict(data["graph"])
    active = graph.active
    edges = graph.edges
    return DeviceModel(
        graph=graph,
        h_bias=np.array([data["h_bias"][str(q)] for q in active]),
        j_bias=np.array([data["j_bias"][f"{i},{j}"] for i, j in edges]),
        qubit_temp=np.array([data["qubit_temp"][str(q)] for q in active]),
        edge_temp=np.array([data["edge_temp"][f"{i},{j}"] for i, j in edges]),
        run_noise_sd_h=float(data.get("run_noise_sd_h", 0.0)),
        run_noise_sd_j=float(data.get("run_noise_sd_j", 0.0)),
        drift_sd_h=float(data.get("drift_sd_h", 0.0)),
        drift_sd_j=float(data.get("drift_sd_j", 0.0)),
        dac_step=float(data.get("dac_step", 0.0)),
        per_read_noise=bool(data.get("per_read_noise", False)),
        saturation_alpha=data.get("saturation_alpha"),
        master_seed=int(data.get("master_seed", 0)),
    )


def sampleset_to_csv_rows(samples: Iterable[SampleSet]):
    """Rows of (run_id, read_id, spin string) for CSV export."""
    for ss in samples:
        for read_id, row in enumerate(ss.reads):
            yield ss.run_id, read_id, "".join("+" if s > 0 else "-" for s in row)


def samplesets_to_counts(samples: Iterable[SampleSet]) -> dict:
    """Compact count format: per run, state-code -> count (needs n <= 20)."""
    runs = {}
    for ss in samples:
        n = ss.reads.shape[1]
        if n > 20:
            raise ValueError("count format limited to n <= 20")
        bits = (ss.reads < 0).astype(np.uint32)
        codes = bits @ (np.uint32(1) << np.arange(n, dtype=np.uint32))
        values, counts = np.unique(codes, return_counts=True)
        runs[ss.run_id] = (values, counts)
    return runs


def save_counts_npz(path, samples: Iterable[SampleSet]) -> None:
    runs = samplesets_to_counts(samples)
    arrays = {}
    for run_id, (values, counts) in runs.items():
        arrays[f"states_{run_id}"] = values
        arrays[f"counts_{run_id}"] = counts
    np.savez_compressed(path, **arrays)
