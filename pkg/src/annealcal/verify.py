"""Self-contained oracle suite backing the ``verify`` command.

Each check recomputes a quantity through an independent route (hand-rolled
closed forms, Gray-code enumeration, per-term python sums) and compares it
with the library's vectorized implementation.  Checks are deliberately
small so the whole suite runs in seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import calibrate as cal
from .chimera import build_chimera, edge_batches, random_range_instance
from .device import make_device, quantize_dac, sample, sample_pair_counts, synthesize_device
from .ising import (
    IsingInstance,
    apply_gauge,
    boltzmann_probs,
    brute_force_spectrum,
    energy,
    state_spins,
    ungauge_sample,
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _random_instance(graph, rng, h_scale=0.5, j_scale=0.5) -> IsingInstance:
    h = {q: float(rng.uniform(-h_scale, h_scale)) for q in graph.active}
    J = {e: float(rng.uniform(-j_scale, j_scale)) for e in graph.edges}
    return IsingInstance(graph, h, J)


def _term_energy(inst: IsingInstance, spins) -> float:
    idx = inst.graph.index_of
    total = 0.0
    for q, v in inst.h.items():
        total += v * spins[idx[q]]
    for (i, j), v in inst.J.items():
        total += v * spins[idx[i]] * spins[idx[j]]
    return total


def check_energy_term_sum() -> CheckResult:
    rng = np.random.default_rng(101)
    graph = build_chimera(1, 1, 4)
    inst = _random_instance(graph, rng)
    worst = 0.0
    for _ in range(50):
        spins = rng.choice([-1, 1], size=graph.n)
        worst = max(worst, abs(energy(inst, spins) - _term_energy(inst, spins)))
    ok = worst < 1e-12
    return CheckResult("energy_term_sum", ok, f"max |diff| = {worst:.2e}")


def check_gauge_invariance() -> CheckResult:
    rng = np.random.default_rng(102)
    graph = build_chimera(1, 1, 3)  # 6 qubits, exhaustive
    inst = _random_instance(graph, rng)
    spins = state_spins(graph.n)
    worst = 0.0
    for _ in range(5):
        g = rng.choice([-1, 1], size=graph.n)
        gauged = apply_gauge(inst, g)
        for s in spins:
            worst = max(
                worst, abs(energy(gauged, ungauge_sample(s, g)) - energy(inst, s))
            )
    ok = worst < 1e-12
    return CheckResult("gauge_invariance", ok, f"max |diff| = {worst:.2e}")


def _gray_code_minimum(inst: IsingInstance) -> float:
    """Ground energy by Gray-code walk with incremental updates."""
    n = inst.n
    idx = inst.graph.index_of
    neighbors: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    h = [0.0] * n
    for q, v in inst.h.items():
        h[idx[q]] = v
    for (i, j), v in inst.J.items():
        a, b = idx[i], idx[j]
        neighbors[a].append((b, v))
        neighbors[b].append((a, v))
    spins = [1] * n
    e = sum(h) + sum(v for nb in neighbors for _, v in nb) / 2.0
    best = e
    for k in range(1, 1 << n):
        flip = (k & -k).bit_length() - 1
        local = h[flip]
        for other, v in neighbors[flip]:
            local += v * spins[other]
        e -= 2.0 * spins[flip] * local
        spins[flip] = -spins[flip]
        if e < best:
            best = e
    return best


def check_spectrum_enumeration() -> CheckResult:
    rng = np.random.default_rng(103)
    graph = build_chimera(1, 2, 4)  # 16 qubits
    inst = _random_instance(graph, rng)
    spectrum = brute_force_spectrum(inst)
    total = sum(c for _, c in spectrum)
    gray_min = _gray_code_minimum(inst)
    ok = total == 1 << graph.n and abs(spectrum[0][0] - gray_min) < 1e-9
    return CheckResult(
        "spectrum_enumeration",
        ok,
        f"min {spectrum[0][0]:.6f} vs gray-code {gray_min:.6f}, states {total}",
    )


def check_boltzmann_pair_closed_form() -> CheckResult:
    graph = build_chimera(1, 1, 1)  # single coupled pair
    hi, hj, jij, t = 0.03, -0.02, 0.05, 0.25
    inst = IsingInstance(graph, {1: hi, 2: hj}, {(1, 2): jij})
    probs = boltzmann_probs(inst, t)
    # states by bit code: 0 uu, 1 du, 2 ud, 3 dd
    weights = [
        math.exp(-(hi + hj + jij) / t),
        math.exp(-(-hi + hj - jij) / t),
        math.exp(-(hi - hj - jij) / t),
        math.exp(-(-hi - hj + jij) / t),
    ]
    z = sum(weights)
    worst = max(abs(p - w / z) for p, w in zip(probs, weights))
    ok = worst < 1e-12 and abs(probs.sum() - 1.0) < 1e-12
    return CheckResult("boltzmann_pair_closed_form", ok, f"max |diff| = {worst:.2e}")


def check_alpha_roundtrip() -> CheckResult:
    rng = np.random.default_rng(104)
    p = rng.uniform(0.01, 0.99, 100)
    back = cal.prob_from_alpha(cal.alpha_from_prob(p))
    worst = float(np.abs(back - p).max())
    ok = worst < 1e-12 and abs(cal.alpha_from_prob(0.5)) == 0.0
    return CheckResult("alpha_roundtrip", ok, f"max |diff| = {worst:.2e}")


def check_estimator_reduction() -> CheckResult:
    rng = np.random.default_rng(105)
    worst = 0.0
    for _ in range(200):
        half = rng.dirichlet((2.0, 2.0)) / 2.0
        p_uu, p_ud = half
        exact = cal.alpha_ij_exact(p_uu, p_ud, p_ud, p_uu)
        naive = cal.alpha_ij_naive(2 * p_uu)
        worst = max(worst, abs(exact - naive))
    ok = worst < 1e-12
    return CheckResult("estimator_reduction_symmetric", ok, f"max |diff| = {worst:.2e}")


def check_exact_estimator_field_independence() -> CheckResult:
    graph = build_chimera(1, 1, 1)
    t = 0.25
    worst = 0.0
    for hb_i in np.linspace(-0.5, 0.5, 5):
        for hb_j in np.linspace(-0.5, 0.5, 5):
            for ratio in np.linspace(-0.4, 0.4, 9):
                inst = IsingInstance(
                    graph, {1: float(hb_i), 2: float(hb_j)}, {(1, 2): float(ratio * t)}
                )
                p = boltzmann_probs(inst, t)
                # bit codes: 0 uu, 1 du, 2 ud, 3 dd
                got = cal.alpha_ij_exact(p[0], p[2], p[1], p[3])
                worst = max(worst, abs(got - ratio))
    ok = worst < 1e-12
    return CheckResult("exact_estimator_field_independence", ok, f"max |err| = {worst:.2e}")


def check_chimera_counts() -> CheckResult:
    full = build_chimera(8, 8, 4)
    degraded = build_chimera(8, 8, 4, broken={5, 100, 400})
    ok = (
        full.n == 512
        and len(full.edges) == 1472
        and degraded.n == 509
        and max(_degrees(full).values()) <= 6
    )
    return CheckResult(
        "chimera_counts", ok, f"n={full.n}, edges={len(full.edges)}, degraded n={degraded.n}"
    )


def _degrees(graph) -> dict[int, int]:
    deg: dict[int, int] = {q: 0 for q in graph.active}
    for i, j in graph.edges:
        deg[i] += 1
        deg[j] += 1
    return deg


def check_batch_partition() -> CheckResult:
    rng = np.random.default_rng(106)
    for rows, cols in ((1, 1), (2, 2), (3, 2)):
        nominal = rows * cols * 8
        broken = set(rng.choice(np.arange(1, nominal + 1), size=2, replace=False).tolist())
        graph = build_chimera(rows, cols, 4, broken)
        batches = edge_batches(graph)
        seen = set()
        for batch in batches.batches:
            touched = set()
            for i, j in batch:
                if i in touched or j in touched:
                    return CheckResult("batch_partition", False, "matching violated")
                touched.update((i, j))
            if seen & batch:
                return CheckResult("batch_partition", False, "batches overlap")
            seen |= batch
        if seen != set(graph.edges):
            return CheckResult("batch_partition", False, "batches miss edges")
    return CheckResult("batch_partition", True, "partition and matching hold")


def check_pair_sampler_vs_oracle() -> CheckResult:
    rng = np.random.default_rng(107)
    graph = build_chimera(1, 1, 1)
    reads = 20000
    worst_z = 0.0
    for trial in range(10):
        hi, hj = rng.uniform(-0.3, 0.3, 2)
        jij = rng.uniform(-0.2, 0.2)
        t = rng.uniform(0.2, 1.0)
        model = make_device(graph, temperature=t, master_seed=400 + trial)
        inst = IsingInstance(graph, {1: float(hi), 2: float(hj)}, {(1, 2): float(jij)})
        counts = sample_pair_counts(model, inst, [(1, 2)], 1, reads, stream=trial)[0, 0]
        p = boltzmann_probs(inst, t)
        expected = np.array([p[0], p[2], p[1], p[3]]) * reads
        sd = np.sqrt(expected * (1 - expected / reads))
        z = np.abs(counts - expected) / np.where(sd > 0, sd, 1.0)
        worst_z = max(worst_z, float(z.max()))
    ok = worst_z < 3.0
    return CheckResult("pair_sampler_vs_oracle", ok, f"worst |z| = {worst_z:.2f}")


def check_sampler_determinism() -> CheckResult:
    graph = build_chimera(1, 2, 4)
    model = synthesize_device(graph, seed=77)
    inst = random_range_instance(graph, 4, 5)
    a = sample(model, inst, 2, 50, stream=3, method="metropolis")
    b = sample(model, inst, 2, 50, stream=3, method="metropolis")
    same = all(np.array_equal(x.reads, y.reads) for x, y in zip(a, b))
    return CheckResult("sampler_determinism", same, "bit-identical replay" if same else "mismatch")


def check_quantize() -> CheckResult:
    cases = [
        (0.1, 0.0, 0.1),
        (0.0126, 0.025, 0.025),
        (0.09, 0.025, 0.1),
        (0.0125, 0.025, 0.025),  # tie rounds toward +inf
        (-0.0125, 0.025, 0.0),
    ]
    for value, step, want in cases:
        got = float(quantize_dac(value, step))
        if abs(got - want) > 1e-12:
            return CheckResult("quantize", False, f"quantize({value}, {step}) = {got}")
    sweep = np.linspace(-0.1, 0.1, 401)
    plateaus = np.unique(np.asarray(quantize_dac(sweep, 0.025)))
    ok = np.allclose(np.diff(plateaus), 0.025)
    return CheckResult("quantize", ok, "nearest-step rounding with +inf ties")


def check_range_instances() -> CheckResult:
    graph = build_chimera(2, 2, 4)
    inst1 = random_range_instance(graph, 1, 42)
    inst2 = random_range_instance(graph, 1, 42)
    values = set(round(v, 12) for v in inst1.J.values())
    ok = (
        inst1.h == {}
        and values <= {-0.9, 0.0, 0.9}
        and inst1.J == inst2.J
    )
    return CheckResult("range_instances", ok, f"r=1 values {sorted(values)}")


ALL_CHECKS: tuple[Callable[[], CheckResult], ...] = (
    check_energy_term_sum,
    check_gauge_invariance,
    check_spectrum_enumeration,
    check_boltzmann_pair_closed_form,
    check_alpha_roundtrip,
    check_estimator_reduction,
    check_exact_estimator_field_independence,
    check_chimera_counts,
    check_batch_partition,
    check_pair_sampler_vs_oracle,
    check_sampler_determinism,
    check_quantize,
    check_range_instances,
)


def run_checks(quick: bool = False) -> dict:
    """Run the oracle suite; returns a machine-readable report."""
    results = []
    for fn in ALL_CHECKS:
        if quick and fn in (check_pair_sampler_vs_oracle, check_sampler_determinism):
            continue
        try:
            results.append(fn())
        except Exception as exc:  # a crashed oracle is a failed oracle
            results.append(CheckResult(fn.__name__, False, f"exception: {exc!r}"))
    return {
        "passed": bool(all(r.passed for r in results)),
        "checks": [
            {"name": r.name, "passed": bool(r.passed), "detail": r.detail}
            for r in results
        ],
    }
