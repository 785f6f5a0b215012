"""Acceptance suite: one test per exit criterion, each printing a PASS line.

Every experiment is seeded, so reruns are deterministic.  Scales follow the
criteria: the full field-recovery protocol runs 41 values x 100 runs x 1000
reads on an 8x8 graph (exact field sampling keeps that fast), the benchmark
runs the 64-qubit desk-scale protocol with Metropolis sampling.
"""

import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats as sstats

from annealcal.benchmark import build_report, run_benchmark
from annealcal.calibrate import (
    ProtocolConfig,
    alpha_from_prob,
    alpha_ij_exact,
    alpha_ij_naive,
    fit_line,
    median_alpha_matrix,
    noise_floor_stats,
    persistence_correlation,
    run_calibration,
    run_h_scan,
)
from annealcal.chimera import build_chimera
from annealcal.cli import main
from annealcal.device import make_device, sample, sample_pair_counts, synthesize_device
from annealcal.ising import IsingInstance, boltzmann_probs
from annealcal.metropolis import McConfig

PAIR = build_chimera(1, 1, 1)


def _pair_order(p):
    # state codes 0..3 are uu, du, ud, dd; estimators take uu, ud, du, dd
    return np.array([p[0], p[2], p[1], p[3]])


def test_criterion_1_estimator_exactness():
    start = time.time()
    temp = 0.25
    hb_grid = np.linspace(-0.5, 0.5, 5)
    ratio_grid = np.linspace(-0.4, 0.4, 9)
    worst_exact = 0.0
    worst_naive_on_slice = 0.0
    min_naive_off_slice = np.inf
    for hb_i in hb_grid:
        for hb_j in hb_grid:
            for ratio in ratio_grid:
                inst = IsingInstance(
                    PAIR, {1: float(hb_i), 2: float(hb_j)}, {(1, 2): float(ratio * temp)}
                )
                p = _pair_order(boltzmann_probs(inst, temp))
                worst_exact = max(worst_exact, abs(alpha_ij_exact(*p) - ratio))
                naive_err = abs(alpha_ij_naive(p[0] + p[3]) - ratio)
                if hb_i * hb_j == 0:
                    worst_naive_on_slice = max(worst_naive_on_slice, naive_err)
                else:
                    min_naive_off_slice = min(min_naive_off_slice, naive_err)
    elapsed = time.time() - start
    assert worst_exact < 1e-12
    assert worst_naive_on_slice < 1e-12
    assert min_naive_off_slice > 1e-3
    assert elapsed < 1.0
    print(
        f"ACCEPTANCE 1 (estimator exactness): PASS  exact err {worst_exact:.2e}, "
        f"naive slice err {worst_naive_on_slice:.2e}, "
        f"naive off-slice err >= {min_naive_off_slice:.2e}, {elapsed:.2f}s"
    )


def test_criterion_2_h_bias_recovery():
    graph = build_chimera(8, 8, 4)
    device = synthesize_device(graph, seed=600, run_noise_sd_j=0.0)

    start = time.time()
    config = ProtocolConfig(
        h_points=41, runs=100, reads_per_run=1000,
        h_iterations=2, j_iterations=0, stop_factor=0.0,
    )
    result = run_calibration(device, config, stream=0, calibrate_j=False)
    full_elapsed = time.time() - start
    first = result.table.h_iterations[0].bias_estimates
    second = result.table.h_iterations[1].bias_estimates
    corr = float(np.corrcoef(first, device.h_bias)[0, 1])
    ratio = float(second.std() / first.std())
    assert corr > 0.95
    assert ratio <= 0.5
    assert full_elapsed < 900

    start = time.time()
    reduced_dev = synthesize_device(graph, seed=601, run_noise_sd_j=0.0)
    reduced = run_calibration(
        reduced_dev,
        ProtocolConfig(h_points=21, runs=20, reads_per_run=200,
                       h_iterations=1, j_iterations=0),
        stream=0, calibrate_j=False,
    )
    reduced_elapsed = time.time() - start
    reduced_corr = float(
        np.corrcoef(reduced.table.h_iterations[0].bias_estimates, reduced_dev.h_bias)[0, 1]
    )
    assert reduced_corr > 0.85
    assert reduced_elapsed < 60
    print(
        f"ACCEPTANCE 2 (h-bias recovery): PASS  corr {corr:.5f}, narrowing ratio "
        f"{ratio:.3f}, full {full_elapsed:.1f}s; reduced corr {reduced_corr:.5f} "
        f"in {reduced_elapsed:.1f}s"
    )


def test_criterion_3_j_iteration_narrowing_and_overcorrection():
    graph = build_chimera(4, 4, 4)
    m = len(graph.edges)
    overcorrection_hits = 0
    damped_means = []
    undamped_means = []
    for seed in range(5):
        device = synthesize_device(
            graph, seed=100 + seed, h_bias_sd=0.0, j_bias_sd=0.035,
            run_noise_sd_h=0.0, run_noise_sd_j=0.03, drift_sd_j=0.004, dac_step=0.0,
        )
        by_damping = {}
        for damp in (True, False):
            config = ProtocolConfig(
                j_window=0.1, j_points=5, runs=8, reads_per_run=50,
                h_iterations=0, j_iterations=3, damp_j=damp,
                estimator="exact", stop_factor=0.0,
            )
            table = run_calibration(device, config, stream=seed, calibrate_h=False).table
            by_damping[damp] = table.j_iterations
        damped_stds = [float(np.std(r.bias_estimates)) for r in by_damping[True]]
        assert damped_stds[0] > damped_stds[1] > damped_stds[2], (seed, damped_stds)
        est2 = by_damping[False][1].bias_estimates
        se2 = float(est2.std() / np.sqrt(m))
        if abs(float(est2.mean())) > 2 * se2:
            overcorrection_hits += 1
        undamped_means.append(abs(float(est2.mean())))
        damped_means.append(abs(float(by_damping[True][1].bias_estimates.mean())))
    assert overcorrection_hits >= 1
    assert np.mean(damped_means) <= np.mean(undamped_means)
    print(
        f"ACCEPTANCE 3 (J-iteration narrowing): PASS  damped std strictly decreasing "
        f"in 5/5 seeds, undamped overcorrection in {overcorrection_hits}/5 seeds, "
        f"damped |mean| {np.mean(damped_means):.4f} <= undamped {np.mean(undamped_means):.4f}"
    )


def test_criterion_4_noise_floor_quadrature():
    graph = build_chimera(8, 8, 4)
    injected, reads = 0.015, 1000
    device = synthesize_device(graph, seed=600, run_noise_sd_h=injected, run_noise_sd_j=0.0)
    scan = run_h_scan(device, np.linspace(-0.1, 0.1, 41), runs=100, reads_per_run=reads)
    temp = 0.25
    floor_stats = noise_floor_stats(scan, temp)
    p_bar = scan.probs.mean(axis=1)
    binomial_floor = temp / (2 * np.sqrt(reads * p_bar * (1 - p_bar)))
    predicted = float(np.sqrt(injected**2 + binomial_floor**2).mean())
    ratio = floor_stats.grand_mean / predicted
    assert abs(ratio - 1) < 0.2

    # demonstration, not a gate: the reported hardware floor of 0.0156 is
    # reproduced when the injected noise is tuned to the matching level
    tuned_sd = float(np.sqrt(0.0156**2 - (temp / (2 * np.sqrt(reads * 0.25))) ** 2))
    tuned_dev = synthesize_device(graph, seed=602, run_noise_sd_h=tuned_sd, run_noise_sd_j=0.0)
    tuned_scan = run_h_scan(tuned_dev, np.linspace(-0.1, 0.1, 11), runs=100, reads_per_run=reads)
    tuned_grand = noise_floor_stats(tuned_scan, temp).grand_mean
    print(
        f"ACCEPTANCE 4 (noise floor): PASS  grand mean {floor_stats.grand_mean:.5f} vs "
        f"quadrature {predicted:.5f} (ratio {ratio:.3f}); tuned sd {tuned_sd:.4f} "
        f"reproduces {tuned_grand:.4f} (target 0.0156, demonstration)"
    )


def _chi2_line_pvalue(scan, n_boot=200, seed=0):
    """Chi-squared of the qubit-median alpha curve against its line fit.

    Per-point uncertainties come from bootstrap resampling of the runs.
    """
    rng = np.random.default_rng(seed)
    x = scan.programmed_values
    base = np.median(median_alpha_matrix(scan), axis=1)
    boots = np.empty((n_boot, len(x)))
    for b in range(n_boot):
        idx = rng.integers(0, scan.runs, scan.runs)
        med_p = np.median(scan.probs[:, idx, :], axis=1)
        boots[b] = np.median(alpha_from_prob(med_p, clamp=scan.clamp_bound), axis=1)
    sigma = boots.std(axis=0, ddof=1)
    slope, intercept, _ = fit_line(zip(x, base))
    resid = base - (intercept + slope * x)
    chi2 = float(((resid / sigma) ** 2).sum())
    dof = len(x) - 2
    return float(sstats.chi2.sf(chi2, dof)), chi2


def test_criterion_5_thermal_model_linearity():
    graph = build_chimera(8, 8, 4)
    # DAC quantization off: a shared programming grid steps identically on
    # every qubit, which is a converter artifact, not a thermal-model failure
    device = synthesize_device(graph, seed=700, run_noise_sd_j=0.0, dac_step=0.0)
    narrow = run_h_scan(device, np.linspace(-0.1, 0.1, 41), runs=100,
                        reads_per_run=1000, stream=1)
    p_narrow, chi2_narrow = _chi2_line_pvalue(narrow)
    assert p_narrow > 0.01

    saturated = synthesize_device(graph, seed=700, run_noise_sd_j=0.0, dac_step=0.0,
                                  saturation_alpha=1.5)
    wide = run_h_scan(saturated, np.linspace(-0.35, 0.35, 21), runs=100,
                      reads_per_run=1000, stream=2, window=0.35)
    p_wide, chi2_wide = _chi2_line_pvalue(wide)
    assert p_wide < 0.01
    print(
        f"ACCEPTANCE 5 (thermal linearity): PASS  narrow window p {p_narrow:.3f} "
        f"(chi2 {chi2_narrow:.1f}/39), saturated wide window p {p_wide:.2e} "
        f"(chi2 {chi2_wide:.0f}/19)"
    )


BENCH_MC = McConfig(chains=500, burn_sweeps=3, thin_sweeps=1, anneal_from=1.0)
BENCH_RANGES = (1, 4, 16)
BENCH_SIZE = dict(instances_per_range=40, gauges=4, runs=20, reads_per_run=500)


def _h_table(device):
    config = ProtocolConfig(h_points=21, runs=25, reads_per_run=500,
                            h_iterations=1, j_iterations=0)
    return run_calibration(device, config, stream=0, calibrate_j=False).table


def test_criterion_6_benchmark_improvement():
    start = time.time()
    graph = build_chimera(2, 4, 4)
    device = synthesize_device(graph, seed=500)
    table = _h_table(device)
    records = run_benchmark(
        device, graph, BENCH_RANGES, calibration=table, correct_h=True,
        seed=42, mc=BENCH_MC, **BENCH_SIZE,
    )
    report = build_report(records)
    pooled = report.pooled["elite"]
    n_instances = BENCH_SIZE["instances_per_range"] * len(BENCH_RANGES)
    win_rate = pooled.wins / n_instances
    pvalue = report.pooled_pvalue["elite"]
    assert win_rate > 0.55
    assert pvalue < 0.05

    ideal = synthesize_device(graph, seed=501, h_bias_sd=0, j_bias_sd=0,
                              run_noise_sd_h=0, run_noise_sd_j=0, dac_step=0)
    ideal_records = run_benchmark(
        ideal, graph, BENCH_RANGES, calibration=_h_table(ideal), correct_h=True,
        seed=43, mc=BENCH_MC, **BENCH_SIZE,
    )
    ideal_pooled = build_report(ideal_records).pooled["elite"]
    decided = ideal_pooled.wins + ideal_pooled.losses
    ideal_rate = ideal_pooled.wins / decided
    assert abs(ideal_rate - 0.5) < 3 * 0.5 / np.sqrt(decided)
    elapsed = time.time() - start
    assert elapsed < 1800
    print(
        f"ACCEPTANCE 6 (benchmark improvement): PASS  elite win rate {win_rate:.3f} "
        f"(p {pvalue:.2e}) over {n_instances} instances; ideal-device rate "
        f"{ideal_rate:.3f} of {decided} decided; {elapsed:.0f}s"
    )


def test_criterion_7_oracle_equivalence():
    start = time.time()
    rng = np.random.default_rng(901)
    worst_z = 0.0
    for trial in range(50):
        hi, hj = rng.uniform(-0.3, 0.3, 2)
        jij = rng.uniform(-0.25, 0.25)
        temp = rng.uniform(0.15, 1.0)
        model = make_device(PAIR, temperature=temp, master_seed=901)
        inst = IsingInstance(PAIR, {1: float(hi), 2: float(hj)}, {(1, 2): float(jij)})
        counts = sample_pair_counts(model, inst, [(1, 2)], 1, 100_000, stream=trial)[0, 0]
        expect = _pair_order(boltzmann_probs(inst, temp)) * 100_000
        sd = np.sqrt(expect * (1 - expect / 100_000))
        worst_z = max(worst_z, float(np.max(np.abs(counts - expect) / np.maximum(sd, 1e-9))))
    assert worst_z < 3.0

    cell = build_chimera(1, 1, 4)
    worst_tv = 0.0
    for k in range(3):
        irng = np.random.default_rng(910 + k)
        inst = IsingInstance(
            cell,
            {q: float(irng.uniform(-0.2, 0.2)) for q in cell.active},
            {e: float(irng.uniform(-0.5, 0.5)) for e in cell.edges},
        )
        model = make_device(cell, temperature=0.5, master_seed=910 + k)
        reads = sample(model, inst, 1, 600_000, stream=0, method="metropolis",
                       mc=McConfig(chains=200, burn_sweeps=600, thin_sweeps=6))[0].reads
        bits = (reads < 0).astype(np.uint32)
        codes = bits @ (np.uint32(1) << np.arange(8, dtype=np.uint32))
        emp = np.bincount(codes, minlength=256) / len(codes)
        tv = 0.5 * float(np.abs(emp - boltzmann_probs(inst, 0.5)).sum())
        worst_tv = max(worst_tv, tv)
    elapsed = time.time() - start
    assert worst_tv < 0.02
    assert elapsed < 300
    print(
        f"ACCEPTANCE 7 (oracle equivalence): PASS  worst pair |z| {worst_z:.2f} over "
        f"50 triples, worst Metropolis TV {worst_tv:.4f}, {elapsed:.0f}s"
    )


def test_criterion_8_determinism_and_persistence(tmp_path):
    device_path = tmp_path / "device.json"
    rc = main(["make-device", "--out", str(device_path), "--chimera", "2x2,shore=4",
               "--run-noise-j", "0.005", "--seed", "11"])
    assert rc == 0
    outputs = []
    for name in ("a", "b"):
        out_dir = tmp_path / name
        rc = main([
            "calibrate", "--device", str(device_path), "--out-dir", str(out_dir),
            "--h-points", "11", "--j-points", "5", "--runs", "10", "--reads", "200",
            "--h-iterations", "1", "--j-iterations", "1", "--seed", "17",
        ])
        assert rc == 0
        outputs.append(out_dir)
    files_a = sorted(p.relative_to(outputs[0]) for p in outputs[0].rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(outputs[1]) for p in outputs[1].rglob("*") if p.is_file())
    assert files_a == files_b and files_a
    for rel in files_a:
        assert (outputs[0] / rel).read_bytes() == (outputs[1] / rel).read_bytes(), rel

    graph = build_chimera(8, 8, 4)
    device = synthesize_device(graph, seed=601, run_noise_sd_j=0.0)
    config = ProtocolConfig(h_points=21, runs=20, reads_per_run=200,
                            h_iterations=1, j_iterations=0)
    first = run_calibration(device, config, stream=1, calibrate_j=False).table
    second = run_calibration(device, config, stream=2, calibrate_j=False).table
    corr = persistence_correlation(first, second, "h")
    assert corr > 0.9
    print(
        f"ACCEPTANCE 8 (determinism and persistence): PASS  {len(files_a)} replayed "
        f"files byte-identical; repeat-calibration correlation {corr:.4f}"
    )
