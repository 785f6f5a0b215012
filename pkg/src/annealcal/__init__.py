"""Calibration toolkit for persistent parameter biases in simulated annealers."""

from .benchmark import (
    BenchmarkReport,
    EnergyRecord,
    build_report,
    elite_mean,
    greedy_compare,
    run_benchmark,
    summarize,
)
from .calibrate import (
    CalibrationTable,
    ProtocolConfig,
    ScanData,
    alpha_from_prob,
    alpha_ij_exact,
    alpha_ij_naive,
    damped_correction,
    estimate_biases,
    estimate_device_temperature,
    fit_line,
    iterate_correction,
    median_alpha,
    noise_floor_stats,
    persistence_correlation,
    prob_from_alpha,
    run_calibration,
    run_h_scan,
    run_j_scan,
)
from .chimera import (
    CouplerBatches,
    CouplingGraph,
    build_chimera,
    edge_batches,
    random_range_instance,
)
from .device import (
    DeviceModel,
    SampleSet,
    effective_instance,
    make_device,
    quantize_dac,
    sample,
    sample_pair_counts,
    sample_up_counts,
    synthesize_device,
)
from .ising import (
    IsingInstance,
    apply_gauge,
    boltzmann_probs,
    brute_force_spectrum,
    energy,
    energies,
    ungauge_sample,
)
from .metropolis import McConfig

__version__ = "0.1.0"
