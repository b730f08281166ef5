"""
Monte-Carlo experiments: sampling, experiment specs and runners.
"""
from pmac.experiments.runners import (
    collect_nse_trials,
    collect_pmf_trials,
    cross_validate_2x2,
    evaluate_draw,
    run_experiment,
    run_fractions,
    run_ne_count_pmf,
    run_nse_vs_load,
    run_nse_vs_snr,
    RUNNERS,
    TrialResult,
)
from pmac.experiments.sampling import rayleigh_power_gains, sample_gains, sample_quad, trial_rng
from pmac.experiments.spec import ExperimentKind, ExperimentSpec, HARNESS_CAP, load_spec

__all__ = [
    # Sampling
    "trial_rng",
    "rayleigh_power_gains",
    "sample_gains",
    "sample_quad",
    # Specs
    "ExperimentKind",
    "ExperimentSpec",
    "HARNESS_CAP",
    "load_spec",
    # Runners
    "TrialResult",
    "evaluate_draw",
    "collect_nse_trials",
    "collect_pmf_trials",
    "run_nse_vs_snr",
    "run_nse_vs_load",
    "run_ne_count_pmf",
    "run_fractions",
    "cross_validate_2x2",
    "run_experiment",
    "RUNNERS",
]
