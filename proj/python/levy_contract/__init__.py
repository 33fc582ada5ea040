"""Stochastic-contraction bounds for white, shot and Levy noise systems."""

from levy_contract._core import (
    ConfigError,
    ExperimentConfig,
    PsiMethod,
    PsiSpec,
    PsiStrategy,
    PsiValue,
    TimeLaw,
    __version__,
    evaluate_experiment,
    experiment_names,
    parse_config,
    poisson_prob,
    poisson_truncation,
    psi_k,
    run_experiment,
    shot_kappa_constant,
    sweep,
    white_bound_constant_metric,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "PsiMethod",
    "PsiSpec",
    "PsiStrategy",
    "PsiValue",
    "TimeLaw",
    "__version__",
    "evaluate_experiment",
    "experiment_names",
    "parse_config",
    "poisson_prob",
    "poisson_truncation",
    "psi_k",
    "run_experiment",
    "shot_kappa_constant",
    "sweep",
    "white_bound_constant_metric",
]
