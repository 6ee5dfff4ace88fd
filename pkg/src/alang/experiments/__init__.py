"""Config-driven reproductions of the Laplace, heavy-tail and classification experiments."""

from .datasets import Dataset, Standardization, load_dataset
from .output import emit_results, read_series, table_rows, write_table
from .runners import (ExperimentResult, TwoLayerNet, heavy_tail_marginal_quantile, run_experiment,
                      run_heavytail_experiment, run_laplace_experiment, run_logistic_experiment,
                      run_nn_experiment)
from .spec import ExperimentSpec, Prior, load_specs, parse_prior

__all__ = [
    "Dataset",
    "Standardization",
    "load_dataset",
    "emit_results",
    "read_series",
    "table_rows",
    "write_table",
    "ExperimentResult",
    "TwoLayerNet",
    "heavy_tail_marginal_quantile",
    "run_experiment",
    "run_heavytail_experiment",
    "run_laplace_experiment",
    "run_logistic_experiment",
    "run_nn_experiment",
    "ExperimentSpec",
    "Prior",
    "load_specs",
    "parse_prior",
]
