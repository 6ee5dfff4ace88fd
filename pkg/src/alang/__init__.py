"""Anchored Langevin samplers with Gaussian-smoothing references."""

from .errors import (BracketError, DatasetError, DomainError, InfeasibleError, NumericAbort,
                     ShapeError, SizeError, SpecError)
from .metrics import SampleSet, brute_force_w2_discrete, classification_accuracy, sliced_w2, \
    tv_histogram, w2_1d_trimmed
from .numerics import RngStream, QuantileFn, bessel_k, erf, laplace_quantile, numeric_quantile, \
    standard_normal_vector
from .potentials import CompositePotential, Penalty, Potential, heavy_tail_potential, \
    laplace1d_potential, logistic_loss, multivariate_laplace_potential, penalty_value, \
    smoothed_penalty, student_t_pair
from .samplers import AnchorPair, ChainRun, ChainState, SamplerConfig, algorithm1_run, \
    algorithm2_run, anchored_step, run_chain, time_change_step, ula_step
from .smoothing import SmoothingSpec, l1_gaussian_closed_form, mc_smoothed_grad, \
    mc_smoothed_value, smoothing_gap_bound
from .bounds import select_hyperparameters, theoretical_eta_max_and_C

__version__ = "0.1.0"
