"""Gaussian smoothing ``g0(x) = E[g(x + mu xi)]`` and its gradient estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError
from .numerics import RngStream
from .potentials import Potential

__all__ = [
    "SmoothingSpec",
    "mc_smoothed_value",
    "mc_smoothed_grad",
    "mc_smoothed_value_and_grad",
    "l1_gaussian_closed_form",
    "l1_gaussian_smoothed_potential",
    "smoothing_gap_bound",
]

_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class SmoothingSpec:
    """Smoothing scale ``mu``, Monte Carlo batch size ``N`` and batching policy.

    With ``independent_batches`` the value and gradient estimates use separate
    draws; otherwise one batch serves both. ``control_variate`` subtracts
    ``g(x)`` inside the gradient estimator (same mean, lower variance).
    """

    mu: float
    N: int = 500
    independent_batches: bool = True
    control_variate: bool = False

    def __post_init__(self):
        if not self.mu > 0:
            raise DomainError("smoothing scale mu must be positive")
        if int(self.N) < 1:
            raise DomainError("batch size N must be >= 1")


def _evaluate(g, pts):
    return g.value(pts) if hasattr(g, "value") else g(pts)


def _shifted(x, xi, mu):
    pts = xi * mu
    pts += x[..., None, :]
    return pts


def _batch(x, spec, rng):
    x = np.asarray(x, dtype=float)
    xi = rng.normal(x.shape[:-1] + (int(spec.N), x.shape[-1]))
    return x, xi


def mc_smoothed_value(g, x, spec: SmoothingSpec, rng: RngStream):
    """``(1/N) sum_i g(x + mu xi_i)`` for every point in ``x`` (shape ``(..., d)``)."""
    x, xi = _batch(x, spec, rng)
    return np.mean(_evaluate(g, _shifted(x, xi, spec.mu)), axis=-1)


def _grad_from_batch(g, x, xi, spec, vals):
    if spec.control_variate:
        vals = vals - _evaluate(g, x)[..., None]
    return np.einsum("...n,...nd->...d", vals, xi) / (spec.mu * xi.shape[-2])


def mc_smoothed_grad(g, x, spec: SmoothingSpec, rng: RngStream):
    """``(1/(mu N)) sum_i xi_i g(x + mu xi_i)``, unbiased for the smoothed gradient."""
    x, xi = _batch(x, spec, rng)
    vals = _evaluate(g, _shifted(x, xi, spec.mu))
    return _grad_from_batch(g, x, xi, spec, vals)


def mc_smoothed_value_and_grad(g, x, spec: SmoothingSpec, rng: RngStream):
    """Value and gradient estimates; the value batch is drawn first."""
    if spec.independent_batches:
        return mc_smoothed_value(g, x, spec, rng), mc_smoothed_grad(g, x, spec, rng)
    x, xi = _batch(x, spec, rng)
    vals = _evaluate(g, _shifted(x, xi, spec.mu))
    return np.mean(vals, axis=-1), _grad_from_batch(g, x, xi, spec, vals)


def l1_gaussian_closed_form(x, mu: float, lam: float = 1.0):
    """Exact Gaussian smoothing of ``lam * |x|_1`` and its gradient.

    Each coordinate is a folded-normal mean:
    ``mu sqrt(2/pi) exp(-x^2 / 2mu^2) + x erf(x / (mu sqrt 2))``; the
    derivative is ``erf(x / (mu sqrt 2))``.
    """
    if not mu > 0:
        raise DomainError("mu must be positive")
    x = np.asarray(x, dtype=float)
    e = special.erf(x / (mu * math.sqrt(2.0)))
    per = mu * _SQRT_2_OVER_PI * np.exp(-0.5 * (x / mu) ** 2) + x * e
    return lam * np.sum(per, axis=-1), lam * e


def l1_gaussian_smoothed_potential(mu: float, lam: float = 1.0, dim: int = 1) -> Potential:
    def both(x):
        return l1_gaussian_closed_form(x, mu, lam)

    return Potential(dim, lambda x: both(x)[0], lambda x: both(x)[1],
                     lipschitz_K=lam * math.sqrt(dim), name=f"l1_gauss(mu={mu:g},lam={lam:g})",
                     value_and_grad=both)


def smoothing_gap_bound(K: float, mu: float, d: int) -> float:
    """Uniform bound ``K mu sqrt(d)`` on ``|g - g0|`` for a K-Lipschitz ``g``."""
    if K < 0:
        raise DomainError("Lipschitz constant must be nonnegative")
    return K * mu * math.sqrt(d)
