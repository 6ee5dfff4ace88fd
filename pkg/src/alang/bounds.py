"""Non-asymptotic W2 bound constants and hyperparameter selection for the smoothed sampler."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InfeasibleError

__all__ = [
    "DiscreteBound",
    "theoretical_eta_max_and_C",
    "SmoothingConstants",
    "Hyperparameters",
    "select_hyperparameters",
]


@dataclass(frozen=True)
class DiscreteBound:
    """Step-size cap, discretisation constant and the W2 bound curve.

    ``eta_terms`` holds the four candidates whose minimum is ``eta_max``.
    """

    m: float
    L: float
    alpha: float
    eta_max: float
    C: float
    C1: float
    C2: float
    C3: float
    eta_terms: tuple[float, float, float, float]

    @property
    def rate(self) -> float:
        return self.m - self.alpha

    def curve(self, k, eta: float, w2_initial: float):
        """``sqrt2 exp(-(m - alpha) k eta) W2_0 + sqrt2 C sqrt(eta)`` for iteration(s) ``k``."""
        k = np.asarray(k, dtype=float)
        out = math.sqrt(2) * np.exp(-self.rate * k * eta) * w2_initial + math.sqrt(2) * self.C * math.sqrt(eta)
        return float(out) if out.ndim == 0 else out


def theoretical_eta_max_and_C(m: float, L: float, alpha: float, x_star_norm: float,
                              sigma_at_xstar: float, E_X0_sq: float, E_pi_sq: float,
                              dim: int = 1) -> DiscreteBound:
    """Evaluate ``eta_max`` and ``C`` for an anchored pair with constants ``(m, L, alpha)``.

    ``sigma_at_xstar`` is the scalar diffusion at the minimiser of ``U0``; the
    Hilbert-Schmidt norm of ``sigma I_d`` is ``sigma sqrt(dim)``. ``alpha = 0``
    is accepted.

    Raises
    ------
    DomainError
        If ``alpha >= m``, ``alpha < 0``, ``L < m`` or a moment is negative.
    """
    if not m > 0:
        raise DomainError("m must be positive")
    if alpha < 0:
        raise DomainError("alpha must be nonnegative")
    if alpha >= m:
        raise DomainError(f"alpha={alpha} >= m={m}: no contraction")
    if L < m:
        raise DomainError("need L >= m")
    if min(x_star_norm, sigma_at_xstar, E_X0_sq, E_pi_sq) < 0 or dim < 1:
        raise DomainError("norms, moments and dim must be nonnegative")
    beta = m - alpha
    a4 = 1.0 + 4.0 * alpha
    lip = 2.0 * L * math.sqrt(a4) + 20.0 * L * a4
    terms = (
        1.0 / (L * L + 4.0 * alpha),
        1.0 / (4.0 * beta),
        (math.sqrt(beta) / (20.0 * math.sqrt(2.0) * a4)) ** 2,
        (beta / (8.0 * math.sqrt(2.0) * lip)) ** 2,
    )
    anchor = x_star_norm + sigma_at_xstar * math.sqrt(dim)
    C1 = 3.0 * L * math.sqrt(a4) * anchor
    C2 = 7.0 * a4 * anchor
    C3 = math.sqrt(4.0 * E_X0_sq + 6.0 * E_pi_sq)
    C = ((2 * C1 + 8 * L * C2 + 2 * math.sqrt(2.0) * C3 * lip) / beta
         + (2 * C2 + 10 * math.sqrt(2.0) * a4 * C3) / math.sqrt(beta))
    return DiscreteBound(m, L, alpha, min(terms), C, C1, C2, C3, terms)


@dataclass(frozen=True)
class SmoothingConstants:
    """Everything the complexity bound for the Gaussian-smoothed sampler depends on.

    ``K`` is the Lipschitz constant of ``g``, ``L_f`` that of ``grad f``;
    ``x_star_f_norm`` is the norm of the minimiser of ``f``, ``g_zero`` is
    ``g(0)``, ``E_init_dev_sq`` is ``E|x0 - x*|^2`` and ``w2_initial`` is
    ``W2(nu_0, pi)``.
    """

    bound: DiscreteBound
    K: float
    L_f: float
    dim: int
    x_star_norm: float
    x_star_f_norm: float
    g_zero: float
    E_init_dev_sq: float
    w2_initial: float


@dataclass(frozen=True)
class Hyperparameters:
    mu: float
    k: int
    eta: float
    N: int
    binding: dict = field(default_factory=dict)


def _A1(c: SmoothingConstants, mu: float) -> float:
    return 4 * (1 + math.e) * (2 * mu**2 * c.L_f**2 + 8 * c.K**2 * c.dim)


def _A2(c: SmoothingConstants, mu: float) -> float:
    d = c.dim
    return 4 * (1 + math.e) * (2 * mu**2 * c.L_f**2 * c.x_star_f_norm**2
                               + 13 * mu**2 * c.K**2 * d**2 + 8 * c.g_zero**2 * d)


def _A(c: SmoothingConstants, mu: float, eta: float, N: float) -> float:
    m, d, K = c.bound.m, c.dim, c.K
    A1, A2 = _A1(c, mu), _A2(c, mu)
    xs2 = c.x_star_norm**2
    poly = ((4 * mu**2 * c.L_f**2 + 8 * K**2 * d) * xs2 + 2 * mu**2 * c.L_f**2 * c.x_star_f_norm**2
            + 2 * K**2 * mu**2 * 3 * d**2 + 4 * c.g_zero**2 * d)
    return (2 * A1 * xs2 + 2 * A1 * c.E_init_dev_sq
            + 4 * A1 / m * math.exp(3 * K * mu * math.sqrt(d)) * d
            + 4 * A1 / m * math.sqrt(2 * A1) / (mu * N**0.25) * (xs2 + A2 / (2 * A1))
            + 2 * A1 * eta / m * 2 * math.exp(6 * K * mu * math.sqrt(d)) / mu**2 * poly
            + A2)


B_CONST = (1.0 + 0.5 * math.e) / 3.0


def n_lower_bounds(c: SmoothingConstants, mu: float, eta: float, k: int, N: float,
                   epsilon: float) -> tuple[float, float]:
    """The two right-hand sides of the batch-size inequality evaluated at ``N``."""
    b = c.bound
    rho = 1 + 4 * b.L**2 + 4 * c.dim * b.alpha
    growth = math.expm1(eta * k * rho)
    num = (4 / mu**2 * (2 * eta + 2) * _A(c, mu, eta, N) + 16 * c.dim * B_CONST) * growth
    first = (num / (epsilon * (1 + 2 * b.L**2 + 4 * c.dim * b.alpha))) ** 2
    second = (4 * math.sqrt(2 * _A1(c, mu)) / (b.m * mu)) ** 4
    return first, second


def eta_smoothing_cap(c: SmoothingConstants, mu: float) -> float:
    # sqrt(mu) inside the exponent is kept exactly as the bound is stated
    m, K, d = c.bound.m, c.K, c.dim
    return m * mu**2 / (4 * math.exp(6 * K * mu * math.sqrt(mu) * d) * (4 * mu**2 * c.L_f**2 + 8 * K**2 * d))


def select_hyperparameters(epsilon: float, constants: SmoothingConstants,
                           max_log2_N: int = 1000) -> Hyperparameters:
    """Pick ``(mu, k, eta, N)`` meeting the four complexity inequalities.

    ``mu`` is the largest admissible value, ``eta`` the largest admissible
    step (also capped by ``eta_max`` so the discretisation bound applies),
    ``k`` the smallest iteration count and ``N`` the smallest batch size.
    ``binding`` names the active constraint for ``eta`` and ``N``.

    Raises
    ------
    InfeasibleError
        If some required quantity is not finite, naming the inequality.
    """
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    c = constants
    if not c.K > 0:
        raise DomainError("K must be positive for the smoothing bound")
    b = c.bound
    mu = 1.0 / (6 * c.K * math.sqrt(c.dim))
    candidates = {
        "eta_accuracy": (epsilon / (4 * math.sqrt(2) * b.C)) ** 2,
        "eta_smoothing": eta_smoothing_cap(c, mu),
        "eta_max": b.eta_max,
    }
    eta_key = min(candidates, key=candidates.get)
    eta = candidates[eta_key]
    if not (math.isfinite(eta) and eta > 0):
        raise InfeasibleError(f"no positive step size satisfies {eta_key}", eta_key)
    log_term = math.log(2 * math.sqrt(2) * c.w2_initial / epsilon) if c.w2_initial > 0 else -math.inf
    k = max(0, math.ceil(log_term / (b.rate * eta))) if log_term > 0 else 0

    def ok(N):
        try:
            first, second = n_lower_bounds(c, mu, eta, k, float(N), epsilon)
        except OverflowError:
            return False
        return math.isfinite(first) and N >= max(first, second)

    hi = 1
    while not ok(hi):
        hi *= 2
        if hi.bit_length() > max_log2_N:
            raise InfeasibleError("batch-size inequality has no finite solution", "N")
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    first, second = n_lower_bounds(c, mu, eta, k, float(hi), epsilon)
    return Hyperparameters(mu, k, eta, hi, {"eta": eta_key, "N": "propagation" if first >= second else "moment"})
