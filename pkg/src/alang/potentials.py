"""Target and reference potentials used by the samplers and experiments.

All potentials act on the last axis: ``value`` maps ``(..., d)`` to ``(...)``
and ``grad`` maps ``(..., d)`` to ``(..., d)``, so a cloud of chains is
evaluated in one call.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from .errors import DomainError, ShapeError

__all__ = [
    "Potential",
    "Penalty",
    "CompositePotential",
    "StudentT",
    "laplace1d_potential",
    "multivariate_laplace_potential",
    "bivariate_laplace_sigma",
    "heavy_tail_potential",
    "student_t_pair",
    "logistic_loss",
    "penalty_value",
    "smoothed_penalty",
    "ridge_potential",
]


@dataclass(frozen=True)
class Potential:
    """Energy ``U`` with optional exact gradient and user-supplied constants.

    ``lipschitz_K`` is the Lipschitz constant of the nonsmooth part, ``m`` the
    strong convexity and ``L`` the smoothness constant. None of them is
    inferred; they only feed the bound calculator. ``value_and_grad`` is an
    optional fused evaluator used by the samplers to avoid recomputation.
    """

    dim: int
    value: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray] | None = None
    lipschitz_K: float | None = None
    m: float | None = None
    L: float | None = None
    name: str = ""
    value_and_grad: Callable[[np.ndarray], tuple] | None = None

    @property
    def has_grad(self) -> bool:
        return self.grad is not None

    def evaluate(self, x):
        """``(value, grad)`` in one pass when a fused evaluator is available."""
        if self.value_and_grad is not None:
            return self.value_and_grad(x)
        return self.value(x), self.grad(x)

    def __call__(self, x):
        return self.value(x)


def _as_points(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


def laplace1d_potential(b: float, loc: float = 0.0) -> Potential:
    """``U(x) = |x - loc| / b``; the normalising constant ``log 2b`` is dropped.

    The gradient is the subgradient selection ``sign(x - loc) / b`` (zero at
    the kink).
    """
    if b <= 0:
        raise DomainError("Laplace scale must be positive")

    def value(x):
        return np.abs(_as_points(x)[..., 0] - loc) / b

    def grad(x):
        return np.sign(_as_points(x) - loc) / b

    return Potential(1, value, grad, lipschitz_K=1.0 / b, name=f"laplace1d(b={b:g})")


def bivariate_laplace_sigma(sigma1: float = 1.0, sigma2: float = 1.0, rho: float = 0.0) -> np.ndarray:
    return np.array([[sigma1**2, rho * sigma1 * sigma2], [rho * sigma1 * sigma2, sigma2**2]])


def _check_spd(Sigma) -> np.ndarray:
    S = np.atleast_2d(np.asarray(Sigma, dtype=float))
    if S.shape[0] != S.shape[1] or not np.allclose(S, S.T):
        raise DomainError("Sigma must be symmetric")
    if np.linalg.eigvalsh(S).min() <= 0:
        raise DomainError("Sigma must be positive definite")
    return S


def _laplace_general_logpdf(x, Sinv, logdet, d):
    v = (2.0 - d) / 2.0
    q = np.einsum("...i,ij,...j->...", x, Sinv, x)
    s = np.sqrt(2.0 * q)
    with np.errstate(divide="ignore"):
        log_kv = np.log(special.kve(v, s)) - s
        log_norm = math.log(2.0) - 0.5 * d * math.log(2 * math.pi) - 0.5 * logdet
        return log_norm + 0.5 * v * np.log(q / 2.0) + log_kv


def _laplace_bivariate_logpdf(x, s1, s2, rho):
    r = 1.0 - rho**2
    x1, x2 = x[..., 0], x[..., 1]
    quad = x1**2 / s1**2 - 2 * rho * x1 * x2 / (s1 * s2) + x2**2 / s2**2
    s = np.sqrt(2.0 / r * quad)
    with np.errstate(divide="ignore"):
        return -math.log(math.pi * s1 * s2 * math.sqrt(r)) + np.log(special.kve(0, s)) - s


def multivariate_laplace_potential(Sigma, use_bivariate: bool = True) -> Potential:
    """Negative log-density of the centred symmetric multivariate Laplace law.

    Normalising constants are kept, so ``exp(-U)`` integrates to one. For
    ``d = 2`` the ``K_0`` bivariate form is used unless ``use_bivariate`` is
    false; both forms describe the same density.

    Raises
    ------
    DomainError
        If ``Sigma`` is not symmetric positive definite.
    """
    S = _check_spd(Sigma)
    d = S.shape[0]
    Sinv = np.linalg.inv(S)
    logdet = float(np.linalg.slogdet(S)[1])
    v = (2.0 - d) / 2.0

    if d == 2 and use_bivariate:
        s1, s2 = math.sqrt(S[0, 0]), math.sqrt(S[1, 1])
        rho = S[0, 1] / (s1 * s2)

        def value(x):
            return -_laplace_bivariate_logpdf(_as_points(x), s1, s2, rho)
    else:
        def value(x):
            return -_laplace_general_logpdf(_as_points(x), Sinv, logdet, d)

    def grad(x):
        x = _as_points(x)
        q = np.einsum("...i,ij,...j->...", x, Sinv, x)
        s = np.sqrt(2.0 * q)
        # K_v'(s) = -K_{v-1}(s) - (v/s) K_v(s)
        ratio = -special.kve(v - 1, s) / special.kve(v, s) - v / s
        dU_dq = -v / (2.0 * q) - ratio / s
        return (2.0 * dU_dq)[..., None] * (x @ Sinv)

    return Potential(d, value, grad, name=f"mvlaplace(d={d})")


def heavy_tail_potential(iota: float, dim: int = 1, check_integrable: bool = True) -> Potential:
    """``U(x) = iota * log(1 + |x|^2)``; integrable only when ``iota > 1 + d/2``.

    Pass ``check_integrable=False`` when the potential serves as a reference
    ``U0`` and need not define a probability law.
    """
    if check_integrable and iota <= 1 + dim / 2:
        warnings.warn(f"iota={iota} <= 1 + d/2: exp(-U) is not integrable", RuntimeWarning,
                      stacklevel=2)

    def value(x):
        x = _as_points(x)
        return iota * np.log1p(np.sum(x * x, axis=-1))

    def grad(x):
        x = _as_points(x)
        return (2.0 * iota / (1.0 + np.sum(x * x, axis=-1)))[..., None] * x

    return Potential(dim, value, grad, name=f"heavytail(iota={iota:g})")


@dataclass(frozen=True)
class StudentT:
    """Student-t target with its logarithmic anchor.

    ``U = ((d + nu)/2) log q`` and ``U0 = beta log q`` with
    ``beta = (d + nu)/2 - 1``. ``condition_holds`` reports whether
    ``d + nu > 2 + d * kappa(Sigma)``.
    """

    U: Potential
    U0: Potential
    q: Callable[[np.ndarray], np.ndarray]
    q_grad: Callable[[np.ndarray], np.ndarray]
    beta: float
    nu: float
    kappa: float
    condition_holds: bool
    q_and_grad: Callable[[np.ndarray], tuple] | None = None

    def pair(self, exponent_clamp: float = 30.0):
        """Anchor pair whose gap ``U - U0 = log q`` shares one evaluation of ``q`` with ``grad U0``."""
        from .samplers import AnchorPair

        beta = self.beta

        def fused(x):
            qv, qg = self.q_and_grad(x)
            return np.log(qv), (beta / qv)[..., None] * qg

        return AnchorPair(self.U, self.U0, exponent_clamp, fused)


def student_t_pair(nu: float, mu=None, Sigma=None) -> StudentT:
    if nu <= 0:
        raise DomainError("degrees of freedom must be positive")
    S = _check_spd(np.eye(1) if Sigma is None else Sigma)
    d = S.shape[0]
    loc = np.zeros(d) if mu is None else np.asarray(mu, dtype=float).reshape(d)
    Sinv = np.linalg.inv(S)
    eig = np.linalg.eigvalsh(Sinv)
    kappa = float(eig.max() / eig.min())
    beta = (d + nu) / 2.0 - 1.0

    def q_and_grad(x):
        r = _as_points(x) - loc
        rs = r @ Sinv
        return 1.0 + np.add.reduce(rs * r, axis=-1) / nu, 2.0 * rs / nu

    def q(x):
        return q_and_grad(x)[0]

    def q_grad(x):
        return q_and_grad(x)[1]

    def make(coef, name):
        def both(x):
            qv, qg = q_and_grad(x)
            return coef * np.log(qv), (coef / qv)[..., None] * qg

        return Potential(d, lambda x: coef * np.log(q(x)), lambda x: both(x)[1], name=name,
                         value_and_grad=both)

    return StudentT(U=make((d + nu) / 2.0, f"student_t(nu={nu:g})"),
                    U0=make(beta, f"student_t_anchor(beta={beta:g})"),
                    q=q, q_grad=q_grad, beta=beta, nu=float(nu), kappa=kappa,
                    condition_holds=bool(d + nu > 2 + d * kappa), q_and_grad=q_and_grad)


def logistic_loss(X, y, reduction: str = "mean") -> Potential:
    """Negative log-likelihood of logistic regression without bias.

    Computed as ``logaddexp(0, z) - y z`` with ``z = X x`` so large margins
    do not overflow. ``reduction="sum"`` drops the ``1/n`` factor.

    Raises
    ------
    ShapeError
        If ``X`` and ``y`` disagree in length or ``y`` is not binary.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ShapeError(f"X has shape {X.shape} but y has {y.shape[0]} labels")
    if not np.all((y == 0) | (y == 1)):
        raise ShapeError("labels must be 0 or 1")
    n, d = X.shape
    w = 1.0 / n if reduction == "mean" else 1.0

    def _z(x):
        x = _as_points(x)
        if x.shape[-1] != d:
            raise ShapeError(f"weights have dimension {x.shape[-1]}, data has {d}")
        return x @ X.T

    def value(x):
        z = _z(x)
        return w * np.sum(np.logaddexp(0.0, z) - y * z, axis=-1)

    def grad(x):
        z = _z(x)
        return w * ((special.expit(z) - y) @ X)

    return Potential(d, value, grad, name="logistic")


def ridge_potential(m0: float, dim: int) -> Potential:
    return Potential(dim, lambda x: m0 * np.sum(_as_points(x) ** 2, axis=-1),
                     lambda x: 2.0 * m0 * _as_points(x), m=2.0 * m0, L=2.0 * m0,
                     name=f"ridge(m0={m0:g})")


@dataclass(frozen=True)
class Penalty:
    """Separable sparsity penalty ``g(x) = sum_i p(x_i)``.

    ``kind`` is ``"L1"``, ``"SCAD"`` or ``"MCP"``; ``a > 1`` is only used by
    the folded concave kinds.
    """

    kind: str
    lam: float
    a: float = 3.7

    def __post_init__(self):
        if self.kind not in ("L1", "SCAD", "MCP"):
            raise DomainError(f"unknown penalty kind {self.kind!r}")
        if self.lam <= 0:
            raise DomainError("lambda must be positive")
        if self.kind != "L1" and self.a <= 1:
            raise DomainError("a must exceed 1")

    def elementwise(self, x) -> np.ndarray:
        t = np.abs(_as_points(x))
        lam, a = self.lam, self.a
        if self.kind == "L1":
            return lam * t
        if self.kind == "SCAD":
            mid = (2 * a * lam * t - t**2 - lam**2) / (2 * (a - 1))
            return np.where(t <= lam, lam * t, np.where(t <= a * lam, mid, lam**2 * (a + 1) / 2))
        return np.where(t <= a * lam, lam * t - t**2 / (2 * a), a * lam**2 / 2)

    def value(self, x) -> np.ndarray:
        x = _as_points(x)
        if self.kind == "L1":
            t = np.abs(x)
            return self.lam * (t[..., 0] if t.shape[-1] == 1 else np.sum(t, axis=-1))
        return np.sum(self.elementwise(x), axis=-1)

    __call__ = value

    def lipschitz(self, d: int) -> float:
        """Lipschitz constant in the Euclidean norm; every kind has slope at most lambda."""
        return self.lam * math.sqrt(d)

    def plateau(self) -> float:
        if self.kind == "SCAD":
            return self.lam**2 * (self.a + 1) / 2
        if self.kind == "MCP":
            return self.a * self.lam**2 / 2
        return math.inf


def penalty_value(p: Penalty, x) -> np.ndarray:
    return p.value(x)


def _smoothed_elementwise(p: Penalty, eps: float, x):
    """Per-coordinate smoothed penalty and derivative (C^1 across breakpoints)."""
    lam, a = p.lam, p.a
    t = np.abs(x)
    s = np.sqrt(x * x + eps * eps)
    if p.kind == "L1":
        return lam * s, lam * x / s
    A = math.sqrt(a * a * lam * lam + eps * eps)
    if p.kind == "SCAD":
        B = math.sqrt(lam * lam + eps * eps)
        D = 2.0 * (A - B)
        mid_v = (2 * lam * A * s - lam * x * x - lam * (lam * lam + 2 * eps * eps)) / D
        mid_g = (2 * lam * A * x / s - 2 * lam * x) / D
        flat = lam**3 * (a * a - 1) / D
        inner, outer = t <= lam, t <= a * lam
        val = np.where(inner, lam * s, np.where(outer, mid_v, flat))
        grad = np.where(inner, lam * x / s, np.where(outer, mid_g, 0.0))
        return val, grad
    inner = t <= a * lam
    val = np.where(inner, lam * s - lam * x * x / (2 * A), lam * (a * a * lam * lam + 2 * eps * eps) / (2 * A))
    grad = np.where(inner, lam * x / s - lam * x / A, 0.0)
    return val, grad


def smoothed_penalty(p: Penalty, eps: float, dim: int | None = None) -> Potential:
    """Deterministic C^1 surrogate of ``p`` with exact gradient.

    L1 becomes ``lam * sqrt(x^2 + eps^2)``; SCAD and MCP use the matching
    piecewise forms whose derivative vanishes on the plateau.
    """
    if eps <= 0:
        raise DomainError("eps must be positive")

    def value(x):
        return np.sum(_smoothed_elementwise(p, eps, _as_points(x))[0], axis=-1)

    def grad(x):
        return _smoothed_elementwise(p, eps, _as_points(x))[1]

    return Potential(dim or 0, value, grad, name=f"smoothed_{p.kind}(eps={eps:g})")


@dataclass(frozen=True)
class CompositePotential:
    """``U(x) = f(x) + m0 |x|^2 + g(x)`` with smooth ``f`` and nonsmooth ``g``.

    ``f`` may be ``None`` (treated as zero). ``g`` is anything exposing
    ``value(x)``: a :class:`Penalty` or a :class:`Potential`.
    """

    f: Potential | None
    g: Penalty | Potential
    m0: float = 0.0
    dim: int = 1

    def smooth_value(self, x):
        x = _as_points(x)
        out = self.m0 * np.sum(x * x, axis=-1)
        if self.f is not None:
            out = out + self.f.value(x)
        return out

    def smooth_grad(self, x):
        x = _as_points(x)
        out = 2.0 * self.m0 * x
        if self.f is not None:
            out = out + self.f.grad(x)
        return out

    def g_value(self, x):
        return self.g.value(x)

    def value(self, x):
        return self.smooth_value(x) + self.g.value(x)

    __call__ = value

    def lipschitz_g(self) -> float | None:
        if isinstance(self.g, Penalty):
            return self.g.lipschitz(self.dim)
        return self.g.lipschitz_K

    def as_potential(self) -> Potential:
        return Potential(self.dim, self.value, None, lipschitz_K=self.lipschitz_g(), name="composite")

    def with_smoothed_penalty(self, eps: float) -> Potential:
        """Reference ``U0 = f + m0|x|^2 + g_eps`` using the deterministic smoothing of ``g``."""
        if not isinstance(self.g, Penalty):
            raise TypeError("deterministic smoothing needs a Penalty")
        gs = smoothed_penalty(self.g, eps, self.dim)
        return Potential(self.dim, lambda x: self.smooth_value(x) + gs.value(x),
                         lambda x: self.smooth_grad(x) + gs.grad(x), name=f"{gs.name}+smooth")
