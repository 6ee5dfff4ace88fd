"""Discrete-time Langevin samplers.

Three update rules share one driver, :func:`run_chain`:

``ula``
    ``x' = x - eta grad U0(x) + sqrt(2 eta) xi``.
``anchored``
    Euler-Maruyama step of the anchored SDE with drift
    ``b = -grad U0 exp(U - U0)`` and diffusion ``sigma = exp((U - U0)/2)``.
``timechange``
    Advances a clock ``ell`` by ``eta exp(U - U0)`` and takes a ULA step on
    ``U0`` with step size equal to the clock increment.

Targets are either an :class:`AnchorPair` (exact ``U0``) or a
:class:`~alang.potentials.CompositePotential` whose nonsmooth part is
Gaussian-smoothed by Monte Carlo at every step.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import DomainError, NumericAbort
from .metrics import SampleSet
from .numerics import RngStream
from .potentials import CompositePotential, Potential
from .smoothing import SmoothingSpec, mc_smoothed_grad, mc_smoothed_value_and_grad

__all__ = [
    "AnchorPair",
    "ChainState",
    "SamplerConfig",
    "ChainRun",
    "ula_step",
    "anchored_step",
    "time_change_step",
    "run_chain",
    "algorithm1_run",
    "algorithm2_run",
    "KINDS",
]

KINDS = ("ula", "anchored", "timechange")
_NOISE_BLOCK_FLOATS = 1 << 18


@dataclass(frozen=True)
class AnchorPair:
    """Target ``U`` with a smooth reference ``U0`` (gradient required).

    ``U - U0`` is clipped to ``[-exponent_clamp, exponent_clamp]`` before
    exponentiation. ``gap_and_grad``, when given, returns ``(U - U0, grad U0)``
    in one pass and replaces the separate evaluations inside the samplers.
    """

    U: Potential
    U0: Potential
    exponent_clamp: float = 30.0
    gap_and_grad: Callable[[np.ndarray], tuple] | None = None

    def __post_init__(self):
        if not self.U0.has_grad:
            raise DomainError("reference potential U0 needs a gradient")

    def clipped_gap(self, x):
        gap = np.asarray(self.U.value(x) - self.U0.value(x), dtype=float)
        h = np.clip(gap, -self.exponent_clamp, self.exponent_clamp)
        return h, h != gap

    def drift(self, x):
        h, _ = self.clipped_gap(x)
        return -self.U0.grad(x) * np.exp(h)[..., None]

    def diffusion(self, x):
        h, _ = self.clipped_gap(x)
        return np.exp(h / 2)


@dataclass
class ChainState:
    """Iterate ``x``, step counter ``k`` and time-change clock ``ell``."""

    x: np.ndarray
    k: int = 0
    ell: np.ndarray | float = 0.0
    rng: RngStream | None = None


@dataclass(frozen=True)
class SamplerConfig:
    eta: float
    n_steps: int
    smoothing: SmoothingSpec | None = None
    record_every: int = 1

    def __post_init__(self):
        if not self.eta > 0:
            raise DomainError("step size eta must be positive")
        if self.n_steps < 0:
            raise DomainError("n_steps must be nonnegative")
        if self.record_every < 1:
            raise DomainError("record_every must be >= 1")


@dataclass
class ChainRun:
    """Recorded trajectory of one or more parallel chains.

    ``trajectory`` has shape ``(n_records, n_chains, d)``; record 0 is ``x0``.
    """

    trajectory: np.ndarray
    steps: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.trajectory[-1]

    def samples(self, burn_in: int = 0) -> SampleSet:
        """Pool recorded states with step index ``>= burn_in`` across chains."""
        keep = self.trajectory[self.steps >= burn_in]
        return SampleSet(keep.reshape(-1, keep.shape[-1]), dict(self.meta, burn_in=burn_in))


def _check_finite(arr, step, last):
    # a finite sum is the cheap common case; only fall back to the elementwise test otherwise
    if not math.isfinite(np.add.reduce(arr, axis=None)) and not np.isfinite(arr).all():
        raise NumericAbort(step, np.array(last, copy=True))


def ula_step(grad_u0: Callable, x, eta: float, xi, step: int | None = None):
    """One unadjusted Langevin step ``x - eta grad U0(x) + sqrt(2 eta) xi``."""
    g = grad_u0(x)
    _check_finite(g, step if step is not None else -1, x)
    return x - eta * g + math.sqrt(2 * eta) * xi


def _anchored_update(x, h, grad_u0, eta, xi):
    sigma = np.exp(h / 2)[..., None]
    b = -grad_u0 * np.exp(h)[..., None]
    return x + eta * b + math.sqrt(2 * eta) * sigma * xi, sigma


def _time_change_update(z, ell, h, grad_u0, eta, xi):
    dl = eta * np.exp(h)
    z_new = z - dl[..., None] * grad_u0 + np.sqrt(2 * dl)[..., None] * xi
    return z_new, ell + dl


def anchored_step(pair: AnchorPair, x, eta: float, xi, clamp_counter: np.ndarray | None = None):
    """Euler-Maruyama step ``x + eta b(x) + sqrt(2 eta) sigma(x) xi``.

    ``clamp_counter`` (integer array over chains) is incremented wherever the
    exponent had to be clipped.
    """
    h, clamped = pair.clipped_gap(x)
    if clamp_counter is not None:
        clamp_counter += clamped
    return _anchored_update(x, h, pair.U0.grad(x), eta, xi)[0]


def time_change_step(state: ChainState, pair: AnchorPair, eta: float, xi) -> ChainState:
    """Advance the clock by ``eta exp(U - U0)`` then take a ULA step of that length."""
    h, _ = pair.clipped_gap(state.x)
    z, ell = _time_change_update(state.x, np.asarray(state.ell, dtype=float), h,
                                 pair.U0.grad(state.x), eta, xi)
    return ChainState(z, state.k + 1, ell, state.rng)


class _ExactReference:
    stochastic = False

    def __init__(self, U, U0, clamp, fused=None):
        self.U, self.U0, self.clamp, self.fused = U, U0, clamp, fused

    def __call__(self, x, rng, need_value):
        if not need_value:
            return None, self.U0.grad(x)
        if self.fused is not None:
            return self.fused(x)
        v0, grad = self.U0.evaluate(x)
        return self.U.value(x) - v0, grad


class _SmoothedReference:
    stochastic = True

    def __init__(self, U: CompositePotential, spec: SmoothingSpec):
        self.U, self.spec = U, spec

    def __call__(self, x, rng, need_value):
        g = self.U.g
        sgrad = self.U.smooth_grad(x)
        if not need_value:
            return None, sgrad + mc_smoothed_grad(g, x, self.spec, rng)
        v, gr = mc_smoothed_value_and_grad(g, x, self.spec, rng)
        # U - U0_tilde: the smooth part cancels, leaving g(x) - mean g(x + mu xi)
        return self.U.g_value(x) - v, sgrad + gr


def _make_reference(kind, target, config):
    if isinstance(target, CompositePotential):
        if config.smoothing is None:
            raise DomainError("a composite target needs a SmoothingSpec")
        return _SmoothedReference(target, config.smoothing), 30.0
    if isinstance(target, AnchorPair):
        return (_ExactReference(target.U, target.U0, target.exponent_clamp, target.gap_and_grad),
                target.exponent_clamp)
    if isinstance(target, Potential):
        if kind != "ula":
            raise DomainError("anchored samplers need an AnchorPair or CompositePotential")
        return _ExactReference(target, target, 0.0), 0.0
    raise TypeError(f"unsupported target {type(target).__name__}")


class _Noise:
    """Step noise; pre-drawn in blocks when no Monte Carlo draws interleave."""

    def __init__(self, rng, shape, blocked):
        self.rng, self.shape = rng, shape
        self.block = max(1, _NOISE_BLOCK_FLOATS // int(np.prod(shape))) if blocked else 0
        self.buf, self.pos = None, 0

    def next(self):
        if not self.block:
            return self.rng.normal(self.shape)
        if self.buf is None or self.pos == self.block:
            self.buf, self.pos = self.rng.normal((self.block,) + self.shape), 0
        self.pos += 1
        return self.buf[self.pos - 1]


def run_chain(kind: str, config: SamplerConfig, target, x0, rng: RngStream,
              callback: Callable[[int, np.ndarray], bool] | None = None,
              exponent_clamp: float | None = None) -> ChainRun:
    """Run ``config.n_steps`` steps of ``kind`` from ``x0``.

    Parameters
    ----------
    kind : {"ula", "anchored", "timechange"}
    target : AnchorPair, CompositePotential or Potential
        ``ula`` follows ``grad U0`` of a pair, the smoothed gradient of a
        composite, or the gradient of a bare potential.
    x0 : array, shape ``(d,)`` or ``(n_chains, d)``
    callback : callable, optional
        Called as ``callback(k, x)`` after every step; a truthy return stops
        the run early.

    Raises
    ------
    NumericAbort
        On the first non-finite iterate, carrying the step index and the
        last finite state.
    """
    if kind not in KINDS:
        raise DomainError(f"unknown sampler kind {kind!r}")
    ref, clamp = _make_reference(kind, target, config)
    if exponent_clamp is not None:
        clamp = exponent_clamp
    x = np.atleast_2d(np.array(x0, dtype=float))
    n, d = x.shape
    eta = float(config.eta)
    root = math.sqrt(2 * eta)
    noise = _Noise(rng, (n, d), blocked=not ref.stochastic)
    ell = np.zeros(n)
    clamp_counts = np.zeros(n, dtype=np.int64)
    sigma_sum = np.zeros(n)
    n_rec = config.n_steps // config.record_every + 2
    records = np.empty((n_rec, n, d))
    steps = np.empty(n_rec, dtype=np.int64)
    records[0], steps[0], r = x, 0, 1
    t0 = time.perf_counter()
    k = 0
    for k in range(1, config.n_steps + 1):
        gap, grad = ref(x, rng, kind != "ula")
        xi = noise.next()
        if kind == "ula":
            x_new = x - eta * grad + root * xi
        else:
            h = np.minimum(np.maximum(gap, -clamp), clamp)
            clamp_counts += h != gap
            if kind == "anchored":
                x_new, sigma = _anchored_update(x, h, grad, eta, xi)
                sigma_sum += sigma[:, 0]
            else:
                x_new, ell = _time_change_update(x, ell, h, grad, eta, xi)
                sigma_sum += np.exp(h / 2)
        _check_finite(x_new, k, x)
        x = x_new
        if k % config.record_every == 0:
            records[r], steps[r] = x, k
            r += 1
        if callback is not None and callback(k, x):
            break
    else:
        k = config.n_steps
    if steps[r - 1] != k:
        records[r], steps[r] = x, k
        r += 1
    diagnostics = {
        "steps": k,
        "clamp_count": int(clamp_counts.sum()),
        "clamp_per_chain": clamp_counts,
        "mean_sigma": float(np.mean(sigma_sum)) / k if k and kind != "ula" else 1.0,
        "wall_time": time.perf_counter() - t0,
    }
    if kind == "timechange":
        diagnostics["ell"] = ell
    meta = {"sampler": kind, "seed": rng.seed, "stream": rng.stream_id, "steps": k, "eta": eta}
    if config.smoothing is not None:
        meta.update(mu=config.smoothing.mu, N=config.smoothing.N)
    return ChainRun(records[:r].copy(), steps[:r].copy(), diagnostics, meta)


def algorithm1_run(U: CompositePotential, config: SamplerConfig, x0, rng: RngStream,
                   callback=None) -> ChainRun:
    """Anchored Langevin with Monte Carlo Gaussian smoothing of ``U.g``.

    Each step draws a value batch, then an independent gradient batch, then
    the step noise, and uses the exact ``g(x)`` in the exponent.
    """
    if config.smoothing is None:
        raise DomainError("Algorithm 1 needs a SmoothingSpec")
    return run_chain("anchored", config, U, x0, rng, callback)


def algorithm2_run(U: CompositePotential, config: SamplerConfig, x0, rng: RngStream,
                   callback=None) -> ChainRun:
    """Random time-change counterpart of :func:`algorithm1_run` (same draw order)."""
    if config.smoothing is None:
        raise DomainError("Algorithm 2 needs a SmoothingSpec")
    return run_chain("timechange", config, U, x0, rng, callback)


def with_steps(config: SamplerConfig, n_steps: int) -> SamplerConfig:
    return replace(config, n_steps=n_steps)
