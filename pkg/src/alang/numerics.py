"""Random streams, special functions and quantile utilities.

Every stochastic routine in the package draws from an :class:`RngStream`.
A stream is identified by a master ``seed`` and a ``stream_id``; the pair is
hashed through :class:`numpy.random.SeedSequence` so that each (repeat, chain)
index gets its own statistically independent generator and results do not
depend on scheduling order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .errors import BracketError, DomainError

__all__ = [
    "RngStream",
    "QuantileFn",
    "standard_normal_vector",
    "erf",
    "norm_cdf",
    "bessel_k",
    "laplace_cdf",
    "laplace_quantile",
    "laplace_quantile_fn",
    "numeric_quantile",
    "numeric_quantile_fn",
]


def _spawn_key(stream_id) -> tuple[int, ...]:
    if isinstance(stream_id, (tuple, list)):
        return tuple(int(s) for s in stream_id)
    return (int(stream_id),)


@dataclass
class RngStream:
    """Reproducible normal/uniform source keyed by ``(seed, stream_id)``.

    ``counter`` counts scalar variates handed out so far. Two streams built
    from the same key and queried with the same call sequence return
    bit-identical arrays.
    """

    seed: int
    stream_id: int | tuple[int, ...] = 0
    counter: int = 0
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ss = np.random.SeedSequence(int(self.seed) & 0xFFFFFFFFFFFFFFFF,
                                    spawn_key=_spawn_key(self.stream_id))
        self._gen = np.random.Generator(np.random.SFC64(ss))

    def substream(self, index: int) -> "RngStream":
        """Independent child stream, e.g. for a second noise source in one chain."""
        return RngStream(self.seed, _spawn_key(self.stream_id) + (int(index),))

    def normal(self, shape) -> np.ndarray:
        out = self._gen.standard_normal(shape)
        self.counter += out.size
        return out

    def uniform(self, low, high, shape) -> np.ndarray:
        out = self._gen.uniform(low, high, shape)
        self.counter += out.size
        return out

    def laplace(self, loc, scale, shape) -> np.ndarray:
        out = self._gen.laplace(loc, scale, shape)
        self.counter += out.size
        return out


def standard_normal_vector(rng: RngStream, d: int) -> np.ndarray:
    """Draw ``d`` independent N(0, 1) variates; advances ``rng.counter`` by ``d``."""
    if d < 1:
        raise DomainError(f"dimension must be >= 1, got {d}")
    return rng.normal(d)


def erf(x):
    """Error function, accurate to double precision (scalar or array)."""
    if np.ndim(x) == 0:
        return math.erf(float(x))
    return special.erf(np.asarray(x, dtype=float))


def norm_cdf(x):
    """Standard normal CDF, computed through ``erfc`` to keep the lower tail accurate."""
    return 0.5 * special.erfc(-np.asarray(x, dtype=float) / math.sqrt(2.0))


def bessel_k(v, x):
    """Modified Bessel function of the second kind ``K_v(x)`` for ``x > 0``.

    Raises
    ------
    DomainError
        If any ``x`` is not strictly positive.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(~(xa > 0)):
        raise DomainError("bessel_k requires x > 0")
    out = special.kv(v, xa)
    return float(out) if np.ndim(out) == 0 else out


def laplace_cdf(x, loc=0.0, scale=1.0):
    z = (np.asarray(x, dtype=float) - loc) / scale
    out = np.where(z < 0, 0.5 * np.exp(np.minimum(z, 0.0)), 1.0 - 0.5 * np.exp(-np.maximum(z, 0.0)))
    return float(out) if out.ndim == 0 else out


def laplace_quantile(p, loc=0.0, scale=1.0):
    """Inverse CDF of Laplace(loc, scale).

    Raises
    ------
    DomainError
        If ``p`` is outside the open interval (0, 1) or ``scale <= 0``.
    """
    if scale <= 0:
        raise DomainError("scale must be positive")
    pa = np.asarray(p, dtype=float)
    if np.any(~((pa > 0) & (pa < 1))):
        raise DomainError("p must lie in (0, 1)")
    out = np.where(pa < 0.5, loc + scale * np.log(2 * pa), loc - scale * np.log(2 - 2 * pa))
    return float(out) if out.ndim == 0 else out


def numeric_quantile(cdf: Callable, p, bracket: Sequence[float], tol: float = 1e-10,
                     max_iter: int = 200):
    """Invert a monotone ``cdf`` by vectorised bisection.

    Iterates until ``|cdf(x) - p| <= tol`` or the bracket collapses to
    floating-point resolution. ``cdf`` must accept arrays.

    Raises
    ------
    BracketError
        If some ``p`` lies outside ``[cdf(lo), cdf(hi)]``.
    """
    lo_x, hi_x = float(bracket[0]), float(bracket[1])
    pa = np.atleast_1d(np.asarray(p, dtype=float))
    c_lo, c_hi = cdf(np.array([lo_x]))[0], cdf(np.array([hi_x]))[0]
    if np.any(pa < c_lo) or np.any(pa > c_hi):
        raise BracketError(f"p not bracketed by cdf on [{lo_x}, {hi_x}]")
    lo = np.full_like(pa, lo_x)
    hi = np.full_like(pa, hi_x)
    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        c = cdf(mid)
        done = np.abs(c - pa) <= tol
        if np.all(done | (hi - lo <= 4 * np.spacing(np.abs(mid) + 1e-300))):
            break
        below = c < pa
        lo = np.where(~done & below, mid, lo)
        hi = np.where(~done & ~below, mid, hi)
    return float(mid[0]) if np.ndim(p) == 0 else mid.reshape(np.shape(p))


@dataclass(frozen=True)
class QuantileFn:
    """Quantile function ``p -> Q(p)`` with a record of how it is evaluated.

    ``kind`` is ``"analytic"`` or ``"numeric"``; numeric ones keep their CDF
    and bracket so the inversion can be audited.
    """

    fn: Callable
    kind: str = "analytic"
    cdf: Callable | None = None
    bracket: tuple[float, float] | None = None

    def __call__(self, p):
        return self.fn(p)


def laplace_quantile_fn(loc: float = 0.0, scale: float = 1.0) -> QuantileFn:
    return QuantileFn(lambda p: laplace_quantile(p, loc, scale), "analytic",
                      cdf=lambda x: laplace_cdf(x, loc, scale))


def numeric_quantile_fn(cdf: Callable, bracket: tuple[float, float]) -> QuantileFn:
    return QuantileFn(lambda p: numeric_quantile(cdf, p, bracket), "numeric", cdf=cdf,
                      bracket=tuple(bracket))
