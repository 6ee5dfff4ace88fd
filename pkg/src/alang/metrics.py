"""Sample-quality metrics: trimmed 1-D W2, sliced W2, TV of histograms, accuracy."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .errors import DomainError, ShapeError, SizeError

__all__ = [
    "SampleSet",
    "TrimmedW2",
    "w2_1d_trimmed",
    "sliced_w2",
    "classification_accuracy",
    "tv_histogram",
    "brute_force_w2_discrete",
]


@dataclass(frozen=True)
class SampleSet:
    """``n x d`` matrix of samples plus provenance (sampler, seed, steps, ...)."""

    data: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ShapeError("SampleSet needs an (n, d) array with n >= 1")
        if not np.all(np.isfinite(arr)):
            raise DomainError("SampleSet entries must be finite")
        object.__setattr__(self, "data", arr)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def column(self, j: int) -> np.ndarray:
        return self.data[:, j]


def _kept_indices(n: int, trim: float) -> np.ndarray:
    # 1-based i with trim*n < i <= (1 - trim)*n; the epsilon absorbs float noise in trim*n
    lo = math.floor(trim * n + 1e-9)
    hi = math.floor((1.0 - trim) * n + 1e-9)
    return np.arange(lo + 1, hi + 1)


class TrimmedW2:
    """Trimmed 1-D W2 against a fixed quantile function for samples of size ``n``.

    The quantile grid is evaluated once, which matters when ``q`` is a
    numerical inversion and the metric is tracked at every iteration.
    """

    def __init__(self, q: Callable, n: int, trim: float = 0.01):
        if not 0 <= trim < 0.5:
            raise DomainError("trim must lie in [0, 0.5)")
        if n < 10:
            raise SizeError(f"need at least 10 samples, got {n}")
        self.n, self.trim = n, trim
        self.idx = _kept_indices(n, trim)
        if self.idx.size == 0:
            raise SizeError("no samples left after trimming")
        self.quantiles = np.asarray(q(self.idx / n), dtype=float)

    def __call__(self, sample) -> float:
        x = np.sort(np.asarray(sample, dtype=float).ravel())
        if x.size != self.n:
            raise ShapeError(f"expected {self.n} samples, got {x.size}")
        return float(np.sqrt(np.mean((x[self.idx - 1] - self.quantiles) ** 2)))


def w2_1d_trimmed(sample, q: Callable, trim: float = 0.01) -> float:
    """RMS distance between the sorted sample and the quantiles ``Q(i/n)``.

    Indices in the lower and upper ``trim`` fraction are dropped from both
    the sample order statistics and the quantile grid.
    """
    x = np.asarray(sample, dtype=float).ravel()
    return TrimmedW2(q, x.size, trim)(x)


def sliced_w2(samples, marginal_quantiles: Sequence[Callable], trim: float = 0.01) -> float:
    """Axis-aligned sliced W2: root mean of squared per-coordinate trimmed W2."""
    s = np.asarray(samples, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    d = s.shape[1]
    if len(marginal_quantiles) != d:
        raise ShapeError(f"{len(marginal_quantiles)} quantile functions for {d} columns")
    sq = [w2_1d_trimmed(s[:, j], marginal_quantiles[j], trim) ** 2 for j in range(d)]
    return float(np.sqrt(np.mean(sq)))


def classification_accuracy(weights, X, y):
    """Fraction of rows with ``(sigmoid(X w) >= 1/2) == y``.

    Ties (``X w == 0``) are predicted as class 1. ``weights`` may carry
    leading batch axes, in which case one accuracy per weight vector is
    returned.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).ravel()
    w = np.asarray(weights, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.size or w.shape[-1] != X.shape[1]:
        raise ShapeError(f"weights {w.shape}, X {X.shape}, y {y.shape} are inconsistent")
    pred = (w @ X.T) >= 0.0
    return np.mean(pred == (y == 1), axis=-1)


def tv_histogram(sample, density: Callable[[float], float], bins: int = 50,
                 range: tuple[float, float] = (-4.0, 4.0)) -> float:
    """Half the L1 distance between binned empirical mass and binned density mass.

    Empirical mass is normalised by the full sample size; density mass per
    bin comes from adaptive quadrature.
    """
    lo, hi = range
    if bins < 2:
        raise DomainError("need at least 2 bins")
    if not hi > lo:
        raise DomainError("empty histogram range")
    x = np.asarray(sample, dtype=float).ravel()
    counts, edges = np.histogram(x, bins=bins, range=(lo, hi))
    emp = counts / x.size
    ref = np.array([integrate.quad(density, a, b, limit=200)[0] for a, b in zip(edges[:-1], edges[1:])])
    return float(0.5 * np.sum(np.abs(emp - ref)))


def brute_force_w2_discrete(a, b) -> float:
    """W2 between two equal-size empirical measures on the line (sorted coupling)."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size != b.size:
        raise ShapeError("samples must have equal length")
    return float(np.sqrt(np.mean((a - b) ** 2)))

