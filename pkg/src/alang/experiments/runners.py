"""Experiment drivers: build targets from a spec, run repeats, reduce metrics."""

from __future__ import annotations

import math
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import special, stats

from .. import __version__
from ..errors import NumericAbort, SpecError
from ..metrics import TrimmedW2, classification_accuracy
from ..numerics import RngStream, laplace_quantile_fn, numeric_quantile_fn
from ..potentials import (CompositePotential, Penalty, Potential, heavy_tail_potential,
                          laplace1d_potential, logistic_loss, multivariate_laplace_potential,
                          smoothed_penalty)
from ..samplers import AnchorPair, SamplerConfig, _anchored_update, _time_change_update, run_chain
from ..smoothing import SmoothingSpec, l1_gaussian_smoothed_potential, mc_smoothed_value_and_grad, \
    mc_smoothed_grad
from .datasets import Dataset, load_dataset
from .spec import ExperimentSpec

__all__ = [
    "ExperimentResult",
    "run_experiment",
    "run_laplace_experiment",
    "run_heavytail_experiment",
    "run_logistic_experiment",
    "run_nn_experiment",
    "heavy_tail_marginal_quantile",
    "TwoLayerNet",
]


def version_string() -> str:
    try:
        rev = subprocess.run(["git", "rev-parse", "--short", "HEAD"], capture_output=True, text=True,
                             cwd=Path(__file__).resolve().parent, timeout=5)
        if rev.returncode == 0 and rev.stdout.strip():
            return f"{__version__}+g{rev.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


@dataclass
class ExperimentResult:
    """Per-repeat metric traces and their reductions.

    ``per_repeat[metric]`` has shape ``(n_repeats, len(iterations))`` and holds
    NaN after a repeat stopped early. ``iterations`` starts at
    ``record_every`` and ends at ``n_steps``; the pre-run value is kept in
    ``initial``. ``hits`` is the first iteration at which each repeat's
    primary metric fell below the threshold (``inf`` if never).
    """

    spec: ExperimentSpec
    metric: str
    iterations: np.ndarray
    per_repeat: dict
    initial: dict = field(default_factory=dict)
    hits: np.ndarray | None = None
    wall_time: float = 0.0
    version: str = ""
    diagnostics: dict = field(default_factory=dict)

    def mean(self, metric: str | None = None) -> np.ndarray:
        vals = self.per_repeat[metric or self.metric]
        with np.errstate(invalid="ignore"):
            cnt = np.sum(~np.isnan(vals), axis=0)
            return np.where(cnt > 0, np.nansum(vals, axis=0) / np.maximum(cnt, 1), np.nan)

    def stderr(self, metric: str | None = None) -> np.ndarray:
        vals = self.per_repeat[metric or self.metric]
        cnt = np.sum(~np.isnan(vals), axis=0)
        out = np.full(vals.shape[1], np.nan)
        ok = cnt > 1
        if ok.any():
            out[ok] = np.nanstd(vals[:, ok], axis=0, ddof=1) / np.sqrt(cnt[ok])
        out[cnt == 1] = 0.0
        return out

    def count(self, metric: str | None = None) -> np.ndarray:
        return np.sum(~np.isnan(self.per_repeat[metric or self.metric]), axis=0)

    @property
    def iterations_to_threshold(self) -> float:
        """Mean over repeats of the first crossing; ``inf`` if any repeat never crossed."""
        if self.hits is None or self.hits.size == 0:
            return math.inf
        return float(np.mean(self.hits))

    def mean_series_crossing(self) -> float:
        """First recorded iteration at which the mean series is below the threshold."""
        thr = self.spec.threshold
        if thr is None:
            return math.inf
        below = np.flatnonzero(self.mean() < thr)
        return float(self.iterations[below[0]]) if below.size else math.inf

    @property
    def final(self) -> float:
        """Mean over repeats of each repeat's last recorded value (early-stopped repeats included)."""
        vals = self.per_repeat[self.metric]
        if vals.shape[1] == 0:
            return float(np.mean(self.initial.get(self.metric, [np.nan])))
        seen = ~np.isnan(vals)
        last = vals.shape[1] - 1 - np.argmax(seen[:, ::-1], axis=1)
        picked = np.where(seen.any(axis=1), vals[np.arange(vals.shape[0]), last], np.nan)
        return float(np.mean(picked)) if seen.any() else math.nan

    def tail_mean(self, fraction: float = 0.2, metric: str | None = None) -> float:
        """Average of the mean series over the last ``fraction`` of recorded iterations."""
        m = self.mean(metric)
        if m.size == 0:
            return math.nan
        start = int(math.floor((1 - fraction) * m.size))
        return float(np.nanmean(m[min(start, m.size - 1):]))


class _Tracker:
    """Evaluates metrics after each step, records on the thinning grid, detects the threshold."""

    def __init__(self, spec: ExperimentSpec, evaluate, n_records: int, primary: str):
        self.spec, self.evaluate, self.primary = spec, evaluate, primary
        self.rows = {}
        self.n_records = n_records
        self.hit = math.inf

    def start(self, x):
        self.rows = {}
        self.hit = math.inf
        vals = self.evaluate(x)
        self._check(0, vals)
        return vals

    def _check(self, k, vals):
        thr = self.spec.threshold
        if thr is not None and math.isinf(self.hit) and vals[self.primary] < thr:
            self.hit = k

    def __call__(self, k, x):
        spec = self.spec
        on_grid = k % spec.record_every == 0
        need = on_grid or (spec.threshold is not None and math.isinf(self.hit))
        if not need:
            return False
        vals = self.evaluate(x)
        self._check(k, vals)
        if on_grid:
            for name, v in vals.items():
                self.rows.setdefault(name, np.full(self.n_records, np.nan))[k // spec.record_every - 1] = v
        return spec.stop_at_threshold and not math.isinf(self.hit)


def _grid(spec: ExperimentSpec) -> np.ndarray:
    return np.arange(spec.record_every, spec.n_steps + 1, spec.record_every)


def _repeat_rng(spec: ExperimentSpec, r: int) -> RngStream:
    return RngStream(spec.seed, r)


def _collect(spec, metric, per, initial, hits, t0, diag) -> ExperimentResult:
    iters = _grid(spec)
    stacked = {k: np.vstack(v) if v else np.empty((0, iters.size)) for k, v in per.items()}
    init = {k: np.asarray(v) for k, v in initial.items()}
    return ExperimentResult(spec, metric, iters, stacked, init, np.asarray(hits, dtype=float),
                            time.perf_counter() - t0, version_string(), diag)


def _run_particles(spec: ExperimentSpec, target, dim: int, evaluate, metric: str,
                   short_circuit: bool) -> ExperimentResult:
    """Shared loop for particle-cloud experiments (one chain per particle)."""
    t0 = time.perf_counter()
    iters = _grid(spec)
    per, initial, hits = {}, {}, []
    clamps = 0
    smoothing = SmoothingSpec(spec.mu, spec.N_mc) if isinstance(target, CompositePotential) else None
    # the full trajectory of 5000 particles is never stored; only the last state is kept
    config = SamplerConfig(spec.eta, spec.n_steps, smoothing, record_every=max(spec.n_steps, 1))
    for r in range(spec.n_repeats):
        rng = _repeat_rng(spec, r)
        x0 = spec.prior.sample(rng, (spec.n_chains, dim))
        track = _Tracker(spec, evaluate, iters.size, metric)
        for name, v in track.start(x0).items():
            initial.setdefault(name, []).append(v)
        run = run_chain(spec.sampler, config, target, x0, rng, callback=track,
                        exponent_clamp=spec.exponent_clamp)
        clamps += run.diagnostics["clamp_count"]
        for name in initial:
            per.setdefault(name, []).append(track.rows.get(name, np.full(iters.size, np.nan)))
        hits.append(track.hit)
        if short_circuit and spec.stop_at_threshold and math.isinf(track.hit):
            # one repeat that never crossed already makes the average infinite
            break
    return _collect(spec, metric, per, initial, hits, t0,
                    {"clamp_count": clamps, "repeats_run": len(hits)})


def laplace_target(spec: ExperimentSpec):
    """Target object and per-coordinate quantile functions for a Laplace spec."""
    if spec.kind == "laplace1d":
        lam = 1.0 / spec.b
        quantiles = [laplace_quantile_fn(0.0, spec.b)]
        if spec.smoothing == "closed_form":
            if spec.sampler == "ula":
                return l1_gaussian_smoothed_potential(spec.mu, lam, 1), quantiles
            return AnchorPair(laplace1d_potential(spec.b), l1_gaussian_smoothed_potential(spec.mu, lam, 1),
                              spec.exponent_clamp), quantiles
        return CompositePotential(None, Penalty("L1", lam), 0.0, 1), quantiles
    if spec.smoothing == "closed_form":
        raise SpecError("closed-form smoothing is only available for laplace1d")
    S = spec.sigma_matrix()
    pot = multivariate_laplace_potential(S)
    # each marginal is Laplace with standard deviation sqrt(S_jj), i.e. scale sqrt(S_jj / 2)
    quantiles = [laplace_quantile_fn(0.0, math.sqrt(S[j, j] / 2.0)) for j in range(S.shape[0])]
    return CompositePotential(None, pot, 0.0, S.shape[0]), quantiles


def _w2_evaluator(quantiles, n, trim):
    evals = [TrimmedW2(q, n, trim) for q in quantiles]

    def evaluate(x):
        sq = [ev(x[:, j]) ** 2 for j, ev in enumerate(evals)]
        return {"w2": math.sqrt(sum(sq) / len(sq))}

    return evaluate


def run_laplace_experiment(spec: ExperimentSpec, short_circuit: bool = True) -> ExperimentResult:
    """Particle clouds on a Laplace target, tracking (sliced) trimmed W2 every iteration.

    With ``stop_at_threshold`` each repeat ends at its first crossing and,
    when ``short_circuit`` is set, the remaining repeats are skipped once one
    repeat runs out of steps without crossing.
    """
    if spec.kind not in ("laplace1d", "laplace_md"):
        raise SpecError(f"not a Laplace experiment: {spec.kind}")
    target, quantiles = laplace_target(spec)
    evaluate = _w2_evaluator(quantiles, spec.n_chains, spec.trim)
    return _run_particles(spec, target, len(quantiles), evaluate, "w2", short_circuit)


def heavy_tail_marginal_quantile(iota: float, dim: int = 1):
    """Quantile function of one coordinate of ``pi ~ (1 + |x|^2)^(-iota)``.

    Integrating out ``dim - 1`` coordinates leaves ``(1 + x^2)^(-iota')``
    with ``iota' = iota - (dim - 1)/2``: a Student-t with ``2 iota' - 1``
    degrees of freedom scaled by ``1/sqrt(2 iota' - 1)``. The CDF is
    inverted numerically.
    """
    e = iota - (dim - 1) / 2.0
    nu = 2.0 * e - 1.0
    if not nu > 0:
        raise SpecError("marginal is not normalisable for this iota and dim")
    root = math.sqrt(nu)

    def cdf(x):
        return stats.t.cdf(np.asarray(x, dtype=float) * root, nu)

    return numeric_quantile_fn(cdf, (-1e8, 1e8))


def run_heavytail_experiment(spec: ExperimentSpec) -> ExperimentResult:
    """Anchored pair ``iota log(1+|x|^2)`` / ``beta log(1+|x|^2)``; ULA runs on ``U`` itself."""
    if spec.kind != "heavytail":
        raise SpecError(f"not a heavy-tail experiment: {spec.kind}")
    d = spec.dim
    U = heavy_tail_potential(spec.iota, d)
    if spec.sampler == "ula":
        target = U
    else:
        target = AnchorPair(U, heavy_tail_potential(spec.beta, d, check_integrable=False), spec.exponent_clamp)
    q = heavy_tail_marginal_quantile(spec.iota, d)
    evaluate = _w2_evaluator([q] * d, spec.n_chains, spec.trim)
    return _run_particles(spec, target, d, evaluate, "w2", short_circuit=False)


def _zero_penalty(d):
    return Potential(d, lambda x: np.zeros(np.shape(x)[:-1]), lambda x: np.zeros(np.shape(x)), name="zero")


def logistic_target(spec: ExperimentSpec, data: Dataset):
    """``(target, U)`` for the logistic experiment; ``U`` is the exact composite."""
    d = data.dim
    f = logistic_loss(data.X, data.y, spec.reduction)
    g = Penalty(spec.penalty, spec.lam, spec.a) if spec.lam > 0 else _zero_penalty(d)
    U = CompositePotential(f, g, spec.ridge, d)
    if spec.kind == "logistic_gauss":
        return U, U
    if spec.lam > 0:
        gs = smoothed_penalty(g, spec.eps, d)
    else:
        gs = g
    U0 = Potential(d, lambda x: U.smooth_value(x) + gs.value(x), lambda x: U.smooth_grad(x) + gs.grad(x),
                   name="logistic_anchor")
    return AnchorPair(U.as_potential(), U0, spec.exponent_clamp), U


def _resolve_dataset(spec: ExperimentSpec, data: Dataset | None) -> Dataset:
    if data is not None:
        return data
    return load_dataset(spec.dataset, spec.dataset_format, spec.standardize)


def run_logistic_experiment(spec: ExperimentSpec, data: Dataset | None = None) -> ExperimentResult:
    """Bayesian logistic regression; one chain per repeat, accuracy at every recorded iterate.

    ``logistic_det`` anchors on the deterministic smoothing of the penalty;
    ``logistic_gauss`` estimates the Gaussian smoothing by Monte Carlo at
    each step. The ``ula`` sampler follows the reference gradient alone.
    """
    if spec.kind not in ("logistic_det", "logistic_gauss"):
        raise SpecError(f"not a logistic experiment: {spec.kind}")
    data = _resolve_dataset(spec, data)
    t0 = time.perf_counter()
    target, U = logistic_target(spec, data)
    smoothing = SmoothingSpec(spec.mu, spec.N_mc) if spec.kind == "logistic_gauss" else None
    config = SamplerConfig(spec.eta, spec.n_steps, smoothing, spec.record_every)
    per, initial, clamps = {"accuracy": [], "loss": []}, {"accuracy": [], "loss": []}, 0
    for r in range(spec.n_repeats):
        rng = _repeat_rng(spec, r)
        x0 = spec.prior.sample(rng, (1, data.dim))
        run = run_chain(spec.sampler, config, target, x0, rng, exponent_clamp=spec.exponent_clamp)
        clamps += run.diagnostics["clamp_count"]
        w = run.trajectory[:, 0, :]
        acc = classification_accuracy(w, data.X, data.y)
        loss = U.value(w)
        initial["accuracy"].append(acc[0])
        initial["loss"].append(loss[0])
        per["accuracy"].append(acc[1:])
        per["loss"].append(loss[1:])
    return _collect(spec, "accuracy", per, initial, [], t0,
                    {"clamp_count": clamps, "n": data.n, "dim": data.dim, "raw_dim": data.raw_dim})


class TwoLayerNet:
    """``sigmoid(relu(X W1) w2)`` with mean binary cross-entropy loss.

    Weight arrays may carry leading batch axes: ``W1`` is ``(..., d, h)`` and
    ``w2`` is ``(..., h)``.
    """

    def __init__(self, X, y):
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=float)

    def logits(self, W1, w2):
        H = np.maximum(self.X @ W1, 0.0)
        return np.einsum("...nh,...h->...n", H, w2), H

    def loss(self, W1, w2):
        z, _ = self.logits(W1, w2)
        return np.mean(np.logaddexp(0.0, z) - self.y * z, axis=-1)

    def grad_w2(self, W1, w2):
        z, H = self.logits(W1, w2)
        return np.einsum("...n,...nh->...h", special.expit(z) - self.y, H) / self.y.size

    def accuracy(self, W1, w2):
        z, _ = self.logits(W1, w2)
        return np.mean((z >= 0.0) == (self.y == 1), axis=-1)


class _FirstLayerLoss:
    """Loss as a function of the flattened first-layer weights, second layer held fixed."""

    def __init__(self, net: TwoLayerNet, d: int, h: int):
        self.net, self.d, self.h = net, d, h
        self.w2 = None

    def value(self, flat):
        flat = np.asarray(flat)
        W1 = flat.reshape(flat.shape[:-1] + (self.d, self.h))
        w2 = np.broadcast_to(self.w2, flat.shape[:-1] + (self.h,))
        return self.net.loss(W1, w2)


def run_nn_experiment(spec: ExperimentSpec, data: Dataset | None = None) -> ExperimentResult:
    """Two-layer ReLU network.

    First-layer weights move by the chosen sampler using Monte Carlo
    Gaussian smoothing of the loss in ``W1``; second-layer weights move by
    exact-gradient ULA. Both updates are computed from the current pair of
    weights and applied together.
    """
    if spec.kind != "neuralnet":
        raise SpecError(f"not a neural-network experiment: {spec.kind}")
    data = _resolve_dataset(spec, data)
    t0 = time.perf_counter()
    net = TwoLayerNet(data.X, data.y)
    d, h = data.dim, spec.hidden
    smooth = SmoothingSpec(spec.mu, spec.N_mc)
    g = _FirstLayerLoss(net, d, h)
    eta, root = spec.eta, math.sqrt(2 * spec.eta)
    per, initial = {"accuracy": [], "loss": []}, {"accuracy": [], "loss": []}
    iters = _grid(spec)
    clamps = 0
    for r in range(spec.n_repeats):
        rng = _repeat_rng(spec, r)
        w1 = spec.prior.sample(rng, (1, d * h))
        w2 = spec.prior.sample(rng, (h,))
        rows = {"accuracy": np.full(iters.size, np.nan), "loss": np.full(iters.size, np.nan)}
        W1 = w1.reshape(d, h)
        initial["accuracy"].append(net.accuracy(W1, w2))
        initial["loss"].append(net.loss(W1, w2))
        ell = np.zeros(1)
        for k in range(1, spec.n_steps + 1):
            g.w2 = w2
            if spec.sampler == "ula":
                grad1 = mc_smoothed_grad(g, w1, smooth, rng)
                gap = None
            else:
                v0, grad1 = mc_smoothed_value_and_grad(g, w1, smooth, rng)
                gap = g.value(w1) - v0
            grad2 = net.grad_w2(w1.reshape(d, h), w2)
            xi1, xi2 = rng.normal(w1.shape), rng.normal(w2.shape)
            if spec.sampler == "ula":
                w1_new = w1 - eta * grad1 + root * xi1
            else:
                hcl = np.clip(gap, -spec.exponent_clamp, spec.exponent_clamp)
                clamps += int(np.sum(hcl != gap))
                if spec.sampler == "anchored":
                    w1_new = _anchored_update(w1, hcl, grad1, eta, xi1)[0]
                else:
                    w1_new, ell = _time_change_update(w1, ell, hcl, grad1, eta, xi1)
            w2_new = w2 - eta * grad2 + root * xi2
            if not (np.all(np.isfinite(w1_new)) and np.all(np.isfinite(w2_new))):
                raise NumericAbort(k, np.concatenate([w1.ravel(), w2]))
            w1, w2 = w1_new, w2_new
            if k % spec.record_every == 0:
                W1 = w1.reshape(d, h)
                i = k // spec.record_every - 1
                rows["accuracy"][i] = net.accuracy(W1, w2)
                rows["loss"][i] = net.loss(W1, w2)
        for key in per:
            per[key].append(rows[key])
    return _collect(spec, "accuracy", per, initial, [], t0,
                    {"clamp_count": clamps, "n": data.n, "dim": data.dim})


def run_experiment(spec: ExperimentSpec, data: Dataset | None = None) -> ExperimentResult:
    if spec.kind in ("laplace1d", "laplace_md"):
        return run_laplace_experiment(spec)
    if spec.kind == "heavytail":
        return run_heavytail_experiment(spec)
    if spec.kind in ("logistic_det", "logistic_gauss"):
        return run_logistic_experiment(spec, data)
    return run_nn_experiment(spec, data)
