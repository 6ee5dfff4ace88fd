"""Quick self-checks against independent oracles (used by ``alang check``)."""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import integrate

from .metrics import brute_force_w2_discrete
from .numerics import RngStream, bessel_k, erf, laplace_cdf, laplace_quantile, numeric_quantile
from .potentials import heavy_tail_potential, logistic_loss, student_t_pair
from .samplers import AnchorPair, SamplerConfig, run_chain
from .smoothing import l1_gaussian_closed_form, smoothing_gap_bound


def _erf_series(x: float, terms: int = 80) -> float:
    total, term = 0.0, x
    for n in range(terms):
        total += term / (2 * n + 1)
        term *= -x * x / (n + 1)
    return 2.0 / math.sqrt(math.pi) * total


def _check_erf():
    err = max(abs(erf(x) - _erf_series(x)) for x in np.linspace(-3, 3, 61))
    return err <= 1e-12, f"max |erf - series| = {err:.2e}"


def _check_bessel():
    quad = integrate.quad(lambda t: math.exp(-math.cosh(t)), 0, 40, epsabs=1e-14, epsrel=1e-13)[0]
    e0 = abs(bessel_k(0, 1.0) - quad) / quad
    half = math.sqrt(math.pi / 4) * math.exp(-2)
    e1 = abs(bessel_k(0.5, 2.0) - half) / half
    return max(e0, e1) <= 1e-10, f"rel err K0(1) {e0:.1e}, K1/2(2) {e1:.1e}"


def _check_quantiles():
    xs = np.linspace(-5, 5, 100)
    err = np.max(np.abs(laplace_quantile(laplace_cdf(xs, 0.3, 0.7), 0.3, 0.7) - xs))

    def cdf(x):
        return 0.5 + (np.arctan(x) + x / (1 + x * x)) / math.pi

    root = numeric_quantile(cdf, 0.9, (-50, 50))
    return err <= 1e-12 and abs(cdf(root) - 0.9) <= 1e-10, f"roundtrip {err:.1e}, root {root:.10f}"


def _fd_rel_err(pot, x, h=1e-6):
    g = pot.grad(x)
    fd = np.array([(pot.value(x + h * e) - pot.value(x - h * e)) / (2 * h) for e in np.eye(x.size)])
    return float(np.max(np.abs(fd - g)) / max(1.0, float(np.max(np.abs(g)))))


def _check_gradients():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(40, 3))
    y = (rng.random(40) < 0.5).astype(float)
    pots = [heavy_tail_potential(3.0, 2), logistic_loss(X, y), student_t_pair(4.0).U]
    errs = [_fd_rel_err(p, rng.normal(size=p.dim)) for p in pots]
    return max(errs) <= 1e-5, f"max relative FD error {max(errs):.1e}"


def _check_reduction_and_equivalence():
    U = heavy_tail_potential(2.0)
    same = AnchorPair(U, U)
    cfg = SamplerConfig(0.01, 200)
    a = run_chain("anchored", cfg, same, np.array([0.5]), RngStream(7)).trajectory
    u = run_chain("ula", cfg, same, np.array([0.5]), RngStream(7)).trajectory
    pair = AnchorPair(U, heavy_tail_potential(1.0, check_integrable=False))
    x = run_chain("anchored", cfg, pair, np.array([0.5]), RngStream(8)).trajectory
    z = run_chain("timechange", cfg, pair, np.array([0.5]), RngStream(8)).trajectory
    rel = float(np.max(np.abs(x - z) / np.maximum(1.0, np.abs(x))))
    return bool(np.array_equal(a, u)) and rel <= 1e-10, f"bitwise U=U0: {np.array_equal(a, u)}, coupling {rel:.1e}"


def _check_gap():
    worst = 0.0
    for d, mu in itertools.product((1, 4), (0.1, 1.0)):
        x = np.random.default_rng(d).uniform(-3, 3, (500, d))
        gap = np.max(np.abs(np.sum(np.abs(x), -1) - l1_gaussian_closed_form(x, mu)[0]))
        worst = max(worst, gap / smoothing_gap_bound(math.sqrt(d), mu, d))
    return worst <= 1.0, f"max gap / bound = {worst:.3f}"


def _check_w2_oracle():
    rng = np.random.default_rng(5)
    a, b = rng.normal(size=6), rng.normal(size=6)
    best = min(math.sqrt(np.mean((a - b[list(p)]) ** 2)) for p in itertools.permutations(range(6)))
    return abs(best - brute_force_w2_discrete(a, b)) <= 1e-12, f"exhaustive {best:.6f}"


CHECKS = [
    ("erf vs Maclaurin series", _check_erf),
    ("bessel_k vs integral and closed form", _check_bessel),
    ("quantile inversion", _check_quantiles),
    ("gradients vs finite differences", _check_gradients),
    ("U=U0 reduction and time-change coupling", _check_reduction_and_equivalence),
    ("l1 smoothing gap bound", _check_gap),
    ("sorted coupling vs permutations", _check_w2_oracle),
]


def run_checks():
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # report and keep going
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        yield name, bool(ok), detail
