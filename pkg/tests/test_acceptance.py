"""Exit criteria. Each test records one PASS/FAIL line through the ``criterion`` fixture."""

import math
import time

import numpy as np
import pytest
from scipy import integrate, stats

from alang import AnchorPair, Potential, RngStream, SamplerConfig, brute_force_w2_discrete, \
    l1_gaussian_closed_form, mc_smoothed_grad, run_chain, select_hyperparameters, SmoothingSpec, \
    smoothing_gap_bound, theoretical_eta_max_and_C, tv_histogram
from alang.experiments import ExperimentSpec, load_dataset, run_heavytail_experiment, run_laplace_experiment, \
    run_logistic_experiment
from alang.numerics import numeric_quantile_fn
from alang.potentials import heavy_tail_potential, laplace1d_potential, student_t_pair
from alang.smoothing import l1_gaussian_smoothed_potential

from test_bounds import assert_selection_conditions_hold, constants, hand_case

pytestmark = pytest.mark.acceptance

B = 1 / math.sqrt(2)      # unit-variance Laplace scale


def laplace_pair(mu):
    return AnchorPair(laplace1d_potential(B), l1_gaussian_smoothed_potential(mu, 1 / B, 1))


def heavy_pair():
    return AnchorPair(heavy_tail_potential(2.0), heavy_tail_potential(1.0, check_integrable=False))


def student_pair():
    return student_t_pair(4.0).pair()


def l1(x):
    return np.sum(np.abs(x), axis=-1)


def test_criterion_1_equivalence(criterion):
    t0 = time.perf_counter()
    x0 = 2.0 * RngStream(11).normal((10, 1))
    worst = {}
    for name, pair in (("laplace", laplace_pair(1.0)), ("heavy_tail", heavy_pair()), ("student_t", student_pair())):
        cfg = SamplerConfig(0.05, 1000)
        a = run_chain("anchored", cfg, pair, x0, RngStream(12)).trajectory
        z = run_chain("timechange", cfg, pair, x0, RngStream(12)).trajectory
        worst[name] = float(np.max(np.abs(a - z) / np.maximum(np.abs(z), 1.0)))
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-10 and elapsed < 1.0
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    assert criterion(1, ok, f"max relative error {detail} (limit 1e-10); {elapsed:.2f} s")


def test_criterion_2_reduction(criterion):
    t0 = time.perf_counter()
    same = []
    cfg = SamplerConfig(0.05, 1000)
    x0 = RngStream(13).normal((10, 1))
    for U in (student_t_pair(4.0).U, heavy_tail_potential(2.0)):
        a = run_chain("anchored", cfg, AnchorPair(U, U), x0, RngStream(14)).trajectory
        u = run_chain("ula", cfg, U, x0, RngStream(14)).trajectory
        same.append(np.array_equal(a, u))
    elapsed = time.perf_counter() - t0
    assert criterion(2, all(same) and elapsed < 1.0, f"bitwise equal on {sum(same)}/2 targets; {elapsed:.2f} s")


def test_criterion_3_smoothing_gap(criterion):
    t0 = time.perf_counter()
    lam, rows, ok = 1.5, [], True
    for d in (1, 4, 16):
        x = RngStream(15 + d).uniform(-3, 3, (1000, d))
        for mu in (0.1, 1.0):
            gap = float(np.max(np.abs(lam * l1(x) - l1_gaussian_closed_form(x, mu, lam)[0])))
            bound = lam * math.sqrt(d) * mu * math.sqrt(d)
            assert smoothing_gap_bound(lam * math.sqrt(d), mu, d) == pytest.approx(bound)
            ok &= gap <= bound
            rows.append(f"d={d} mu={mu:g} {gap:.3g}/{bound:.3g}")
    elapsed = time.perf_counter() - t0
    assert criterion(3, ok and elapsed < 1.0, "gap/bound " + ", ".join(rows) + f"; {elapsed:.2f} s")


def test_criterion_4_estimator(criterion):
    t0 = time.perf_counter()
    mu, N = 0.8, 100_000
    points = RngStream(20).uniform(-2, 2, 10)
    z = []
    for i, p in enumerate(points):
        rng = RngStream(21, i)
        xi = rng.normal((N, 1))
        terms = l1(p + mu * xi)[:, None] * xi / mu
        est = mc_smoothed_grad(l1, np.array([p]), SmoothingSpec(mu, N), RngStream(21, i))[0]
        assert est == pytest.approx(terms.mean(), abs=1e-12)
        target = l1_gaussian_closed_form(np.array([p]), mu)[1][0]
        z.append(abs(est - target) / (terms.std(ddof=1) / math.sqrt(N)))
    sizes = np.array([100, 1000, 10_000, 100_000])
    sds = []
    for j, n in enumerate(sizes):
        reps = np.full((200, 1), 0.4)
        g = mc_smoothed_grad(l1, reps, SmoothingSpec(mu, int(n)), RngStream(22, j))[:, 0]
        sds.append(g.std(ddof=1))
    slope = float(np.polyfit(np.log(sizes), np.log(sds), 1)[0])
    elapsed = time.perf_counter() - t0
    ok = max(z) <= 3 and abs(slope + 0.5) <= 0.1 and elapsed < 30
    assert criterion(4, ok, f"max |z| {max(z):.2f} (limit 3), sd slope {slope:.3f} (-0.5 +- 0.1); {elapsed:.1f} s")


def test_criterion_5_stationarity(criterion):
    t0 = time.perf_counter()
    run = run_chain("anchored", SamplerConfig(0.01, 1_000_000), laplace_pair(0.5), np.zeros(1), RngStream(23))
    sample = run.samples(10_000).column(0)
    tv = tv_histogram(sample, lambda x: math.exp(-abs(x) / B) / (2 * B), 50, (-4, 4))
    elapsed = time.perf_counter() - t0
    assert criterion(5, tv <= 0.05 and elapsed < 60, f"TV {tv:.4f} (limit 0.05); {elapsed:.1f} s")


def test_criterion_6_table(criterion):
    t0 = time.perf_counter()
    base = dict(kind="laplace1d", n_chains=5000, n_repeats=10, seed=2024, threshold=0.1, stop_at_threshold=True,
                smoothing="closed_form", n_steps=5000)
    legs = {"anchored mu=1 eta=0.5": (dict(sampler="anchored", mu=1.0, eta=0.5), (2, 12)),
            "anchored mu=1 eta=0.1": (dict(sampler="anchored", mu=1.0, eta=0.1), (70, 650)),
            "ula mu=2 eta=0.1": (dict(sampler="ula", mu=2.0, eta=0.1), None)}
    ok, parts = True, []
    for label, (kw, band) in legs.items():
        res = run_laplace_experiment(ExperimentSpec(**base, **kw))
        k = res.iterations_to_threshold
        good = math.isinf(k) if band is None else band[0] <= k <= band[1]
        ok &= good
        want = "inf" if band is None else f"[{band[0]}, {band[1]}]"
        parts.append(f"{label}: {k:.1f} want {want} ({'ok' if good else 'miss'}; final W2 {res.final:.3f})")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 600
    assert criterion(6, ok, "; ".join(parts) + f"; {elapsed:.0f} s")


def test_criterion_7_heavy_tail(criterion):
    t0 = time.perf_counter()
    base = dict(kind="heavytail", iota=2.0, beta=1.0, eta=0.01, n_steps=5000, n_chains=5000, n_repeats=20,
                record_every=5000, prior="gaussian(10)", seed=7)
    final = {s: run_heavytail_experiment(ExperimentSpec(sampler=s, **base)).final for s in ("anchored", "ula")}
    elapsed = time.perf_counter() - t0
    ok = final["anchored"] < final["ula"] and final["anchored"] < 0.3 and elapsed < 600
    assert criterion(7, ok, f"W2 at 5000: anchored {final['anchored']:.4f}, ula {final['ula']:.4f} "
                            f"(anchored < ula and < 0.3); {elapsed:.0f} s")


def test_criterion_8_student_t(criterion):
    t0 = time.perf_counter()
    run = run_chain("anchored", SamplerConfig(0.05, 1_000_000), student_pair(), np.zeros(1), RngStream(24))
    p = np.arange(1, 10) / 10
    err = float(np.max(np.abs(np.quantile(run.samples(10_000).column(0), p) - stats.t.ppf(p, 4))))
    elapsed = time.perf_counter() - t0
    assert criterion(8, err <= 0.1 and elapsed < 60, f"max decile error {err:.4f} (limit 0.1); {elapsed:.1f} s")


def test_criterion_9_bounds(criterion):
    t0 = time.perf_counter()
    terms, C1, C2, C3, C = hand_case()
    b = theoretical_eta_max_and_C(1.0, 2.0, 0.1, 0.5, 1.2, 4.0, 1.5)
    got = np.array([b.eta_max, b.C1, b.C2, b.C3, b.C])
    want = np.array([min(terms), C1, C2, C3, C])
    rel = float(np.max(np.abs(got - want) / want))
    checked = 0
    for eps in (1.0, 0.5, 0.1):
        for dim in (1, 3):
            c = constants(dim=dim)
            assert_selection_conditions_hold(eps, c, select_hyperparameters(eps, c))
            checked += 1
    elapsed = time.perf_counter() - t0
    assert criterion(9, rel <= 1e-12 and elapsed < 1.0,
                     f"hand case max rel error {rel:.1e}; selection conditions hold on {checked} cases; {elapsed:.2f} s")


def test_criterion_10_logistic(criterion):
    t0 = time.perf_counter()
    data = load_dataset(None, "sklearn:breast_cancer")
    ok, parts = True, []
    for pen in ("L1", "SCAD", "MCP"):
        acc = {}
        for s in ("anchored", "ula"):
            spec = ExperimentSpec(kind="logistic_det", sampler=s, penalty=pen, eta=0.01, n_steps=2000, n_repeats=20,
                                  record_every=10, dataset="sklearn", dataset_format="sklearn:breast_cancer")
            acc[s] = run_logistic_experiment(spec, data).tail_mean(0.2)
        ok &= acc["anchored"] >= 0.90 and acc["anchored"] >= acc["ula"]
        parts.append(f"{pen}: anchored {acc['anchored']:.3f} ula {acc['ula']:.3f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 900
    assert criterion(10, ok, "; ".join(parts) + f" (want anchored >= 0.90 and >= ula); {elapsed:.0f} s")


# synthetic pair for the quantitative bound: U0 = x^2/2, U - U0 = c exp(-x^2/2)
BUMP = 0.2


def bump_pair():
    def h(x):
        return BUMP * np.exp(-x[..., 0] ** 2 / 2)

    U0 = Potential(1, lambda x: np.asarray(x)[..., 0] ** 2 / 2, lambda x: np.asarray(x, dtype=float), name="quad")
    U = Potential(1, lambda x: np.asarray(x)[..., 0] ** 2 / 2 + h(np.asarray(x)),
                  lambda x: np.asarray(x) * (1 - h(np.asarray(x)))[..., None], name="quad+bump")
    return AnchorPair(U, U0)


def bump_constants():
    """m, L and alpha of b = -x e^h, sigma = e^(h/2), read off a fine grid."""
    x = np.linspace(-12, 12, 2_000_001)
    h = BUMP * np.exp(-x ** 2 / 2)
    slope = np.exp(h) * (1 - BUMP * x ** 2 * np.exp(-x ** 2 / 2))     # -b'(x)
    dsigma = -BUMP * x * np.exp(-x ** 2 / 2) / 2 * np.exp(h / 2)
    return float(slope.min()), float(slope.max()), float(np.max(dsigma ** 2))


def test_criterion_11_bound_curve(criterion):
    t0 = time.perf_counter()
    pair = bump_pair()
    dens = lambda t: math.exp(-(t * t / 2 + BUMP * math.exp(-t * t / 2)))
    Z = integrate.quad(dens, -np.inf, np.inf)[0]
    E_pi = integrate.quad(lambda t: t * t * dens(t), -np.inf, np.inf)[0] / Z
    n = 10_000
    # reference: 10^4 chains x 10^3 steps, started at equilibrium scale
    ref = run_chain("anchored", SamplerConfig(0.01, 1000, record_every=1000), pair, RngStream(30).normal((n, 1)),
                    RngStream(31)).final[:, 0]
    cdf = lambda t: np.vectorize(lambda s: integrate.quad(dens, -np.inf, s)[0] / Z)(t)
    q = numeric_quantile_fn(cdf, (-20.0, 20.0))
    ref_vs_quad = float(np.sqrt(np.mean((np.sort(ref) - q((np.arange(n) + 0.5) / n)) ** 2)))

    m, L, alpha = bump_constants()
    x0 = 3.0 + RngStream(32).normal((n, 1))
    bound = theoretical_eta_max_and_C(m, L, alpha, 0.0, math.exp(BUMP / 2), 10.0, E_pi)
    eta = bound.eta_max / 10
    run = run_chain("anchored", SamplerConfig(eta, 1000, record_every=50), pair, x0, RngStream(33))
    w0 = brute_force_w2_discrete(x0[:, 0], ref)
    w2 = np.array([brute_force_w2_discrete(s[:, 0], ref) for s in run.trajectory])
    curve = bound.curve(run.steps, eta, w0)
    elapsed = time.perf_counter() - t0
    ok = bool(np.all(w2 <= curve)) and ref_vs_quad <= 0.05 and elapsed < 300
    assert criterion(11, ok, f"m={m:.4f} L={L:.4f} alpha={alpha:.2e} eta={eta:.2e}; max W2/bound "
                             f"{float(np.max(w2 / curve)):.3f}; reference vs quadrature W2 {ref_vs_quad:.4f}; "
                             f"{elapsed:.1f} s")
