import math

import numpy as np
import pytest

from alang import DomainError, InfeasibleError, select_hyperparameters, theoretical_eta_max_and_C
from alang.bounds import B_CONST, SmoothingConstants, _A, eta_smoothing_cap, n_lower_bounds

SQ2 = math.sqrt(2.0)


def hand_case():
    """(m, L, alpha) = (1, 2, 0.1), |x*| = 0.5, sigma(x*) = 1.2, E|X0|^2 = 4, E_pi|X|^2 = 1.5, d = 1.

    Every number below is written out from the displayed constants with
    m - alpha = 0.9 and 1 + 4 alpha = 1.4.
    """
    lip = 2 * 2 * math.sqrt(1.4) + 20 * 2 * 1.4           # 2L sqrt(1+4a) + 20L(1+4a)
    eta_terms = (1 / (4 + 0.4), 1 / (4 * 0.9), 0.9 / (20**2 * 2 * 1.4**2), 0.9**2 / (64 * 2 * lip**2))
    C1 = 3 * 2 * math.sqrt(1.4) * (0.5 + 1.2)
    C2 = 7 * 1.4 * (0.5 + 1.2)
    C3 = math.sqrt(4 * 4 + 6 * 1.5)
    C = (2 * C1 + 8 * 2 * C2 + 2 * SQ2 * C3 * lip) / 0.9 + (2 * C2 + 10 * SQ2 * 1.4 * C3) / math.sqrt(0.9)
    return eta_terms, C1, C2, C3, C


def test_hand_evaluated_case():
    terms, C1, C2, C3, C = hand_case()
    b = theoretical_eta_max_and_C(1.0, 2.0, 0.1, 0.5, 1.2, 4.0, 1.5)
    assert b.eta_max == pytest.approx(min(terms), rel=1e-12, abs=0)
    assert np.allclose(b.eta_terms, terms, rtol=1e-12, atol=0)
    for got, want in ((b.C1, C1), (b.C2, C2), (b.C3, C3), (b.C, C)):
        assert got == pytest.approx(want, rel=1e-12, abs=0)
    assert b.eta_max == b.eta_terms[3]


def test_alpha_zero_keeps_first_two_terms():
    b = theoretical_eta_max_and_C(0.5, 3.0, 0.0, 0.0, 1.0, 1.0, 1.0)
    assert b.eta_terms[0] == pytest.approx(1 / 9)
    assert b.eta_terms[1] == pytest.approx(1 / 2)


def test_C_affine_in_C3():
    base = dict(m=1.0, L=2.0, alpha=0.1, x_star_norm=0.5, sigma_at_xstar=1.2)
    b1 = theoretical_eta_max_and_C(**base, E_X0_sq=4.0, E_pi_sq=1.5)
    b2 = theoretical_eta_max_and_C(**base, E_X0_sq=16.0, E_pi_sq=6.0)   # doubles C3
    b0 = theoretical_eta_max_and_C(**base, E_X0_sq=0.0, E_pi_sq=0.0)
    assert b2.C3 == pytest.approx(2 * b1.C3)
    assert b2.C - b0.C == pytest.approx(2 * (b1.C - b0.C), rel=1e-12)


def test_hilbert_schmidt_norm_scales_with_dim():
    b1 = theoretical_eta_max_and_C(1.0, 2.0, 0.1, 0.0, 1.0, 1.0, 1.0, dim=1)
    b4 = theoretical_eta_max_and_C(1.0, 2.0, 0.1, 0.0, 1.0, 1.0, 1.0, dim=4)
    assert b4.C1 == pytest.approx(2 * b1.C1)


def test_curve():
    b = theoretical_eta_max_and_C(1.0, 2.0, 0.1, 0.5, 1.2, 4.0, 1.5)
    eta = b.eta_max / 2
    k = np.array([0, 10, 1000])
    expect = SQ2 * np.exp(-0.9 * k * eta) * 3.0 + SQ2 * b.C * math.sqrt(eta)
    assert np.allclose(b.curve(k, eta, 3.0), expect, rtol=1e-14)
    assert isinstance(b.curve(5, eta, 3.0), float)


@pytest.mark.parametrize("args", [(1.0, 2.0, 1.0), (1.0, 2.0, 1.5), (1.0, 2.0, -0.1), (1.0, 0.5, 0.1),
                                  (0.0, 1.0, 0.0)])
def test_domain_errors(args):
    with pytest.raises(DomainError):
        theoretical_eta_max_and_C(*args, 0.0, 1.0, 1.0, 1.0)


def test_negative_moment_rejected():
    with pytest.raises(DomainError):
        theoretical_eta_max_and_C(1.0, 2.0, 0.1, 0.0, 1.0, -1.0, 1.0)


# ---- hyperparameter selection -------------------------------------------

def constants(w2_initial=5.0, K=1.0, dim=1):
    bound = theoretical_eta_max_and_C(1.0, 2.0, 0.1, 0.5, 1.2, 4.0, 1.5, dim=dim)
    return SmoothingConstants(bound, K=K, L_f=1.0, dim=dim, x_star_norm=0.5, x_star_f_norm=0.3,
                              g_zero=0.0, E_init_dev_sq=4.25, w2_initial=w2_initial)


def A1_by_hand(c, mu):
    return 4 * (1 + math.e) * (2 * mu**2 * c.L_f**2 + 8 * c.K**2 * c.dim)


def assert_selection_conditions_hold(eps, c, h):
    d, b = c.dim, c.bound
    assert h.mu <= 1 / (6 * c.K * math.sqrt(d)) * (1 + 1e-15)
    assert h.k * h.eta >= math.log(2 * SQ2 * c.w2_initial / eps) / b.rate * (1 - 1e-12)
    cap = b.m * h.mu**2 / (4 * math.exp(6 * c.K * h.mu * math.sqrt(h.mu) * d)
                           * (4 * h.mu**2 * c.L_f**2 + 8 * c.K**2 * d))
    assert h.eta <= min((eps / (4 * SQ2 * b.C)) ** 2, cap) * (1 + 1e-15)
    rho = 1 + 4 * b.L**2 + 4 * d * b.alpha
    A = _A(c, h.mu, h.eta, float(h.N))
    first = (((4 / h.mu**2) * (2 * h.eta + 2) * A + 16 * d * (1 + math.e / 2) / 3)
             * (math.exp(h.eta * h.k * rho) - 1) / (eps * (1 + 2 * b.L**2 + 4 * d * b.alpha))) ** 2
    second = (4 * math.sqrt(2 * A1_by_hand(c, h.mu)) / (b.m * h.mu)) ** 4
    assert h.N >= max(first, second) * (1 - 1e-12)


@pytest.mark.parametrize("eps", [1.0, 0.5, 0.1])
@pytest.mark.parametrize("dim", [1, 3])
def test_selection_satisfies_all_conditions(eps, dim):
    c = constants(dim=dim)
    h = select_hyperparameters(eps, c)
    assert_selection_conditions_hold(eps, c, h)
    assert h.eta <= c.bound.eta_max
    # N is the smallest integer meeting the batch inequality
    first, second = n_lower_bounds(c, h.mu, h.eta, h.k, float(h.N - 1), eps)
    assert h.N - 1 < max(first, second)


def test_halving_epsilon_quarters_eta_or_less():
    c = constants()
    # make the accuracy term bind so the scaling is visible
    for eps in (1e-3, 1e-4):
        h1, h2 = select_hyperparameters(eps, c), select_hyperparameters(eps / 2, c)
        assert h2.eta <= h1.eta / 4 * (1 + 1e-12) or h1.binding["eta"] != "eta_accuracy"
    h = select_hyperparameters(1e-4, c)
    assert h.binding["eta"] == "eta_accuracy"


def test_constants_used_in_formulas():
    assert B_CONST == pytest.approx((1 + math.e / 2) / 3)
    c = constants()
    mu = 1 / 6
    assert eta_smoothing_cap(c, mu) == pytest.approx(
        mu**2 / (4 * math.exp(6 * mu**1.5) * (4 * mu**2 + 8)), rel=1e-14)


def test_k_zero_when_already_within_tolerance():
    h = select_hyperparameters(10.0, constants(w2_initial=1.0))
    assert h.k == 0


def test_infeasible_batch_size_reports_binding():
    with pytest.raises(InfeasibleError) as exc:
        select_hyperparameters(1e-3, constants(), max_log2_N=8)
    assert exc.value.binding == "N"


def test_selection_domain_errors():
    with pytest.raises(DomainError):
        select_hyperparameters(0.0, constants())
    with pytest.raises(DomainError):
        select_hyperparameters(0.1, constants(K=0.0))
