import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, optimize

from esscher.analytic import cjd_call
from esscher.measure import (DomainError, cjd_intensity, cjd_intensity_from_drift, cjd_measure,
                             cjd_measure_from_eta, cjd_no_jump_risk, cjd_residual, esscher_measure,
                             eta_psi_from_phi, jd_residual, jump_exponent, map_linear_to_exponential,
                             martingale_residual, moment_strip, nu_tilde, phi_from_eta_psi, solve_eta_cjd,
                             solve_eta_jd)
from esscher.models import CJD, LJD, VG, KouDE, MarketContext, gamma_tilde

R = 0.03


def _bisect_oracle(model, psi, cls):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return optimize.brentq(lambda e: cjd_residual(model, R, e, psi, cls), -200.0, 200.0, xtol=1e-15)


# --- CJD --------------------------------------------------------------------

def test_residual_vanishes_without_premium():
    m = CJD(R, 0.2, 1.0, 0.1)
    assert cjd_residual(m, R, 0.0, 0.0, "exponential") == 0.0
    assert solve_eta_cjd(m, R, 0.0, "exponential") == pytest.approx(0.0, abs=1e-12)


def test_diffusion_only_root():
    m = CJD(0.05, 0.2, 1e-13, 0.1)
    assert abs(cjd_residual(m, R, (R - 0.05) / 0.04, 0.0, "exponential")) < 1e-13


@pytest.mark.parametrize("cls", ["exponential", "linear"])
@pytest.mark.parametrize("psi", [-400.0, -10.0, 0.0, 10.0, 150.0])
def test_root_matches_bracketing_oracle(cjd, cls, psi):
    eta = solve_eta_cjd(cjd, R, psi, cls)
    assert abs(cjd_residual(cjd, R, eta, psi, cls)) < 1e-12
    assert eta == pytest.approx(_bisect_oracle(cjd, psi, cls), abs=1e-9)


@pytest.mark.parametrize("cls", ["exponential", "linear"])
def test_both_intensity_formulas_agree(cjd, cls):
    for psi in (-100.0, 0.0, 50.0):
        m = cjd_measure(cjd, R, psi, cls)
        assert m.lam_adj == pytest.approx(cjd_intensity_from_drift(cjd, R, m.eta), rel=1e-10)
        assert m.lam_adj == pytest.approx(cjd_intensity(cjd, m.eta, psi, cls), rel=1e-15)


def test_intensity_vanishes_as_psi_decreases(cjd):
    m = cjd_measure(cjd, R, -1e6, "exponential")
    assert m.lam_adj < 1e-9 * cjd.lam


def test_overflowing_exponent_gives_signed_infinity_with_warning(cjd):
    with pytest.warns(RuntimeWarning):
        assert cjd_residual(cjd, R, 1e5, 0.0, "exponential") == math.inf
    neg = CJD(0.05, 0.2, 1.0, -0.1)
    with pytest.warns(RuntimeWarning):
        assert cjd_residual(neg, R, -1e5, 0.0, "exponential") == -math.inf


@settings(max_examples=60, deadline=None)
@given(st.floats(-50.0, 50.0), st.floats(-200.0, 200.0), st.sampled_from(["exponential", "linear"]))
def test_residual_increasing_in_eta(eta, psi, cls):
    m = CJD(0.05, 0.2, 1.0, -0.1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a, b = cjd_residual(m, R, eta, psi, cls), cjd_residual(m, R, eta + 0.5, psi, cls)
    assert b > a or (math.isinf(a) and a == b)


def test_phi_parametrisation_examples():
    m = CJD(R, 0.2, 1.0, 0.1)
    eta, psi = eta_psi_from_phi(m, R, 0.0, "exponential")
    assert eta == pytest.approx(0.0, abs=1e-15) and psi == pytest.approx(0.0, abs=1e-13)


@settings(max_examples=60, deadline=None)
@given(st.floats(-30.0, 30.0), st.sampled_from(["exponential", "linear"]))
def test_phi_gives_a_root(phi, cls):
    m = CJD(0.05, 0.2, 1.0, 0.1)
    eta, psi = eta_psi_from_phi(m, R, phi, cls)
    assert abs(cjd_residual(m, R, eta, psi, cls)) < 1e-12


@pytest.mark.parametrize("cls", ["exponential", "linear"])
@pytest.mark.parametrize("psi", [-100.0, -1.0, 0.0, 20.0])
def test_phi_round_trip(cjd, cls, psi):
    eta = solve_eta_cjd(cjd, R, psi, cls)
    phi = phi_from_eta_psi(cjd, eta, psi, cls)
    eta2, psi2 = eta_psi_from_phi(cjd, R, phi, cls)
    assert eta2 == pytest.approx(eta, abs=1e-10)
    assert psi2 == pytest.approx(psi, abs=1e-10 * max(1.0, abs(psi)))


def test_linear_to_exponential_at_zero(cjd):
    eta_hat = solve_eta_cjd(cjd, R, 0.0, "linear")
    g, gt = cjd.gamma, gamma_tilde(cjd.gamma)
    assert map_linear_to_exponential(cjd, R, 0.0) == pytest.approx(eta_hat * (gt - g) / g**2, rel=1e-14)


@pytest.mark.parametrize("psi_l", [-300.0, -20.0, 0.0, 40.0])
def test_linear_to_exponential_same_measure(cjd, psi_l):
    lin = cjd_measure(cjd, R, psi_l, "linear")
    psi_e = map_linear_to_exponential(cjd, R, psi_l)
    same = cjd_measure_from_eta(cjd, R, lin.eta, psi_e, "exponential")
    assert same.lam_adj == pytest.approx(lin.lam_adj, rel=1e-10)
    expo = cjd_measure(cjd, R, psi_e, "exponential")
    ctx = MarketContext(R, 100.0, 0.5)
    for K in (80.0, 100.0, 120.0):
        assert cjd_call(ctx, K, cjd, expo) == pytest.approx(cjd_call(ctx, K, cjd, lin), rel=1e-8)


def test_no_jump_risk_keeps_intensity(cjd):
    m = cjd_no_jump_risk(cjd, R)
    assert m.eta == pytest.approx((R - cjd.mu) / cjd.sigma**2)
    assert m.lam_adj == pytest.approx(cjd.lam, rel=1e-14)
    assert abs(m.residual) < 1e-12


# --- general jump laws ------------------------------------------------------------

def test_nu_tilde_examples():
    mj, sj = -0.1, 0.2
    assert nu_tilde(1.0, 0.0, mj, sj) == pytest.approx(math.expm1(mj + 0.5 * sj**2), rel=1e-14)
    assert nu_tilde(0.7, -0.3, mj, 0.0) == pytest.approx(math.expm1(0.7 * mj - 0.3 * mj**2), rel=1e-14)
    # Gauss-Hermite oracle for E[exp(y J + psi J^2)] - 1
    x, w = np.polynomial.hermite_e.hermegauss(80)
    j = mj + sj * x
    oracle = np.sum(w * np.exp(j - 0.5 * j**2)) / math.sqrt(2.0 * math.pi) - 1.0
    assert nu_tilde(1.0, -0.5, mj, sj) == pytest.approx(oracle, abs=1e-10)


def test_nu_tilde_divergence():
    with pytest.raises(DomainError):
        nu_tilde(1.0, 20.0, 0.0, 0.2)


@given(st.floats(-3.0, 3.0))
def test_nu_tilde_continuous_at_zero_psi(y):
    a = nu_tilde(y, -1e-9, -0.1, 0.2)
    b = math.expm1(-0.1 * y + 0.5 * y * y * 0.04)
    assert a == pytest.approx(b, abs=1e-8)


def test_ljd_without_premium_has_zero_root():
    m = LJD(R, 0.2, 0.5, -0.05, 0.1)
    assert solve_eta_jd(m, R, 0.0, "exponential") == pytest.approx(0.0, abs=1e-10)


def test_ljd_root_against_quadrature(ljd):
    eta = solve_eta_jd(ljd, R, -1.0, "exponential")
    assert abs(jd_residual(ljd, R, eta, -1.0, "exponential", method="quad")) < 1e-10


def test_kou_root_against_quadrature(kou):
    eta = solve_eta_jd(kou, R, -0.5, "exponential")
    assert abs(jd_residual(kou, R, eta, -0.5, "exponential", method="quad")) < 1e-9

    # direct density integral; the tails beyond |x| = 20 are below e^-100
    def integrand(x):
        return math.expm1(x) * math.exp(eta * x - 0.5 * x * x) * float(kou.jump_pdf(x))
    j1 = kou.lam * (integrate.quad(integrand, -20.0, 0)[0] + integrate.quad(integrand, 0, 20.0)[0])
    res = kou.log_drift + 0.5 * kou.sigma**2 + eta * kou.sigma**2 - R + j1
    assert abs(res) < 1e-9


@pytest.mark.parametrize("psi,cls", [(0.0, "exponential"), (-0.5, "exponential"), (0.0, "linear"),
                                     (-0.5, "linear")])
def test_closed_forms_match_quadrature(kou, vg, psi, cls):
    for model in (kou, vg):
        m = esscher_measure(model, R, psi, cls)
        assert abs(m.residual) < 1e-10
        if cls == "exponential":
            z = np.array([1.0, 1j, 2.5j, 0.3 - 1j])
            a = jump_exponent(model, z, m.eta, psi, cls)
            b = jump_exponent(model, z, m.eta, psi, cls, method="quad")
            np.testing.assert_allclose(a, b, rtol=1e-8, atol=1e-12)


def test_positive_psi_rejected_where_integrals_diverge(kou):
    with pytest.raises(DomainError):
        solve_eta_jd(kou, R, 0.5, "exponential")


def test_moment_strip_for_kou_first_order(kou):
    eta = solve_eta_jd(kou, R, 0.0, "exponential")
    lo, hi = moment_strip(kou, eta, 0.0, "exponential")
    assert hi == pytest.approx(kou.eta1 - eta)
    assert lo == pytest.approx(-(kou.eta2 + eta))


def test_martingale_residual_certifies(ljd):
    m = esscher_measure(ljd, R, -0.5)
    assert martingale_residual(ljd, R, m).certified
