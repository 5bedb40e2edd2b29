import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from esscher.charfn import (charfn_bs, charfn_cjd, charfn_for_measure, charfn_jd_general, charfn_kou_1st,
                            charfn_kou_2nd, charfn_kou_qbs, charfn_ljd_2nd, charfn_merton_qbs, charfn_vg_1st,
                            charfn_vg_2nd)
from esscher.measure import DomainError, cjd_measure, esscher_measure, solve_eta_jd
from esscher.models import CJD, LJD, VG, KouDE

R, T = 0.03, 0.5
OMEGAS = [0.3, 1.0, 2.0, 5.0, -1.5]


def _bs_phi(w, r, sigma, T):
    return cmath.exp(T * (1j * w * (r - 0.5 * sigma**2) - 0.5 * w * w * sigma**2))


def _tilted_jump_integral(pdf, z, eta, psi, lo, hi):
    def part(f):
        return integrate.quad(f, lo, hi, limit=400, epsabs=1e-13, epsrel=1e-12)[0]
    re = part(lambda x: ((cmath.exp(z * x) - 1) * math.exp(eta * x + psi * x * x)).real * pdf(x))
    im = part(lambda x: ((cmath.exp(z * x) - 1) * math.exp(eta * x + psi * x * x)).imag * pdf(x))
    return re + 1j * im


def _phi_from_jumps(model, w, eta, J):
    return cmath.exp(T * (1j * w * (model.log_drift + eta * model.sigma**2) - 0.5 * w * w * model.sigma**2 + J))


# --- normalisation, martingale identity, symmetry, modulus -----------------------

def _all_charfns():
    cjd = CJD(0.05, 0.2, 1.0, 0.1)
    ljd = LJD(0.05, 0.2, 0.5, -0.05, 0.1)
    kou = KouDE(0.05, 0.2, 1.0, 0.4, 10.0, 5.0)
    vg = VG(0.05, -0.1, 0.2, 0.2)
    out = {"bs": charfn_bs(R, 0.2, T), "merton": charfn_merton_qbs(ljd, R, T), "kou-q": charfn_kou_qbs(kou, R, T)}
    for name, model, psi, cls in [("cjd-exp", cjd, -20.0, "exponential"), ("cjd-lin", cjd, 30.0, "linear"),
                                  ("ljd-exp", ljd, -0.5, "exponential"), ("ljd-lin", ljd, -0.5, "linear"),
                                  ("kou-1st", kou, 0.0, "exponential"), ("kou-2nd", kou, -0.5, "exponential"),
                                  ("kou-lin", kou, -0.5, "linear"), ("vg-1st", vg, 0.0, "exponential"),
                                  ("vg-2nd", vg, -0.5, "exponential")]:
        out[name] = charfn_for_measure(model, esscher_measure(model, R, psi, cls), T)
    return out


CHARFNS = _all_charfns()


@pytest.mark.parametrize("name", sorted(CHARFNS))
def test_normalised_martingale_hermitian_bounded(name):
    cf = CHARFNS[name]
    assert cf(0.0) == pytest.approx(1.0, abs=1e-14)
    assert cf.martingale_error(R) < 1e-7
    w = np.array([0.1, 0.7, 3.0, 11.0])
    np.testing.assert_allclose(cf(-w), np.conj(cf(w)), rtol=1e-12, atol=1e-15)
    assert np.all(np.abs(cf(w)) <= 1.0 + 1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(-30.0, 30.0))
def test_modulus_at_most_one_for_real_arguments(w):
    for cf in (CHARFNS["cjd-exp"], CHARFNS["ljd-exp"], CHARFNS["kou-2nd"]):
        assert abs(cf(w)) <= 1.0 + 1e-12


# --- closed forms against independent formulas ------------------------------------------------

@pytest.mark.parametrize("cls", ["exponential", "linear"])
def test_cjd_specialisation(cls):
    model = CJD(0.05, 0.2, 1.0, 0.1)
    m = cjd_measure(model, R, -20.0, cls)
    cf = charfn_cjd(model, m.eta, m.psi, cls, T)
    for w in OMEGAS:
        ref = cmath.exp(T * (1j * w * (model.mu - 0.5 * model.sigma**2 + m.eta * model.sigma**2
                                       - model.lam * model.gamma_tilde)
                             - 0.5 * w * w * model.sigma**2 + m.lam_adj * (cmath.exp(1j * w * model.gamma) - 1)))
        assert cf(w) == pytest.approx(ref, abs=1e-12)


def test_ljd_second_order_against_density_quadrature(ljd):
    eta = solve_eta_jd(ljd, R, -0.5, "exponential")
    cf = charfn_ljd_2nd(ljd, eta, -0.5, T)
    general = charfn_jd_general(ljd, eta, -0.5, "exponential", T, method="quad")
    for w in (1.0, 5.0, -1j):
        J = ljd.lam * _tilted_jump_integral(ljd.jump_pdf, 1j * w, eta, -0.5, -2.0, 2.0)
        assert cf(w) == pytest.approx(_phi_from_jumps(ljd, w, eta, J), rel=1e-8)
        assert cf(w) == pytest.approx(general(w), rel=1e-8)


def test_ljd_zero_psi_is_first_order_form(ljd):
    eta = solve_eta_jd(ljd, R, 0.0, "exponential")
    cf = charfn_ljd_2nd(ljd, eta, 0.0, T)
    mj, sj = ljd.mu_j, ljd.sigma_j
    for w in OMEGAS:
        u = eta + 1j * w
        J = ljd.lam * (cmath.exp(u * mj + 0.5 * u * u * sj**2) - math.exp(eta * mj + 0.5 * eta**2 * sj**2))
        assert cf(w) == pytest.approx(_phi_from_jumps(ljd, w, eta, J), rel=1e-12)


def test_ljd_rejects_nonpositive_g(ljd):
    with pytest.raises(DomainError):
        charfn_ljd_2nd(ljd, 0.0, 60.0, T)


def test_reference_measures_without_jumps_are_black_scholes():
    ljd = LJD(0.05, 0.2, 1e-300, -0.1, 0.1)
    kou = KouDE(0.05, 0.2, 1.0, 0.4, 10.0, 5.0)
    kou0 = KouDE(0.05, 0.2, 1e-300, 0.4, 10.0, 5.0)
    for w in OMEGAS:
        assert charfn_merton_qbs(ljd, R, T)(w) == pytest.approx(_bs_phi(w, R, 0.2, T), abs=1e-14)
        assert charfn_kou_qbs(kou0, R, T)(w) == pytest.approx(_bs_phi(w, R, 0.2, T), abs=1e-14)
    assert charfn_kou_qbs(kou, R, T).martingale_error(R) < 1e-14


def _kou_first_order(model, eta, w):
    def mgf(u):
        return model.p * model.eta1 / (model.eta1 - u) + model.q * model.eta2 / (model.eta2 + u)
    J = model.lam * (mgf(eta + 1j * w) - mgf(eta))
    return _phi_from_jumps(model, w, eta, J)


def test_kou_first_order_rational_form(kou):
    eta = solve_eta_jd(kou, R, 0.0, "exponential")
    cf = charfn_kou_1st(kou, eta, T)
    general = charfn_jd_general(kou, eta, 0.0, "exponential", T, method="quad")
    for w in (1.0, 5.0):
        assert cf(w) == pytest.approx(_kou_first_order(kou, eta, w), rel=1e-12)
        assert cf(w) == pytest.approx(general(w), rel=1e-9)


def test_kou_first_order_strip(kou):
    with pytest.raises(DomainError, match="eta"):
        charfn_kou_1st(kou, 20.0, T)
    cf = charfn_kou_1st(kou, 0.0, T)
    with pytest.raises(DomainError):
        cf(-11j)


def test_kou_second_order_against_quadrature(kou):
    eta = solve_eta_jd(kou, R, -0.5, "exponential")
    cf = charfn_kou_2nd(kou, eta, -0.5, T)
    for w in (1.0, 5.0, -1j):
        J = kou.lam * (_tilted_jump_integral(kou.jump_pdf, 1j * w, eta, -0.5, -20.0, 0.0)
                       + _tilted_jump_integral(kou.jump_pdf, 1j * w, eta, -0.5, 0.0, 20.0))
        assert cf(w) == pytest.approx(_phi_from_jumps(kou, w, eta, J), rel=1e-8)


def test_kou_second_order_tends_to_first_order(kou):
    psi = -1e-4
    cf2 = charfn_kou_2nd(kou, solve_eta_jd(kou, R, psi, "exponential"), psi, T)
    cf1 = charfn_kou_1st(kou, solve_eta_jd(kou, R, 0.0, "exponential"), T)
    assert abs(cf2(1.0) - cf1(1.0)) < 1e-3 * abs(cf1(1.0))
    with pytest.raises(DomainError):
        charfn_kou_2nd(kou, 0.0, 0.0, T)


def _vg_first_order(model, eta, w):
    k, m, d2 = model.kappa, model.m, model.delta**2
    u = eta + 1j * w
    num = 1 - eta * m * k - 0.5 * eta**2 * d2 * k
    den = 1 - u * m * k - 0.5 * u * u * d2 * k
    return cmath.exp(T * (1j * w * model.b + cmath.log(num / den) / k))


def test_vg_first_order_log_ratio(vg):
    eta = solve_eta_jd(vg, R, 0.0, "exponential")
    cf = charfn_vg_1st(vg, eta, T)
    general = charfn_jd_general(vg, eta, 0.0, "exponential", T, method="quad")
    for w in OMEGAS:
        assert cf(w) == pytest.approx(_vg_first_order(vg, eta, w), rel=1e-12)
    assert cf(2.0) == pytest.approx(general(2.0), rel=1e-7)


def test_vg_symmetric_martingale():
    vg = VG(0.05, 0.0, 0.2, 0.2)
    eta = solve_eta_jd(vg, R, 0.0, "exponential")
    assert charfn_vg_1st(vg, eta, T).martingale_error(R) < 1e-12


def test_vg_second_order(vg):
    eta0 = solve_eta_jd(vg, R, 0.0, "exponential")
    a = charfn_vg_2nd(vg, eta0, 0.0, T, method="quad")
    b = charfn_vg_1st(vg, eta0, T)
    for w in OMEGAS:
        assert a(w) == pytest.approx(b(w), rel=1e-8)
    eta = solve_eta_jd(vg, R, -0.5, "exponential")
    assert charfn_vg_2nd(vg, eta, -0.5, T).martingale_error(R) < 1e-6
    with pytest.raises(DomainError):
        charfn_vg_2nd(vg, eta, 0.5, T)


@pytest.mark.parametrize("name", ["cjd-exp", "ljd-exp", "kou-2nd", "vg-1st"])
def test_closed_forms_equal_general_quadrature(name):
    model = {"cjd-exp": CJD(0.05, 0.2, 1.0, 0.1), "ljd-exp": LJD(0.05, 0.2, 0.5, -0.05, 0.1),
             "kou-2nd": KouDE(0.05, 0.2, 1.0, 0.4, 10.0, 5.0), "vg-1st": VG(0.05, -0.1, 0.2, 0.2)}[name]
    psi = {"cjd-exp": -20.0, "ljd-exp": -0.5, "kou-2nd": -0.5, "vg-1st": 0.0}[name]
    m = esscher_measure(model, R, psi, "exponential")
    closed = CHARFNS[name]
    general = charfn_jd_general(model, m.eta, psi, "exponential", T, method="quad")
    for w in OMEGAS:
        assert closed(w) == pytest.approx(general(w), rel=1e-8)
