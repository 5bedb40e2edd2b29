import math

import numpy as np
import pytest
from scipy import stats

from esscher.analytic import cjd_call
from esscher.charfn import charfn_cjd, charfn_ljd_2nd
from esscher.measure import cjd_measure, esscher_measure
from esscher.models import CJD, GBM, LJD, VG, KouDE, MarketContext
from esscher.montecarlo import (BLOCK, Payoff, mc_price, simulate_cjd_rpsi, simulate_p, simulate_q,
                                simulate_risk_neutral_gbm)

R = 0.03
N = 100_000


def _mean_within(sample, target, k=3.0):
    se = sample.std(ddof=1) / math.sqrt(sample.size)
    return abs(sample.mean() - target) < k * se


def _var_within(sample, target, k=3.0):
    c = sample - sample.mean()
    v = np.mean(c**2)
    se = math.sqrt((np.mean(c**4) - v**2) / sample.size)
    return abs(v - target) < k * se


def test_shape_and_origin():
    p = simulate_p(CJD(0.05, 0.2, 1.0, 0.1), 100.0, 1.0, 10, 4, seed=0)
    assert p.levels.shape == (10, 5) and p.n_steps == 4 and p.dt == 0.25
    assert np.all(p.levels[:, 0] == math.log(100.0))
    assert p.horizon == pytest.approx(1.0) and not p.is_pricing


def test_deterministic_limit():
    g = GBM(0.07, 1e-300)
    p = simulate_p(g, 100.0, 2.0, 5, 3, seed=1)
    assert np.allclose(p.levels[:, -1], math.log(100.0) + (0.07 - 0.5e-600) * 2.0, rtol=0, atol=1e-14)


def test_cjd_mean_of_log_price(cjd):
    x = simulate_p(cjd, 100.0, 1.0, N, 1, seed=2).levels[:, -1] - math.log(100.0)
    assert _mean_within(x, cjd.log_drift + cjd.lam * cjd.gamma)


def test_ljd_variance_of_log_price(ljd):
    x = simulate_p(ljd, 100.0, 1.0, N, 1, seed=3).levels[:, -1]
    assert _var_within(x, ljd.sigma**2 + ljd.lam * (ljd.mu_j**2 + ljd.sigma_j**2))


def test_kou_and_vg_first_two_moments(kou, vg):
    xk = simulate_p(kou, 100.0, 1.0, N, 4, seed=4).levels[:, -1] - math.log(100.0)
    ej2 = kou.p * 2 / kou.eta1**2 + kou.q * 2 / kou.eta2**2
    ej = kou.p / kou.eta1 - kou.q / kou.eta2
    assert _mean_within(xk, kou.log_drift + kou.lam * ej)
    assert _var_within(xk, kou.sigma**2 + kou.lam * ej2)
    xv = simulate_p(vg, 100.0, 1.0, N, 4, seed=4).levels[:, -1] - math.log(100.0)
    assert _mean_within(xv, vg.b + vg.m)
    assert _var_within(xv, vg.delta**2 + vg.m**2 * vg.kappa)


def test_reproducible_by_block():
    m = CJD(0.05, 0.2, 1.0, 0.1)
    a = simulate_p(m, 100.0, 1.0, 3 * BLOCK + 7, 5, seed=9)
    b = simulate_p(m, 100.0, 1.0, 3 * BLOCK + 7, 5, seed=9)
    assert a.checksum() == b.checksum()
    # each block of paths depends only on (seed, block index)
    small = simulate_p(m, 100.0, 1.0, BLOCK, 5, seed=9)
    np.testing.assert_array_equal(small.levels, a.levels[:BLOCK])
    assert simulate_p(m, 100.0, 1.0, BLOCK, 5, seed=10).checksum() != small.checksum()


def test_large_negative_psi_is_black_scholes(cjd):
    meas = cjd_measure(cjd, R, -1e6)
    p = simulate_cjd_rpsi(cjd, meas, 100.0, 1.0, R, 20_000, 1, seed=6)
    x = p.levels[:, -1] - math.log(100.0)
    ref = stats.norm(loc=R - 0.5 * cjd.sigma**2, scale=cjd.sigma)
    assert stats.kstest(x, ref.cdf).pvalue > 0.05


@pytest.mark.parametrize("psi,cls", [(-50.0, "exponential"), (0.0, "exponential"), (80.0, "linear")])
def test_discounted_spot_is_martingale(cjd, psi, cls):
    meas = cjd_measure(cjd, R, psi, cls)
    p = simulate_cjd_rpsi(cjd, meas, 100.0, 1.0, R, N, 1, seed=7)
    v, se = mc_price(p, Payoff("spot"))
    assert abs(v - 100.0) < 3 * se


def test_martingale_over_independent_seeds(cjd):
    meas = cjd_measure(cjd, R, 0.0)
    hits = 0
    for seed in range(100):
        p = simulate_cjd_rpsi(cjd, meas, 100.0, 1.0, R, 10_000, 1, seed=1000 + seed)
        v, se = mc_price(p, Payoff("spot"))
        hits += abs(v - 100.0) < 3 * se
    assert hits >= 99


def test_call_matches_series(cjd):
    meas = cjd_measure(cjd, R, 0.0)
    p = simulate_cjd_rpsi(cjd, meas, 100.0, 0.5, R, N, 1, seed=8)
    v, se = mc_price(p, Payoff("call", 100.0))
    assert abs(v - cjd_call(MarketContext(R, 100.0, 0.5), 100.0, cjd, meas)) < 3 * se


def test_unit_payoff_and_refusal(cjd):
    p = simulate_risk_neutral_gbm(0.2, R, 100.0, 2.0, 50, 2, seed=0)
    v, se = mc_price(p, Payoff("unit"))
    assert v == pytest.approx(math.exp(-2 * R), rel=1e-15) and se == 0.0
    with pytest.raises(ValueError):
        mc_price(simulate_p(cjd, 100.0, 1.0, 10, 1, seed=0), Payoff("call", 100.0), r=R)
    with pytest.raises(ValueError):
        Payoff("digital")(np.ones(2))


def _cumulants(cf, h=1e-4):
    # derivatives of log Phi at 0 by central differences
    lp = [complex(np.log(cf(w))) for w in (-h, 0.0, h)]
    k1 = ((lp[2] - lp[0]) / (2 * h) / 1j).real
    k2 = (-(lp[2] - 2 * lp[1] + lp[0]) / h**2).real
    return k1, k2


def test_cumulants_match_characteristic_function(cjd, ljd):
    m = cjd_measure(cjd, R, -30.0)
    x = simulate_cjd_rpsi(cjd, m, 1.0, 1.0, R, N, 2, seed=12).levels[:, -1]
    k1, k2 = _cumulants(charfn_cjd(cjd, m.eta, m.psi, "exponential", 1.0))
    assert _mean_within(x, k1) and _var_within(x, k2)
    ml = esscher_measure(ljd, R, -0.5)
    y = simulate_q(ljd, ml, 1.0, 1.0, R, N, 2, seed=12).levels[:, -1]
    k1, k2 = _cumulants(charfn_ljd_2nd(ljd, ml.eta, ml.psi, 1.0))
    assert _mean_within(y, k1) and _var_within(y, k2)


def test_tilted_kou_first_order_martingale(kou):
    meas = esscher_measure(kou, R, 0.0)
    v, se = mc_price(simulate_q(kou, meas, 100.0, 1.0, R, N, 1, seed=13), Payoff("spot"))
    assert abs(v - 100.0) < 3 * se


def test_unsupported_samplers(kou, vg):
    with pytest.raises(NotImplementedError):
        simulate_q(kou, esscher_measure(kou, R, -0.5), 100.0, 1.0, R, 10, 1, seed=0)
    with pytest.raises(ValueError):
        simulate_p(GBM(0.05, 0.2), 100.0, 1.0, 0, 1, seed=0)
