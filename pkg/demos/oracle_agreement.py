"""Three independent prices of the same call: Poisson series, FFT and Monte Carlo."""
from esscher.analytic import cjd_call
from esscher.charfn import charfn_cjd
from esscher.fft import fft_call_curve, price_at_strike
from esscher.measure import cjd_measure
from esscher.models import CJD, MarketContext
from esscher.montecarlo import Payoff, mc_price, simulate_cjd_rpsi

r, x, T = 0.03, 100.0, 0.5
model = CJD(mu=0.05, sigma=0.2, lam=1.0, gamma=0.1)
ctx = MarketContext(r, x, T)

print(f"{'psi':>6} {'K':>6} {'series':>9} {'fft':>9} {'mc':>9} {'3 se':>7}")
for psi in (-400.0, -100.0, 0.0, 100.0, 150.0):
    meas = cjd_measure(model, r, psi)
    curve = fft_call_curve(charfn_cjd(model, meas.eta, psi, "exponential", T), x, r, T)
    paths = simulate_cjd_rpsi(model, meas, x, T, r, 100_000, 1, seed=1)
    for K in (90.0, 100.0, 110.0):
        mc, se = mc_price(paths, Payoff("call", K))
        print(f"{psi:6.0f} {K:6.0f} {cjd_call(ctx, K, model, meas):9.4f} "
              f"{price_at_strike(curve, K):9.4f} {mc:9.4f} {3 * se:7.4f}")
