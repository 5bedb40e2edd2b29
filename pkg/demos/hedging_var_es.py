"""Delta-hedging a short at-the-money call: VaR and ES under different pricers.

Physical paths come from the jump model in every run; only the premium and
the hedge ratio change with the pricing measure.
"""
from esscher.analytic import TruncationPolicy
from esscher.hedging import BSPricer, HedgeConfig, hedge_simulate, no_jump_risk_pricer, var_es_sweep
from esscher.models import CJD, GBM

r, x0, T = 0.03, 75.0, 1.0
jump = CJD(mu=0.08, sigma=0.4, lam=1.0, gamma=-0.1)

runs = {
    "GBM paths, Black-Scholes hedge": HedgeConfig(BSPricer(0.4), GBM(0.08, 0.4), x0, x0, T, r, 252, 10_000, seed=1),
    "CJD paths, no jump risk premium": HedgeConfig(no_jump_risk_pricer(jump, r), jump, x0, x0, T, r, 252, 10_000,
                                                   seed=1),
}
for label, cfg in runs.items():
    rep = hedge_simulate(cfg)
    print(f"{label:34s} premium {rep.premium:7.3f}  mean pnl {rep.mean_pnl:7.3f}  "
          f"VaR5 {rep.var_5:6.3f}  ES5 {rep.es_5:6.3f}")

base = HedgeConfig(BSPricer(0.4), jump, x0, x0, T, r, 252, 10_000, seed=1)
points, failures = var_es_sweep(base, jump, [-400, -200, 0, 200, 400], policy=TruncationPolicy.fixed(10))
print("\nsecond-order pricer, fixed(10) series, common paths:")
for p in points:
    print(f"  psi {p.psi:6.0f}  premium {p.premium:7.3f}  VaR5 {p.var_5:6.3f}  ES5 {p.es_5:6.3f}")
if failures:
    print("failed points:", failures)
