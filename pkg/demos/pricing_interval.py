"""Esscher pricing interval for the constant-jump model.

Sweeps psi, prints the call price against the Black-Scholes floor and the
spot ceiling, then shows what happens when the Poisson series is cut at a
fixed ten terms instead of an adaptive length.  Writes interval.csv.
"""
import sys

import numpy as np

from esscher import io as fio
from esscher.analytic import TruncationPolicy, bs_call, cjd_price_interval
from esscher.models import CJD, MarketContext

r = 0.03
ctx = MarketContext(r, 100.0, 1.0)
model = CJD(mu=0.05, sigma=0.3, lam=1.0, gamma=0.1)
grid = np.arange(-400.0, 401.0, 50.0)

adaptive = cjd_price_interval(ctx, 100.0, model, grid)
fixed = cjd_price_interval(ctx, 100.0, model, grid, policy=TruncationPolicy.fixed(10))

print(f"Black-Scholes floor {bs_call(ctx, 100.0, model.sigma):.4f}, spot ceiling {ctx.x:.2f}")
print(f"{'psi':>8} {'adaptive':>10} {'fixed(10)':>10}")
for (psi, a), (_, f) in zip(adaptive.points, fixed.points):
    print(f"{psi:8.0f} {a:10.4f} {f:10.4f}")
print("adaptive monotone:", adaptive.is_monotone(), " within bounds:", adaptive.within_bounds())

out = sys.argv[1] if len(sys.argv) > 1 else "interval.csv"
fio.write_csv(out, ("psi", "adaptive", "fixed10"),
              ((p, a, f) for (p, a), (_, f) in zip(adaptive.points, fixed.points)))
print("wrote", out)
