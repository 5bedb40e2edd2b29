"""Fit three model families to a smile generated by log-normal jumps.

The constant-jump families, with or without psi, cannot bend the wings the
way normal jumps do, so the Merton fit wins.  Writes smile.csv.
"""
import sys

import numpy as np

from esscher import io as fio
from esscher.analytic import merton_call
from esscher.calibration import QuoteSet, calibrate
from esscher.models import LJD, MarketContext

spot, r, T = 4450.32, 0.01, 63 / 365
strikes = np.linspace(0.8, 1.2, 20) * spot
truth = LJD(mu=0.05, sigma=0.15, lam=0.8, mu_j=-0.12, sigma_j=0.1)
ctx = MarketContext(r, spot, T)
quotes = QuoteSet(spot, r, T, strikes, [merton_call(ctx, k, truth) for k in strikes])

fits = {fam: calibrate(fam, quotes) for fam in ("ljd-merton", "cjd-1st", "cjd-2nd")}
for fam, res in fits.items():
    params = ", ".join(f"{k}={v:.4g}" for k, v in res.params.items())
    print(f"{fam:11s} rmse {res.rmse:10.3e}  {params}")

out = sys.argv[1] if len(sys.argv) > 1 else "smile.csv"
fio.write_csv(out, ("strike", "market_iv") + tuple(f"{f}_iv" for f in fits),
              zip(strikes, fits["ljd-merton"].market_iv, *(res.model_iv for res in fits.values())))
print("wrote", out)
