"""Implied volatility and single-expiry calibration to option quotes.

The objective is the equally weighted sum of squared price errors.  Each
family is screened by short Nelder-Mead runs from several starts in
transformed coordinates; the best runs are polished by trust-region least
squares on the residual vector.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from .analytic import ADAPTIVE, TruncationPolicy, _bs_call_raw, cjd_call_strikes
from .charfn import charfn_merton_qbs
from .fft import FftGrid, fft_call_curve, prices_at_strikes
from .measure import cjd_measure
from .models import CJD, LJD, MarketContext, ModelError

FAMILIES = ("cjd-1st", "cjd-2nd", "ljd-merton")


class ImpliedVolError(ValueError):
    """Price outside the no-arbitrage band of a call."""


def _vega(x, K, r, tau, sigma):
    sd = sigma * math.sqrt(tau)
    d1 = (math.log(x / K) + r * tau) / sd + 0.5 * sd
    return x * math.sqrt(tau) * math.exp(-0.5 * d1 * d1) / math.sqrt(2.0 * math.pi)


def implied_vol(price: float, ctx: MarketContext, K: float, tol: float = 1e-10,
                max_iter: int = 200) -> float:
    """Black-Scholes implied volatility by Newton steps kept inside a bisection bracket.

    Raises:
        ImpliedVolError: if ``price`` is not in ``[max(x - K e^{-r tau}, 0), x)``.
    """
    x, r, tau = ctx.x, ctx.r, ctx.tau
    lower = max(x - K * math.exp(-r * tau), 0.0)
    if price < lower:
        raise ImpliedVolError(f"price {price} is below the lower bound max(x - K e^(-r tau), 0) = {lower}")
    if price >= x:
        raise ImpliedVolError(f"price {price} is not below the upper bound x = {x}")
    if price == lower:
        return 0.0

    def f(s):
        return float(_bs_call_raw(x, K, r, tau, s)) - price

    lo, hi = 0.0, 1.0
    while f(hi) < 0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e4:
            raise ImpliedVolError(f"no volatility below {hi} reproduces price {price}")
    s = 0.5 * (lo + hi) if lo > 0 else min(max(math.sqrt(2.0 * abs(math.log(x / K) + r * tau) / tau), 0.2), hi)
    # Newton is used only while each step is at most half the one before it;
    # otherwise bisect.  Stop on the price tolerance once sigma has settled.
    prev = hi - lo
    for _ in range(max_iter):
        err = f(s)
        if err == 0:
            return s
        if err > 0:
            hi = s
        else:
            lo = s
        v = _vega(x, K, r, tau, s)
        step = err / v if v > 0 else math.inf
        if lo < s - step < hi and abs(2.0 * step) <= prev:
            nxt = s - step
        else:
            nxt = 0.5 * (lo + hi)
        prev = abs(nxt - s)
        if abs(err) < tol and prev < 1e-12 * max(s, 1.0):
            return nxt
        s = nxt
        if hi - lo < 1e-15 * max(hi, 1.0):
            return s
    return s


@dataclass(frozen=True)
class QuoteSet:
    """Call quotes for one expiry; ``T`` is the year fraction to expiry."""

    spot: float
    r: float
    T: float
    strikes: np.ndarray
    mids: np.ndarray
    open_interest: Optional[np.ndarray] = None
    trade_date: str = ""
    expiry: str = ""

    def __post_init__(self):
        k = np.asarray(self.strikes, dtype=float)
        m = np.asarray(self.mids, dtype=float)
        oi = None if self.open_interest is None else np.asarray(self.open_interest, dtype=float)
        if k.shape != m.shape or (oi is not None and oi.shape != k.shape):
            raise ValueError("strikes, mids and open interest must have the same length")
        if k.size == 0:
            raise ValueError("no quotes")
        if np.any(np.diff(k) <= 0):
            raise ValueError("strikes must be strictly increasing")
        if np.any(m <= 0):
            raise ValueError("mid prices must be positive")
        if not (self.spot > 0 and self.T > 0):
            raise ValueError("spot and T must be positive")
        object.__setattr__(self, "strikes", k)
        object.__setattr__(self, "mids", m)
        object.__setattr__(self, "open_interest", oi)

    @property
    def ctx(self) -> MarketContext:
        return MarketContext(self.r, self.spot, self.T)

    def filtered(self, min_open_interest: float = 100.0,
                 band: Optional[tuple[float, float]] = None) -> "QuoteSet":
        """Quotes with open interest above the threshold and strikes inside ``band``."""
        keep = np.ones(self.strikes.size, dtype=bool)
        if self.open_interest is not None:
            keep &= self.open_interest > min_open_interest
        if band is not None:
            keep &= (self.strikes >= band[0]) & (self.strikes <= band[1])
        if not keep.any():
            raise ValueError(f"no quotes left after filtering (open interest > {min_open_interest}, band {band})")
        oi = None if self.open_interest is None else self.open_interest[keep]
        return QuoteSet(self.spot, self.r, self.T, self.strikes[keep], self.mids[keep], oi,
                        self.trade_date, self.expiry)


@dataclass(frozen=True)
class CalibConfig:
    n_starts: int = 6
    seed: int = 0
    screen_iter: int = 300
    n_polish: int = 2
    maxiter: int = 2000
    polish: bool = True
    grid: FftGrid = FftGrid()
    policy: TruncationPolicy = ADAPTIVE


@dataclass
class CalibResult:
    family: str
    params: dict
    rmse: float
    residuals: np.ndarray = field(repr=False)
    model_prices: np.ndarray = field(repr=False)
    market_iv: np.ndarray = field(repr=False)
    model_iv: np.ndarray = field(repr=False)
    converged: bool = True
    message: str = ""

    def iv_rows(self, strikes: Sequence[float]) -> list[tuple[float, float, float]]:
        return list(zip(map(float, strikes), self.market_iv.tolist(), self.model_iv.tolist()))


# --- families ---------------------------------------------------------------

def _cjd_params(v: np.ndarray) -> dict:
    out = {"mu": float(v[0]), "sigma": math.exp(v[1]), "lam": math.exp(v[2]), "gamma": math.expm1(v[3])}
    out["psi"] = float(v[4]) if v.size > 4 else 0.0
    return out


def _ljd_params(v: np.ndarray) -> dict:
    return {"sigma": math.exp(v[0]), "lam": math.exp(v[1]), "mu_j": float(v[2]), "sigma_j": math.exp(v[3])}


def model_prices(family: str, params: dict, quotes: QuoteSet, config: CalibConfig = CalibConfig()) -> np.ndarray:
    """Call prices of ``family`` at the quoted strikes."""
    if family in ("cjd-1st", "cjd-2nd"):
        model = CJD(params["mu"], params["sigma"], params["lam"], params["gamma"])
        meas = cjd_measure(model, quotes.r, params.get("psi", 0.0), "exponential")
        return cjd_call_strikes(quotes.ctx, quotes.strikes, model, meas, config.policy)
    if family == "ljd-merton":
        # mu does not enter the risk-neutral law; any value gives a valid model
        model = LJD(quotes.r, params["sigma"], params["lam"], params["mu_j"], params["sigma_j"])
        curve = fft_call_curve(charfn_merton_qbs(model, quotes.r, quotes.T), quotes.spot, quotes.r,
                               quotes.T, config.grid)
        return prices_at_strikes(curve, quotes.strikes)
    raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")


def _atm_vol(quotes: QuoteSet) -> float:
    i = int(np.argmin(np.abs(quotes.strikes - quotes.spot)))
    try:
        return max(implied_vol(float(quotes.mids[i]), quotes.ctx, float(quotes.strikes[i])), 0.02)
    except ImpliedVolError:
        return 0.2


def _starts(family: str, quotes: QuoteSet, config: CalibConfig, init: Optional[np.ndarray]) -> list:
    atm = _atm_vol(quotes)
    if family == "ljd-merton":
        centre = np.array([math.log(0.8 * atm), math.log(1.0), -0.1, math.log(0.1)])
    else:
        centre = np.array([quotes.r + 0.05, math.log(0.8 * atm), math.log(1.0), math.log1p(-0.1)])
        if family == "cjd-2nd":
            centre = np.append(centre, 0.0)
    rng = np.random.default_rng(config.seed)
    starts = [] if init is None else [np.asarray(init, dtype=float)]
    starts.append(centre)
    while len(starts) < config.n_starts:
        starts.append(centre + rng.normal(0.0, 0.3, centre.size))
    return starts


def _to_vector(family: str, params: dict) -> np.ndarray:
    if family == "ljd-merton":
        return np.array([math.log(params["sigma"]), math.log(params["lam"]), params["mu_j"],
                         math.log(params["sigma_j"])])
    v = [params["mu"], math.log(params["sigma"]), math.log(params["lam"]), math.log1p(params["gamma"])]
    if family == "cjd-2nd":
        v.append(params.get("psi", 0.0))
    return np.array(v)


def calibrate(family: str, quotes: QuoteSet, config: CalibConfig = CalibConfig(),
              init: Optional[dict] = None) -> CalibResult:
    """Least-squares fit of ``family`` to the quoted mids.

    ``"cjd-2nd"`` is started from the ``"cjd-1st"`` optimum with ``psi = 0``
    unless ``init`` is given, so its rmse never exceeds the first-order one.
    """
    family = family.lower()
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    to_params = _ljd_params if family == "ljd-merton" else _cjd_params
    penalty = 10.0 * quotes.spot

    def residuals(v):
        try:
            out = model_prices(family, to_params(v), quotes, config) - quotes.mids
        except (ModelError, ValueError, ArithmeticError, RuntimeError):
            return np.full(quotes.mids.size, penalty)
        return out if np.all(np.isfinite(out)) else np.full(quotes.mids.size, penalty)

    def sse(v):
        return float(np.sum(residuals(v) ** 2))

    if init is None and family == "cjd-2nd":
        first = calibrate("cjd-1st", quotes, config)
        init = dict(first.params, psi=0.0)
    v_init = None if init is None else _to_vector(family, init)

    # short simplex screen of every start, then least squares from the best few
    runs = [optimize.minimize(sse, v0, method="Nelder-Mead",
                              options={"xatol": 1e-6, "fatol": 1e-10, "maxiter": config.screen_iter,
                                       "adaptive": True})
            for v0 in _starts(family, quotes, config, v_init)]
    runs.sort(key=lambda res: res.fun)
    x, fun = runs[0].x, float(runs[0].fun)
    converged, message = bool(runs[0].success), str(runs[0].message)
    if config.polish:
        for run in runs[:config.n_polish]:
            ls = optimize.least_squares(residuals, run.x, method="trf", xtol=1e-15, ftol=1e-15,
                                        gtol=1e-15, max_nfev=config.maxiter)
            if 2.0 * ls.cost < fun:
                x, fun, message = ls.x, 2.0 * float(ls.cost), str(ls.message)
                converged = bool(ls.status > 0)

    params = to_params(x)
    prices = model_prices(family, params, quotes, config)
    res = prices - quotes.mids
    ctx = quotes.ctx
    return CalibResult(family, params, float(math.sqrt(np.mean(res**2))), res, prices,
                       _iv_curve(quotes.mids, ctx, quotes.strikes), _iv_curve(prices, ctx, quotes.strikes),
                       converged, message)


def _iv_curve(prices, ctx, strikes) -> np.ndarray:
    out = np.full(len(strikes), math.nan)
    for i, (p, k) in enumerate(zip(prices, strikes)):
        try:
            out[i] = implied_vol(float(p), ctx, float(k))
        except ImpliedVolError:
            pass
    return out
