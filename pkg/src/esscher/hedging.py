"""Delta-hedging P&L simulation with value-at-risk and expected shortfall.

Physical paths always come from the physical model; only the option value
and its delta come from the pricing measure.  Pricers are vectorised over
spot so a whole cross-section of paths is revalued at once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.stats import norm, poisson

from .analytic import ADAPTIVE, TruncationPolicy, _bs_call_raw
from .measure import EsscherMeasureCJD, cjd_measure, cjd_no_jump_risk, nu_tilde
from .models import CJD, LJD, MarketContext, MeasureClass, ensure_valid
from .montecarlo import simulate_p

FD_STEP = 1e-4


# ---------------------------------------------------------------------------
# Pricers
# ---------------------------------------------------------------------------

class Pricer:
    """European call value as a function of spot, time to expiry and strike."""

    label = "pricer"

    def call(self, x, tau: float, K: float, r: float) -> np.ndarray:
        raise NotImplementedError

    def delta(self, x, tau: float, K: float, r: float) -> np.ndarray:
        """Central finite difference with relative bump ``FD_STEP``."""
        x = np.asarray(x, dtype=float)
        up = self.call(x * (1.0 + FD_STEP), tau, K, r)
        down = self.call(x * (1.0 - FD_STEP), tau, K, r)
        return (up - down) / (2.0 * x * FD_STEP)


@dataclass(frozen=True)
class BSPricer(Pricer):
    sigma: float
    label = "bs"

    def call(self, x, tau, K, r):
        return _bs_call_raw(np.asarray(x, dtype=float), K, r, tau, self.sigma)

    def delta(self, x, tau, K, r):
        x = np.asarray(x, dtype=float)
        sd = self.sigma * math.sqrt(tau)
        if sd == 0:
            return (x > K * math.exp(-r * tau)).astype(float)
        return norm.cdf((np.log(x / K) + r * tau) / sd + 0.5 * sd)

    def fd_delta(self, x, tau, K, r):
        return Pricer.delta(self, x, tau, K, r)


def _mixture(x, K, r, tau, weights, shifts, vols):
    x = np.asarray(x, dtype=float)
    spots = x[..., None] * np.exp(shifts)
    return np.sum(weights * _bs_call_raw(spots, K, r, tau, vols), axis=-1)


@dataclass(frozen=True)
class CJDPricer(Pricer):
    """Series price under a solved CJD measure."""

    model: CJD
    measure: EsscherMeasureCJD
    policy: TruncationPolicy = ADAPTIVE
    label = "cjd"

    def call(self, x, tau, K, r):
        lam = self.measure.lam_adj
        m = lam * tau
        last = self.policy.last_index(lam * math.exp(self.model.gamma) * tau)
        k = np.arange(last + 1, dtype=float)
        w = poisson.pmf(k, m) if m > 0 else (k == 0).astype(float)
        shifts = k * self.model.gamma - m * self.model.gamma_tilde
        return _mixture(x, K, r, tau, w, shifts, np.full_like(k, self.model.sigma))


@dataclass(frozen=True)
class MertonPricer(Pricer):
    """Log-normal jumps with intensity ``lam`` and jump law ``N(m_j, v_j)`` under the pricing measure."""

    sigma: float
    lam: float
    m_j: float
    v_j: float
    policy: TruncationPolicy = ADAPTIVE
    label = "ljd"

    @classmethod
    def risk_neutral(cls, model: LJD, policy: TruncationPolicy = ADAPTIVE) -> "MertonPricer":
        return cls(model.sigma, model.lam, model.mu_j, model.sigma_j**2, policy)

    @classmethod
    def esscher(cls, model: LJD, theta: float, psi: float, policy: TruncationPolicy = ADAPTIVE) -> "MertonPricer":
        g = 1.0 - 2.0 * psi * model.sigma_j**2
        lam = model.lam * (1.0 + float(nu_tilde(theta, psi, model.mu_j, model.sigma_j)))
        return cls(model.sigma, lam, (model.mu_j + theta * model.sigma_j**2) / g, model.sigma_j**2 / g, policy)

    def call(self, x, tau, K, r):
        kbar = math.expm1(self.m_j + 0.5 * self.v_j)
        lt = self.lam * tau
        last = self.policy.last_index(lt * (1.0 + kbar))
        n = np.arange(last + 1, dtype=float)
        w = poisson.pmf(n, lt) if lt > 0 else (n == 0).astype(float)
        shifts = n * (self.m_j + 0.5 * self.v_j) - lt * kbar
        vols = np.sqrt(self.sigma**2 + n * self.v_j / tau)
        return _mixture(x, K, r, tau, w, shifts, vols)


def model_delta(pricer: Pricer, ctx: MarketContext, K: float) -> float:
    """Delta of the call at ``ctx`` (analytic for Black-Scholes, finite difference otherwise)."""
    return float(pricer.delta(np.array([ctx.x]), ctx.tau, K, ctx.r)[0])


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HedgeConfig:
    """One delta-hedging experiment: short one call, hedge in the stock, finance at ``r``."""

    pricer: Pricer
    physical: object
    x0: float
    K: float
    T: float
    r: float
    n_steps: int = 126
    n_paths: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("at least one rebalancing step is needed")
        ensure_valid(self.physical, MarketContext(self.r, self.x0, self.T))


@dataclass
class HedgeReport:
    pnl: np.ndarray = field(repr=False)
    var_5: float
    es_5: float
    premium: float
    config: HedgeConfig = field(repr=False)
    path_checksum: str = ""

    @property
    def mean_pnl(self) -> float:
        return float(self.pnl.mean())


def hedge_simulate(config: HedgeConfig, level: float = 0.05) -> HedgeReport:
    """Sell the call at the model price, hold the model delta, rebalance on an even grid.

    ``pnl`` is the terminal value of (premium + hedge + cash) minus the payoff.
    """
    c = config
    paths = simulate_p(c.physical, c.x0, c.T, c.n_paths, c.n_steps, c.seed)
    s = paths.prices()
    dt = paths.dt
    growth = math.exp(c.r * dt)

    premium = float(c.pricer.call(np.array([c.x0]), c.T, c.K, c.r)[0])
    delta = c.pricer.delta(s[:, 0], c.T, c.K, c.r)
    cash = premium - delta * s[:, 0]
    for i in range(1, c.n_steps):
        cash *= growth
        new = c.pricer.delta(s[:, i], c.T - i * dt, c.K, c.r)
        cash -= (new - delta) * s[:, i]
        delta = new
    st = s[:, -1]
    pnl = cash * growth + delta * st - np.maximum(st - c.K, 0.0)
    var, es = var_es(pnl, level)
    return HedgeReport(pnl, var, es, premium, c, paths.checksum())


def var_es(pnl: Sequence[float], alpha: float = 0.05) -> tuple[float, float]:
    """Empirical VaR and ES of the loss ``-pnl`` at tail probability ``alpha``.

    VaR is the ``ceil((1 - alpha) n)``-th smallest loss; ES is the mean of the
    worst ``floor(alpha n)`` losses.
    """
    losses = np.sort(-np.asarray(pnl, dtype=float))
    n = losses.size
    if n == 0:
        raise ValueError("no samples")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    # the small offsets stop (1 - 0.05) * 100 = 95.00000000000001 from moving a rank
    rank = math.ceil((1.0 - alpha) * n - 1e-9)
    tail = math.floor(alpha * n + 1e-9)
    if tail == 0:
        raise ValueError(f"alpha={alpha} leaves no tail samples among n={n}; use more samples")
    return float(losses[rank - 1]), float(losses[n - tail:].mean())


@dataclass(frozen=True)
class SweepPoint:
    psi: float
    var_5: float
    es_5: float
    premium: float
    path_checksum: str


def var_es_sweep(base: HedgeConfig, model: CJD, psi_grid: Sequence[float], cls="exponential",
                 policy: Optional[TruncationPolicy] = None, level: float = 0.05
                 ) -> tuple[list[SweepPoint], list[tuple[float, str]]]:
    """Re-run ``base`` with the CJD second-order pricer at each ``psi``.

    Every run reuses ``base.seed``, so all points see the same physical paths
    (checked through the path checksum).  Failing points are returned
    separately rather than raised.
    """
    cls = MeasureClass.parse(cls)
    policy = policy or (base.pricer.policy if isinstance(base.pricer, CJDPricer) else ADAPTIVE)
    points, failures = [], []
    checksum = None
    for psi in psi_grid:
        try:
            meas = cjd_measure(model, base.r, float(psi), cls)
            rep = hedge_simulate(replace(base, pricer=CJDPricer(model, meas, policy)), level)
        except Exception as exc:  # recorded per point, the sweep continues
            failures.append((float(psi), f"{type(exc).__name__}: {exc}"))
            continue
        if checksum is None:
            checksum = rep.path_checksum
        elif rep.path_checksum != checksum:
            raise AssertionError("physical paths differ between sweep points")
        points.append(SweepPoint(float(psi), rep.var_5, rep.es_5, rep.premium, rep.path_checksum))
    return points, failures


def no_jump_risk_pricer(model: CJD, r: float, policy: TruncationPolicy = ADAPTIVE) -> CJDPricer:
    """CJD pricer with the Black-Scholes risk premium and the jump intensity left unchanged."""
    return CJDPricer(model, cjd_no_jump_risk(model, r), policy)
