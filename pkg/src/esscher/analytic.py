"""Closed-form European option prices.

Black-Scholes, the Poisson-weighted Black-Scholes series for the constant
jump diffusion under a second-order Esscher measure, the explicit log-normal
jump formula, and psi sweeps producing pricing intervals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import norm, poisson

from .measure import (
    EsscherMeasureCJD,
    SolverError,
    cjd_measure,
    nu_tilde,
)
from .models import CJD, LJD, DomainError, MarketContext, MeasureClass, ensure_valid


class TruncationError(RuntimeError):
    """The series needs more terms than the policy's hard cap allows."""


@dataclass(frozen=True)
class TruncationPolicy:
    """How many Poisson terms to sum.

    ``mode="fixed"`` sums ``k = 0..n`` (the partial sum ``F_n``).
    ``mode="adaptive"`` picks the index from the Poisson mean: at least
    ``mean + margin*sqrt(mean)`` and far enough that the covered mass is
    ``>= mass``.  Either way the index may not exceed ``n_max``.
    """

    mode: str = "adaptive"
    n: int = 10
    mass: float = 1.0 - 1e-12
    margin: float = 10.0
    n_max: int = 5000

    def __post_init__(self):
        if self.mode not in ("fixed", "adaptive"):
            raise ValueError(f"unknown truncation mode {self.mode!r}")
        if self.mode == "fixed" and self.n < 0:
            raise ValueError("fixed truncation needs n >= 0")
        if not 0.0 < self.mass < 1.0:
            raise ValueError("adaptive mass must lie in (0, 1)")
        if self.mode == "fixed" and self.n > self.n_max:
            raise ValueError("fixed n exceeds n_max")

    @classmethod
    def fixed(cls, n: int, n_max: int = 5000) -> "TruncationPolicy":
        return cls(mode="fixed", n=int(n), n_max=max(int(n_max), int(n)))

    @classmethod
    def adaptive(cls, mass: float = 1.0 - 1e-12, margin: float = 10.0, n_max: int = 5000) -> "TruncationPolicy":
        return cls(mode="adaptive", mass=mass, margin=margin, n_max=n_max)

    def last_index(self, mean: float) -> int:
        """Largest summed index for a Poisson law with the given mean."""
        if self.mode == "fixed":
            return self.n
        n = math.ceil(mean + self.margin * math.sqrt(mean))
        if mean > 0:
            n = max(n, int(poisson.ppf(self.mass, mean)))
        if n > self.n_max:
            raise TruncationError(
                f"series needs {n} terms (Poisson mean {mean:.6g}) but n_max={self.n_max}"
            )
        return n


ADAPTIVE = TruncationPolicy()


# ---------------------------------------------------------------------------
# Black-Scholes
# ---------------------------------------------------------------------------

def _bs_call_raw(x, K, r, tau, sigma):
    """Vectorised Black-Scholes call; ``x``, ``K`` and ``sigma`` broadcast against each other."""
    x = np.asarray(x, dtype=float)
    K = np.asarray(K, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    disc_k = K * math.exp(-r * tau)
    sd = sigma * math.sqrt(tau)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = (np.log(x / K) + r * tau) / sd + 0.5 * sd
        out = x * norm.cdf(d1) - disc_k * norm.cdf(d1 - sd)
    out = np.where(sd > 0, out, np.maximum(x - disc_k, 0.0))
    # a zero strike is a claim on the spot itself
    return np.where(K == 0, x + 0.0 * out, out)


def bs_call(ctx: MarketContext, K: float, sigma: float) -> float:
    """Black-Scholes call on spot ``ctx.x`` with strike ``K``.

    At ``tau = 0`` the intrinsic value is returned.
    """
    tau = ctx.tau
    if tau <= 0:
        return max(ctx.x - K, 0.0)
    if not sigma >= 0:
        raise ValueError("sigma must be non-negative")
    return float(_bs_call_raw(ctx.x, K, ctx.r, tau, sigma))


def bs_put(ctx: MarketContext, K: float, sigma: float) -> float:
    return european_put_from_parity(bs_call(ctx, K, sigma), ctx, K)


def bs_delta(ctx: MarketContext, K: float, sigma: float) -> float:
    """``N(d+)``."""
    tau = ctx.tau
    if tau <= 0 or K == 0:
        return 1.0 if ctx.x > K else 0.0
    sd = sigma * math.sqrt(tau)
    return float(norm.cdf((math.log(ctx.x / K) + ctx.r * tau) / sd + 0.5 * sd))


def european_put_from_parity(call_price: float, ctx: MarketContext, K: float) -> float:
    """Put from put-call parity: ``C - x + K e^{-r tau}``."""
    return call_price - ctx.x + K * math.exp(-ctx.r * ctx.tau)


# ---------------------------------------------------------------------------
# Constant jump size
# ---------------------------------------------------------------------------

def domination_mean(lam_adj: float, gamma: float, tau: float) -> float:
    """Mean ``Lambda (1 + gt) tau`` of the Poisson law dominating the series terms."""
    return lam_adj * math.exp(gamma) * tau


def domination_bound(ctx: MarketContext, model: CJD, lam_adj: float, last: int) -> float:
    """Upper bound ``x P(N > last)`` on the neglected tail of the CJD series."""
    m = domination_mean(lam_adj, model.gamma, ctx.tau)
    return float(ctx.x * poisson.sf(last, m))


@dataclass(frozen=True)
class SeriesPrice:
    price: float
    terms: int
    bound: float


def cjd_call_detail(ctx: MarketContext, K: float, model: CJD, measure: EsscherMeasureCJD,
                    policy: TruncationPolicy = ADAPTIVE) -> SeriesPrice:
    """:func:`cjd_call` together with the summed index and the domination bound on the remainder."""
    ensure_valid(ctx, model)
    tau = ctx.tau
    lam_adj = measure.lam_adj
    if not lam_adj >= 0 or not math.isfinite(lam_adj):
        raise DomainError(f"adjusted intensity {lam_adj} is not a finite non-negative number")
    m = lam_adj * tau
    last = policy.last_index(domination_mean(lam_adj, model.gamma, tau))
    k = np.arange(last + 1)
    weights = poisson.pmf(k, m) if m > 0 else (k == 0).astype(float)
    spots = ctx.x * np.exp(k * model.gamma - m * model.gamma_tilde)
    prices = _bs_call_raw(spots, K, ctx.r, tau, model.sigma)
    price = float(np.sum(weights * prices))
    return SeriesPrice(price, int(last), domination_bound(ctx, model, lam_adj, int(last)))


def cjd_call_strikes(ctx: MarketContext, strikes, model: CJD, measure: EsscherMeasureCJD,
                     policy: TruncationPolicy = ADAPTIVE) -> np.ndarray:
    """:func:`cjd_call` over an array of strikes sharing one series."""
    ensure_valid(ctx, model)
    tau = ctx.tau
    lam_adj = measure.lam_adj
    if not lam_adj >= 0 or not math.isfinite(lam_adj):
        raise DomainError(f"adjusted intensity {lam_adj} is not a finite non-negative number")
    m = lam_adj * tau
    last = policy.last_index(domination_mean(lam_adj, model.gamma, tau))
    k = np.arange(last + 1)
    weights = poisson.pmf(k, m) if m > 0 else (k == 0).astype(float)
    spots = ctx.x * np.exp(k * model.gamma - m * model.gamma_tilde)
    strikes = np.asarray(strikes, dtype=float)
    prices = _bs_call_raw(spots[None, :], strikes[:, None], ctx.r, tau, model.sigma)
    return prices @ weights


def cjd_call(ctx: MarketContext, K: float, model: CJD, measure: EsscherMeasureCJD,
             policy: TruncationPolicy = ADAPTIVE) -> float:
    """European call under a solved CJD measure.

    The price is the Poisson(``Lambda tau``) mixture of Black-Scholes prices
    with shifted spots ``x exp(k gamma - Lambda gt tau)``.
    """
    return cjd_call_detail(ctx, K, model, measure, policy).price


def cjd_put(ctx: MarketContext, K: float, model: CJD, measure: EsscherMeasureCJD,
            policy: TruncationPolicy = ADAPTIVE) -> float:
    return european_put_from_parity(cjd_call(ctx, K, model, measure, policy), ctx, K)


@dataclass
class PriceInterval:
    """Prices swept over ``psi``, with the Black-Scholes floor and the spot ceiling."""

    points: list[tuple[float, float]]
    lower_bound: float
    upper_bound: float
    failures: list[tuple[float, str]] = field(default_factory=list)

    @property
    def psi(self) -> np.ndarray:
        return np.array([p for p, _ in self.points])

    @property
    def prices(self) -> np.ndarray:
        return np.array([c for _, c in self.points])

    def is_monotone(self, slack: float = 1e-9) -> bool:
        return bool(np.all(np.diff(self.prices) >= -slack))

    def within_bounds(self, slack: float = 1e-8) -> bool:
        c = self.prices
        return bool(np.all(c >= self.lower_bound - slack) and np.all(c <= self.upper_bound + slack))


def cjd_price_interval(ctx: MarketContext, K: float, model: CJD, psi_grid: Sequence[float],
                       cls="exponential", policy: TruncationPolicy = ADAPTIVE,
                       check: Optional[bool] = None) -> PriceInterval:
    """Price the call at each ``psi`` of an increasing grid.

    Failures at individual grid points are recorded rather than raised.  With
    an adaptive policy the monotonicity and bound invariants are checked
    (``check=None`` means "check when adaptive").
    """
    psi_grid = [float(p) for p in psi_grid]
    if any(b < a for a, b in zip(psi_grid, psi_grid[1:])):
        raise ValueError("psi grid must be non-decreasing")
    cls = MeasureClass.parse(cls)
    out = PriceInterval([], bs_call(ctx, K, model.sigma), ctx.x)
    for psi in psi_grid:
        try:
            meas = cjd_measure(model, ctx.r, psi, cls)
            out.points.append((psi, cjd_call(ctx, K, model, meas, policy)))
        except (SolverError, TruncationError, DomainError) as exc:
            out.failures.append((psi, str(exc)))
    if check is None:
        check = policy.mode == "adaptive"
    if check and out.points:
        if not out.is_monotone():
            raise AssertionError("adaptive prices are not non-decreasing in psi")
        if not out.within_bounds():
            raise AssertionError("prices left the [Black-Scholes, spot] interval")
    return out


# ---------------------------------------------------------------------------
# Log-normal jumps
# ---------------------------------------------------------------------------

def _ljd_mean(model: LJD, theta: float, psi: float, tau: float) -> float:
    """Dominating Poisson mean for the LJD series under the tilted law."""
    g = 1.0 - 2.0 * psi * model.sigma_j**2
    lam_adj = model.lam * (1.0 + nu_tilde(theta, psi, model.mu_j, model.sigma_j))
    m_j = (model.mu_j + theta * model.sigma_j**2) / g
    return float(lam_adj * tau * math.exp(m_j + 0.5 * model.sigma_j**2 / g))


def ljd_call_second_order(ctx: MarketContext, K: float, model: LJD, theta: float, psi: float,
                          policy: TruncationPolicy = ADAPTIVE,
                          allow_positive_psi: bool = False) -> float:
    """Explicit series for the call under the exponential second-order measure with normal jumps.

    Terms are indexed by the physical jump count with weight
    ``e^{-lam tau} (lam tau)^n / n!``.  Each term requires
    ``alpha_n = 1 - 2 n psi sigma_J^2 > 0``; positive ``psi`` is only accepted
    with a fixed policy and ``allow_positive_psi=True``.
    """
    ensure_valid(ctx, model)
    if psi > 0 and not (allow_positive_psi and policy.mode == "fixed"):
        raise DomainError("psi > 0 needs a fixed truncation policy and allow_positive_psi=True")
    tau = ctx.tau
    lam, mj, sj, sig = model.lam, model.mu_j, model.sigma_j, model.sigma
    nt0 = float(nu_tilde(theta, psi, mj, sj))
    nt1 = float(nu_tilde(theta + 1.0, psi, mj, sj))
    last = policy.last_index(max(_ljd_mean(model, theta, psi, tau), lam * tau))
    n = np.arange(last + 1, dtype=float)
    alpha = 1.0 - 2.0 * n * psi * sj**2
    if np.any(alpha <= 0):
        bad = int(n[np.argmax(alpha <= 0)])
        raise DomainError(f"alpha_n = 1 - 2 n psi sigma_J^2 <= 0 at n={bad}, psi={psi}")
    sn2 = sig**2 + n * sj**2 / tau
    sn = np.sqrt(sn2)
    phi = 2.0 * n * psi * mj * sj / (sn * math.sqrt(tau))
    # theta*beta and (theta+1)*beta~ written so that theta = 0 is harmless
    tb = (theta + phi) / alpha
    tb1 = (theta + 1.0 + phi) / alpha
    shift = n * (mj + 0.5 * sj**2 + theta * sj**2) - lam * (nt1 - nt0) * tau
    big_gamma = (n * (theta * mj + psi * mj**2 + 0.5 * theta**2 * sj**2) - lam * nt0 * tau
                 - 0.5 * np.log(alpha) + 0.5 * sn2 * tau * (alpha * tb**2 - theta**2))
    big_gamma_t = shift + 0.5 * sn2 * tau * (alpha * tb1**2 - alpha * tb**2 - 2.0 * theta - 1.0)
    delta_t = shift + sn2 * tau * (tb1 - (theta + 1.0))
    delta = shift + sn2 * tau * (tb - theta)
    sd = sn * math.sqrt(tau) / np.sqrt(alpha)
    d_plus = (math.log(ctx.x / K) + delta_t + (ctx.r + 0.5 * sn2) * tau) / sd
    d_minus = (math.log(ctx.x / K) + delta + (ctx.r - 0.5 * sn2) * tau) / sd
    w = poisson.pmf(n, lam * tau)
    terms = w * np.exp(big_gamma) * (ctx.x * np.exp(big_gamma_t) * norm.cdf(d_plus)
                                     - K * math.exp(-ctx.r * tau) * norm.cdf(d_minus))
    return float(np.sum(terms))


def ljd_call_first_order(ctx: MarketContext, K: float, model: LJD, theta: float,
                         policy: TruncationPolicy = ADAPTIVE) -> float:
    """First-order (``psi = 0``) explicit series: Black-Scholes prices at ``(x^n, sigma^n)`` weighted by ``e^Upsilon``."""
    ensure_valid(ctx, model)
    tau = ctx.tau
    lam, mj, sj, sig = model.lam, model.mu_j, model.sigma_j, model.sigma
    nt0 = float(nu_tilde(theta, 0.0, mj, sj))
    nt1 = float(nu_tilde(theta + 1.0, 0.0, mj, sj))
    last = policy.last_index(max(_ljd_mean(model, theta, 0.0, tau), lam * tau))
    n = np.arange(last + 1, dtype=float)
    upsilon = n * (theta * mj + 0.5 * theta**2 * sj**2) - lam * nt0 * tau
    xn = ctx.x * np.exp(n * (mj + 0.5 * sj**2 + theta * sj**2) - lam * (nt1 - nt0) * tau)
    sn = np.sqrt(sig**2 + n * sj**2 / tau)
    w = poisson.pmf(n, lam * tau)
    return float(np.sum(w * np.exp(upsilon) * _bs_call_raw(xn, K, ctx.r, tau, sn)))


def ljd_call_exact(ctx: MarketContext, K: float, model: LJD, theta: float, psi: float,
                   policy: TruncationPolicy = ADAPTIVE) -> float:
    """Call under the exponential second-order measure written as a Merton series.

    Under the tilted measure jumps arrive at rate ``lam (1 + nu_tilde(theta, psi))``
    and are ``N((mu_J + theta sigma_J^2)/g, sigma_J^2/g)`` with ``g = 1 - 2 psi sigma_J^2``.
    Valid for every admissible ``psi`` (including ``psi > 0`` with ``g > 0``).
    """
    ensure_valid(ctx, model)
    tau = ctx.tau
    sj = model.sigma_j
    g = 1.0 - 2.0 * psi * sj**2
    lam_adj = model.lam * (1.0 + float(nu_tilde(theta, psi, model.mu_j, sj)))
    m_j = (model.mu_j + theta * sj**2) / g
    v_j = sj**2 / g
    return _merton_series(ctx, K, model.sigma, lam_adj, m_j, v_j, policy)


def merton_call(ctx: MarketContext, K: float, model: LJD, policy: TruncationPolicy = ADAPTIVE) -> float:
    """Merton's price, jump risk left unpriced (jump law unchanged, drift set to ``r``)."""
    ensure_valid(ctx, model)
    return _merton_series(ctx, K, model.sigma, model.lam, model.mu_j, model.sigma_j**2, policy)


def _merton_series(ctx, K, sigma, lam, m_j, v_j, policy) -> float:
    tau = ctx.tau
    kbar = math.expm1(m_j + 0.5 * v_j)
    lt = lam * tau
    last = policy.last_index(lt * (1.0 + kbar))
    n = np.arange(last + 1, dtype=float)
    w = poisson.pmf(n, lt) if lt > 0 else (n == 0).astype(float)
    spots = ctx.x * np.exp(n * (m_j + 0.5 * v_j) - lt * kbar)
    vols = np.sqrt(sigma**2 + n * v_j / tau)
    return float(np.sum(w * _bs_call_raw(spots, K, ctx.r, tau, vols)))
