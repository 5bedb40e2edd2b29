"""Carr-Madan FFT pricing of European calls and puts from a characteristic function."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .charfn import CharFn
from .models import DomainError

# strikes with |ln(K/x)| beyond this are outside the checked region
REPORT_WINDOW = 3.0


@dataclass(frozen=True)
class FftGrid:
    """Frequency / log-strike grid.

    ``dk = 2 pi / (N du)``; the log-strike grid is centred on ``ln x`` unless
    ``k0`` is given.  Calls are damped by ``e^{alpha k}`` and need
    ``E[S_T^{1+alpha}] < inf``.  Puts are damped by ``e^{-alpha_put k}`` and
    need ``alpha_put > 1`` and ``E[S_T^{1-alpha_put}] < inf``; the damped put
    only decays like ``e^{-(alpha_put - 1) k}`` for large strikes, so a value
    well above 1 keeps the periodic wrap-around of the transform small.
    """

    N: int = 4096
    du: float = 0.25
    alpha: float = 1.5
    alpha_put: float = 2.5
    k0: float | None = None

    def __post_init__(self):
        if self.N < 4 or self.N & (self.N - 1):
            raise ValueError("N must be a power of two")
        if not self.du > 0:
            raise ValueError("du must be positive")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.alpha_put > 1:
            raise ValueError("alpha_put must exceed 1")

    @property
    def dk(self) -> float:
        return 2.0 * math.pi / (self.N * self.du)

    def origin(self, x: float) -> float:
        return self.k0 if self.k0 is not None else math.log(x) - 0.5 * self.N * self.dk

    @property
    def u(self) -> np.ndarray:
        return np.arange(self.N) * self.du

    def simpson(self) -> np.ndarray:
        j = np.arange(self.N)
        w = (3.0 + (-1.0) ** (j + 1)) / 3.0
        w[0] = 1.0 / 3.0
        return w * self.du


@dataclass(frozen=True)
class FftCurve:
    """Prices on the log-strike grid of one transform."""

    kind: str
    log_strikes: np.ndarray = field(repr=False)
    prices: np.ndarray = field(repr=False)
    x: float
    r: float
    T: float
    clamped: int = 0
    shortfall: float = 0.0

    @property
    def strikes(self) -> np.ndarray:
        return np.exp(self.log_strikes)

    def pairs(self) -> list[tuple[float, float]]:
        return list(zip(self.strikes.tolist(), self.prices.tolist()))

    def central(self, fraction: float = 0.5) -> slice:
        """Index range of the central ``fraction`` of the grid."""
        n = len(self.prices)
        half = int(n * fraction / 2)
        return slice(n // 2 - half, n // 2 + half)


def _intrinsic(kind: str, x: float, K: np.ndarray, r: float, T: float) -> np.ndarray:
    fwd = x - K * math.exp(-r * T)
    return np.maximum(fwd, 0.0) if kind == "call" else np.maximum(-fwd, 0.0)


def _transform(cf: CharFn, x: float, r: float, T: float, grid: FftGrid, kind: str,
               tol: float) -> FftCurve:
    a = grid.alpha if kind == "call" else grid.alpha_put
    if kind == "call":
        p = 1.0 + a
        shift = -(1.0 + a) * 1j
    else:
        p = 1.0 - a
        shift = -(1.0 - a) * 1j
    if not cf.admits_moment(p):
        raise DomainError(f"damping alpha={a} needs E[S_T^{p:g}] < inf, outside the characteristic function's strip")
    probe = cf(-1j * p)
    if not np.isfinite(probe):
        raise DomainError(f"Phi(-{p:g} i) is not finite; choose a smaller damping factor")

    u = grid.u
    lnx = math.log(x)
    w = u + shift
    phi = np.exp(1j * w * lnx) * cf(w)
    if kind == "call":
        denom = a * a + a - u * u + 1j * (1.0 + 2.0 * a) * u
    else:
        denom = a * a - a - u * u + 1j * (1.0 - 2.0 * a) * u
    psi = math.exp(-r * T) * phi / denom
    bad = np.flatnonzero(~np.isfinite(psi))
    if bad.size:
        raise FloatingPointError(f"characteristic function is not finite at u index {bad[0]} (u={u[bad[0]]})")

    k0 = grid.origin(x)
    ks = k0 + np.arange(grid.N) * grid.dk
    seq = np.exp(-1j * u * k0) * psi * grid.simpson()
    raw = np.fft.fft(seq).real / math.pi
    damp = -a if kind == "call" else a
    with np.errstate(over="ignore"):
        prices = np.exp(damp * ks) * raw

    floor = _intrinsic(kind, x, np.exp(ks), r, T)
    short = floor - prices
    # far from the money the transform's round-off is amplified by e^{|alpha k|}
    near = np.abs(ks - lnx) <= REPORT_WINDOW
    worst = float(np.max(short[near]))
    if worst > tol:
        warnings.warn(f"FFT {kind} price below intrinsic value by {worst:.3g} near the money",
                      RuntimeWarning, stacklevel=3)
    clamped = int(np.count_nonzero(short > 0))
    prices = np.maximum(prices, floor)
    return FftCurve(kind, ks, prices, x, r, T, clamped, max(worst, 0.0))


def fft_call_curve(cf: CharFn, x: float, r: float, T: float, grid: FftGrid = FftGrid(),
                   tol: float = 1e-4) -> FftCurve:
    """Call prices on the whole log-strike grid.

    Prices below intrinsic value are raised to it.  Shortfalls above ``tol``
    for strikes with ``|ln(K/x)| <= REPORT_WINDOW`` trigger a
    :class:`RuntimeWarning` and are recorded in ``FftCurve.shortfall``.
    """
    return _transform(cf, x, r, T, grid, "call", tol)


def fft_put_curve(cf: CharFn, x: float, r: float, T: float, grid: FftGrid = FftGrid(),
                  tol: float = 1e-4) -> FftCurve:
    """Put prices on the log-strike grid (damping ``e^{-alpha_put k}``)."""
    return _transform(cf, x, r, T, grid, "put", tol)


def price_at_strike(curve: FftCurve, K: float) -> float:
    """Cubic-spline interpolation of the curve in log-strike; no extrapolation."""
    k = math.log(K)
    ks = curve.log_strikes
    if not ks[0] <= k <= ks[-1]:
        raise ValueError(f"strike {K} is outside the grid [{math.exp(ks[0]):.6g}, {math.exp(ks[-1]):.6g}]")
    j = int(np.searchsorted(ks, k))
    if j < len(ks) and ks[j] == k:
        return float(curve.prices[j])
    lo, hi = max(j - 8, 0), min(j + 8, len(ks))
    return float(CubicSpline(ks[lo:hi], curve.prices[lo:hi])(k))


def prices_at_strikes(curve: FftCurve, strikes) -> np.ndarray:
    """:func:`price_at_strike` for many strikes with one spline over the covering grid window."""
    k = np.log(np.asarray(strikes, dtype=float))
    ks = curve.log_strikes
    if k.size == 0:
        return np.empty(0)
    if k.min() < ks[0] or k.max() > ks[-1]:
        raise ValueError(f"strikes must lie inside the grid [{math.exp(ks[0]):.6g}, {math.exp(ks[-1]):.6g}]")
    lo = max(int(np.searchsorted(ks, k.min())) - 8, 0)
    hi = min(int(np.searchsorted(ks, k.max())) + 8, len(ks))
    return CubicSpline(ks[lo:hi], curve.prices[lo:hi])(k)


def fft_price(cf: CharFn, x: float, r: float, T: float, K: float, kind: str = "call",
              grid: FftGrid = FftGrid()) -> float:
    curve = fft_call_curve(cf, x, r, T, grid) if kind == "call" else fft_put_curve(cf, x, r, T, grid)
    return price_at_strike(curve, K)
