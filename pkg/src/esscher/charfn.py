"""Characteristic functions of the log-return ``X_T = ln(S_T/S_0)``.

Every constructor returns a :class:`CharFn`, i.e. ``omega -> E[exp(i omega X_T)]``
evaluated on complex arrays, together with the strip of ``Im(omega)`` on
which it is finite.  For a martingale measure ``Phi(-i) = e^{rT}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .measure import EsscherMeasure, jump_exponent, moment_strip
from .models import CJD, LJD, VG, DomainError, KouDE, MeasureClass, ensure_valid

# exp() of anything below this is exactly zero in double precision
_UNDERFLOW = -745.2


@dataclass(frozen=True)
class CharFn:
    """Evaluable characteristic function over a horizon ``T``.

    Attributes:
        family: Model tag (``"bs"``, ``"cjd"``, ``"ljd"``, ``"kou"``, ``"vg"``).
        measure: Human-readable measure description.
        T: Horizon in years.
        exponent: Per-unit-time exponent ``kappa``, with ``Phi = exp(T kappa)``.
        strip: Open interval of ``Im(omega)`` where ``Phi`` is finite.
        sigma: Diffusion volatility, used for the Gaussian decay envelope.
        bound: ``p -> max_u Re kappa(u - i p) + u^2 sigma^2 / 2``; lets evaluation
            skip arguments whose value underflows to zero anyway.
    """

    family: str
    measure: str
    T: float
    exponent: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    strip: tuple[float, float] = (-math.inf, math.inf)
    sigma: float = 0.0
    bound: Optional[Callable[[float], float]] = field(default=None, repr=False)

    def admits(self, omega) -> bool:
        im = np.imag(np.asarray(omega, dtype=complex))
        return bool(np.all((im > self.strip[0]) & (im < self.strip[1])))

    def admits_moment(self, p: float) -> bool:
        """Whether ``E[e^{p X_T}]`` is finite, i.e. ``Phi(-i p)`` is defined."""
        return self.admits(-1j * p)

    def __call__(self, omega):
        w = np.asarray(omega, dtype=complex)
        scalar = w.ndim == 0
        w = np.atleast_1d(w)
        if not self.admits(w):
            raise DomainError(
                f"{self.family} characteristic function is only defined for Im(omega) in {self.strip}"
            )
        out = np.zeros(w.shape, dtype=complex)
        live = np.ones(w.shape, dtype=bool)
        if self.sigma > 0 and self.bound is not None:
            for im in np.unique(w.imag):
                sel = w.imag == im
                env = self.T * (self.bound(-im) - 0.5 * self.sigma**2 * w.real[sel] ** 2)
                live[sel] = env > _UNDERFLOW
        if live.any():
            with np.errstate(under="ignore"):
                out[live] = np.exp(self.T * self.exponent(w[live]))
        return out[0] if scalar else out

    def martingale_error(self, r: float) -> float:
        """``|Phi(-i) - e^{rT}|``."""
        return float(abs(self(-1j) - math.exp(r * self.T)))


def _strip_from_moments(p_lo: float, p_hi: float) -> tuple[float, float]:
    return -p_hi, -p_lo


def charfn_bs(r: float, sigma: float, T: float) -> CharFn:
    """Risk-neutral Black-Scholes: ``X_T ~ N((r - sigma^2/2) T, sigma^2 T)``."""
    drift = r - 0.5 * sigma**2

    def kappa(w):
        return 1j * w * drift - 0.5 * sigma**2 * w * w

    return CharFn("bs", "risk-neutral", T, kappa, sigma=sigma,
                  bound=lambda p: p * drift + 0.5 * p * p * sigma**2)


def _jd_charfn(model, eta: float, psi: float, cls: MeasureClass, T: float, method: str,
               family: str, label: str) -> CharFn:
    """Shared builder: ``kappa(w) = i w (log_drift + eta sigma^2) - w^2 sigma^2/2 + J(i w)``."""
    sig = getattr(model, "sigma", 0.0)
    drift = model.log_drift + eta * sig**2
    p_lo, p_hi = moment_strip(model, eta, psi, cls)

    def kappa(w):
        return 1j * w * drift - 0.5 * sig**2 * w * w + jump_exponent(model, 1j * w, eta, psi, cls, method=method)

    def bound(p):
        return p * drift + 0.5 * p * p * sig**2 + float(np.real(jump_exponent(model, p, eta, psi, cls, method="auto")))

    return CharFn(family, label, T, kappa, _strip_from_moments(p_lo, p_hi), sig, bound)


def _label(cls: MeasureClass, eta: float, psi: float) -> str:
    return f"{cls.value} Esscher (eta={eta:.10g}, psi={psi:.10g})"


def charfn_cjd(model: CJD, eta: float, psi: float, cls="exponential", T: float = 1.0) -> CharFn:
    """Closed form for constant jumps: Poisson(``Lambda``) jumps of size ``gamma``, Brownian drift shifted by ``eta sigma^2``."""
    ensure_valid(model)
    cls = MeasureClass.parse(cls)
    return _jd_charfn(model, eta, psi, cls, T, "auto", "cjd", _label(cls, eta, psi))


def charfn_jd_general(model, eta: float, psi: float, cls="exponential", T: float = 1.0,
                      method: str = "grid") -> CharFn:
    """Quadrature form for any jump law and either measure class.

    ``method="grid"`` evaluates many arguments at once (FFT use);
    ``method="quad"`` uses adaptive quadrature per argument (oracle use).
    """
    ensure_valid(model)
    cls = MeasureClass.parse(cls)
    if method not in ("grid", "quad"):
        raise ValueError("method must be 'grid' or 'quad'")
    return _jd_charfn(model, eta, psi, cls, T, method, model.family, _label(cls, eta, psi))


def charfn_ljd_2nd(model: LJD, eta: float, psi: float, T: float = 1.0) -> CharFn:
    """Exponential second-order measure with normal jumps (closed form through ``nu_tilde``)."""
    ensure_valid(model)
    if not 1.0 - 2.0 * psi * model.sigma_j**2 > 0:
        raise DomainError("1 - 2 psi sigma_J^2 must be positive")
    cls = MeasureClass.EXPONENTIAL
    return _jd_charfn(model, eta, psi, cls, T, "auto", "ljd", _label(cls, eta, psi))


def charfn_merton_qbs(model: LJD, r: float, T: float = 1.0) -> CharFn:
    """Merton's risk-neutral law: jump law kept, drift set so that ``Phi(-i) = e^{rT}``."""
    ensure_valid(model)
    sig, lam, mj, sj = model.sigma, model.lam, model.mu_j, model.sigma_j
    nu = model.mean_jump
    drift = r - 0.5 * sig**2 - lam * nu

    def jumps(w):
        return lam * np.expm1(1j * w * mj - 0.5 * w * w * sj**2)

    def kappa(w):
        return 1j * w * drift - 0.5 * sig**2 * w * w + jumps(w)

    def bound(p):
        return p * drift + 0.5 * p * p * sig**2 + lam * math.expm1(p * mj + 0.5 * p * p * sj**2)

    return CharFn("ljd", "Merton risk-neutral", T, kappa, sigma=sig, bound=bound)


def charfn_kou_2nd(model: KouDE, eta: float, psi: float, T: float = 1.0) -> CharFn:
    """Exponential second-order measure with double-exponential jumps; needs ``psi < 0``.

    The tilted moment generating function is evaluated through the scaled
    complementary error function, so no ``exp(theta^2)`` factor is formed.
    """
    ensure_valid(model)
    if not psi < 0:
        raise DomainError("the second-order Kou form needs psi < 0; use charfn_kou_1st for psi = 0")
    cls = MeasureClass.EXPONENTIAL
    return _jd_charfn(model, eta, psi, cls, T, "auto", "kou", _label(cls, eta, psi))


def charfn_kou_1st(model: KouDE, eta: float, T: float = 1.0) -> CharFn:
    """First-order Esscher measure with double-exponential jumps (rational form).

    Finite only while ``-eta2 < eta + Re(i omega) < eta1``; arguments outside
    the strip raise :class:`DomainError` naming the violated bound.
    """
    ensure_valid(model)
    cls = MeasureClass.EXPONENTIAL
    if not -model.eta2 < eta < model.eta1:
        raise DomainError(f"first-order Kou needs -eta2 < eta < eta1, got eta={eta}")
    return _jd_charfn(model, eta, 0.0, cls, T, "auto", "kou", _label(cls, eta, 0.0))


def charfn_kou_qbs(model: KouDE, r: float, T: float = 1.0) -> CharFn:
    """Kou's risk-neutral law with the physical jump law."""
    ensure_valid(model)
    sig, lam, p, q, e1, e2 = model.sigma, model.lam, model.p, model.q, model.eta1, model.eta2
    drift = r - 0.5 * sig**2 - lam * model.mean_jump

    def mgf_m1(u):
        return p * e1 / (e1 - u) + q * e2 / (e2 + u) - 1.0

    def kappa(w):
        return 1j * w * drift - 0.5 * sig**2 * w * w + lam * mgf_m1(1j * w)

    def bound(pp):
        return pp * drift + 0.5 * pp * pp * sig**2 + lam * mgf_m1(pp)

    return CharFn("kou", "Kou risk-neutral", T, kappa, (-e1, e2), sig, bound)


def charfn_vg_1st(model: VG, eta: float, T: float = 1.0) -> CharFn:
    """First-order Esscher measure for Variance Gamma (log-ratio closed form)."""
    ensure_valid(model)
    cls = MeasureClass.EXPONENTIAL
    return _jd_charfn(model, eta, 0.0, cls, T, "auto", "vg", _label(cls, eta, 0.0))


def charfn_vg_2nd(model: VG, theta: float, psi: float, T: float = 1.0, method: str = "grid") -> CharFn:
    """Exponential second-order measure for Variance Gamma, ``psi <= 0``, by quadrature of the Levy density."""
    ensure_valid(model)
    if psi > 0:
        raise DomainError("Variance Gamma tilt needs psi <= 0")
    return charfn_jd_general(model, theta, psi, "exponential", T, method=method)


def charfn_for_measure(model, measure: EsscherMeasure, T: float, method: str = "grid") -> CharFn:
    """Pick the closed form where one exists, otherwise the quadrature form."""
    cls = measure.cls
    eta, psi = measure.eta, measure.psi
    if isinstance(model, CJD):
        return charfn_cjd(model, eta, psi, cls, T)
    if cls is MeasureClass.LINEAR:
        return charfn_jd_general(model, eta, psi, cls, T, method=method)
    if isinstance(model, LJD):
        return charfn_ljd_2nd(model, eta, psi, T)
    if isinstance(model, KouDE):
        return charfn_kou_1st(model, eta, T) if psi == 0 else charfn_kou_2nd(model, eta, psi, T)
    if isinstance(model, VG):
        return charfn_vg_1st(model, eta, T) if psi == 0 else charfn_vg_2nd(model, eta, psi, T, method)
    raise TypeError(f"no characteristic function for {type(model).__name__}")
