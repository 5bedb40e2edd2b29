"""Second-order Esscher martingale measures.

For a jump model with log-price driver ``X`` the second-order Esscher density
tilts the jump law by ``exp(eta*zeta(x) + psi*zeta(x)**2)`` and the Brownian
part by ``eta*sigma``.  Given ``psi`` the first-order parameter ``eta`` is the
unique root of a monotone martingale condition; this module solves it and
exposes the tilted jump integrals reused by :mod:`esscher.charfn`.

The unifying quantity is the *jump exponent*

    J(z) = int (e^{z x} - 1) e^{eta zeta(x) + psi zeta(x)^2} nu(dx)

(``nu = lam F`` for jump diffusions, the Levy density for VG).  With it the
martingale residual is ``log_drift + sigma^2/2 + eta sigma^2 - r + J(1)`` and
the characteristic exponent is ``i w (log_drift + eta sigma^2) - w^2 sigma^2/2 + J(i w)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy import integrate, optimize, special

from .models import (
    CJD,
    LJD,
    VG,
    DomainError,
    EsscherSpec,
    KouDE,
    MeasureClass,
    ensure_valid,
)

EXP_CAP = 700.0
RESIDUAL_TOL = 1e-12


class SolverError(RuntimeError):
    """The martingale condition could not be solved."""


class QuadratureError(RuntimeError):
    """A tilted jump integral failed to converge."""


@dataclass(frozen=True)
class MartingaleResidual:
    value: float
    tolerance: float = RESIDUAL_TOL

    @property
    def certified(self) -> bool:
        return abs(self.value) <= self.tolerance


@dataclass(frozen=True)
class EsscherMeasure:
    """A solved (certified) second-order Esscher measure for one model."""

    cls: MeasureClass
    eta: float
    psi: float
    residual: float = 0.0

    @property
    def spec(self) -> EsscherSpec:
        return EsscherSpec(self.cls, self.psi, self.eta)


@dataclass(frozen=True)
class EsscherMeasureCJD(EsscherMeasure):
    """CJD measure, carrying the adjusted intensity ``lam_adj`` and Brownian drift ``drift_w``."""

    lam_adj: float = 0.0
    drift_w: float = 0.0


# ---------------------------------------------------------------------------
# Constant jump size
# ---------------------------------------------------------------------------

def _cjd_zeta(model: CJD, cls: MeasureClass) -> float:
    return model.gamma if cls is MeasureClass.EXPONENTIAL else model.gamma_tilde


def cjd_tilt_exponent(model: CJD, eta: float, psi: float, cls) -> float:
    z = _cjd_zeta(model, MeasureClass.parse(cls))
    return eta * z + psi * z * z


def cjd_residual(model: CJD, r: float, eta: float, psi: float, cls, cap: float = EXP_CAP) -> float:
    """``mu - r + eta sigma^2 + lam gt (e^{eta zeta + psi zeta^2} - 1)``.

    Returns a signed infinity (with a :class:`RuntimeWarning`) when the
    exponent exceeds ``cap``.
    """
    gt = model.gamma_tilde
    e = cjd_tilt_exponent(model, eta, psi, cls)
    if e > cap:
        warnings.warn(f"tilt exponent {e:.4g} exceeds cap {cap}", RuntimeWarning, stacklevel=2)
        return math.copysign(math.inf, gt)
    return model.mu - r + eta * model.sigma**2 + model.lam * gt * math.expm1(e)


def cjd_intensity(model: CJD, eta: float, psi: float, cls) -> float:
    """Jump intensity under the measure: ``lam exp(eta zeta + psi zeta^2)``."""
    return model.lam * math.exp(min(cjd_tilt_exponent(model, eta, psi, cls), EXP_CAP))


def cjd_intensity_from_drift(model: CJD, r: float, eta: float) -> float:
    """The same intensity read off the martingale condition: ``(r - mu - eta sigma^2 + lam gt)/gt``."""
    gt = model.gamma_tilde
    return (r - model.mu - eta * model.sigma**2 + model.lam * gt) / gt


def solve_eta_cjd(model: CJD, r: float, psi: float, cls) -> float:
    """Unique root in ``eta`` of :func:`cjd_residual`."""
    ensure_valid(model)
    if not math.isfinite(psi):
        raise ValueError("psi must be finite")
    cls = MeasureClass.parse(cls)
    z = _cjd_zeta(model, cls)
    gt = model.lam * model.gamma_tilde

    def f(eta):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return cjd_residual(model, r, eta, psi, cls)

    def df(eta):
        e = eta * z + psi * z * z
        return model.sigma**2 + gt * z * math.exp(min(e, EXP_CAP))

    return _solve_monotone(f, df, what=f"CJD eta(psi={psi})")


def cjd_measure_from_eta(model: CJD, r: float, eta: float, psi: float, cls) -> EsscherMeasureCJD:
    cls = MeasureClass.parse(cls)
    return EsscherMeasureCJD(
        cls=cls,
        eta=eta,
        psi=psi,
        residual=cjd_residual(model, r, eta, psi, cls),
        lam_adj=cjd_intensity(model, eta, psi, cls),
        drift_w=eta * model.sigma,
    )


def cjd_measure(model: CJD, r: float, psi: float, cls="exponential") -> EsscherMeasureCJD:
    """Solve for ``eta(psi)`` and return the certified CJD measure."""
    eta = solve_eta_cjd(model, r, psi, cls)
    return cjd_measure_from_eta(model, r, eta, psi, cls)


def cjd_no_jump_risk(model: CJD, r: float, cls="exponential") -> EsscherMeasureCJD:
    """Black-Scholes risk premium ``eta = (r - mu)/sigma^2`` with the jump intensity left at ``lam``.

    It is the member of the family with ``psi = -eta/zeta``.
    """
    ensure_valid(model)
    cls = MeasureClass.parse(cls)
    eta = (r - model.mu) / model.sigma**2
    psi = -eta / _cjd_zeta(model, cls)
    return cjd_measure_from_eta(model, r, eta, psi, cls)


def eta_psi_from_phi(model: CJD, r: float, phi: float, cls) -> tuple[float, float]:
    """Solver-free parametrisation by ``phi = (eta + psi zeta)/gt``.

    The martingale condition becomes linear in ``eta``.
    """
    ensure_valid(model)
    cls = MeasureClass.parse(cls)
    z = _cjd_zeta(model, cls)
    gt = model.gamma_tilde
    eta = (r - model.mu - model.lam * gt * math.expm1(phi * gt * z)) / model.sigma**2
    psi = (phi * gt - eta) / z
    return eta, psi


def phi_from_eta_psi(model: CJD, eta: float, psi: float, cls) -> float:
    z = _cjd_zeta(model, MeasureClass.parse(cls))
    return (eta + psi * z) / model.gamma_tilde


def map_linear_to_exponential(model: CJD, r: float, psi_lin: float) -> float:
    """The exponential-class ``psi`` giving the same density as linear-class ``psi_lin``."""
    eta = solve_eta_cjd(model, r, psi_lin, MeasureClass.LINEAR)
    g, gt = model.gamma, model.gamma_tilde
    return (eta * (gt - g) + psi_lin * gt * gt) / (g * g)


# ---------------------------------------------------------------------------
# General jump laws
# ---------------------------------------------------------------------------

def nu_tilde(y, psi: float, mu_j: float, sigma_j: float):
    """``E[exp(y J + psi J^2)] - 1`` for ``J ~ N(mu_j, sigma_j^2)``; ``y`` may be complex."""
    g = 1.0 - 2.0 * psi * sigma_j**2
    if not g > 0:
        raise DomainError(f"1 - 2 psi sigma_J^2 = {g:.6g} <= 0: Gaussian tilt integral diverges")
    f = sigma_j**2 * (y + 2.0 * psi * mu_j) ** 2 / (2.0 * g)
    return np.exp(y * mu_j + psi * mu_j**2 + f) / math.sqrt(g) - 1.0


def _kou_tilted_mgf(model: KouDE, u, psi: float):
    """``int e^{u x + psi x^2} F(dx)`` for the double-exponential law.

    ``psi < 0`` uses the scaled complementary error function so that the
    ``exp(theta^2)`` factor is never formed; ``psi == 0`` is the rational form.
    """
    u = np.asarray(u, dtype=complex)
    p, q, e1, e2 = model.p, model.q, model.eta1, model.eta2
    if psi == 0:
        return p * e1 / (e1 - u) + q * e2 / (e2 + u)
    a = -psi
    c = 0.5 * math.sqrt(math.pi / a)
    s = 2.0 * math.sqrt(a)
    up = c * special.erfcx((e1 - u) / s)
    down = c * special.erfcx((u + e2) / s)
    return p * e1 * up + q * e2 * down


def _vg_log_mgf(model: VG, u):
    """``log E[exp(u X^VG_1)] = -(1/kappa) log(1 - u m kappa - u^2 delta^2 kappa/2)``."""
    u = np.asarray(u, dtype=complex)
    k = model.kappa
    return -np.log(1.0 - u * model.m * k - 0.5 * u * u * model.delta**2 * k) / k


def _tail_status(model, eta: float, psi: float, cls: MeasureClass, p: float) -> tuple[bool, bool]:
    """Whether ``int_{x>0}`` and ``int_{x<0}`` of ``e^{p x} e^{tilt} nu(dx)`` converge."""
    if isinstance(model, CJD):
        return True, True
    if isinstance(model, LJD):
        if model.sigma_j == 0:
            return True, True
        if cls is MeasureClass.EXPONENTIAL:
            ok = 1.0 - 2.0 * psi * model.sigma_j**2 > 0
            return ok, ok
        if psi < 0 or (psi == 0 and eta <= 0):
            return True, True
        return False, True
    if isinstance(model, KouDE):
        right, left = model.eta1, model.eta2
    else:
        right, left = model.decay
    if cls is MeasureClass.EXPONENTIAL:
        if psi < 0:
            return True, True
        if psi > 0:
            return False, False
        return eta + p < right, eta + p > -left
    up = psi < 0 or (psi == 0 and (eta < 0 or (eta == 0 and p < right)))
    if psi > 0:
        up = False
    return up, p > -left


def _moments_ok(model, eta, psi, cls, p) -> tuple[bool, bool]:
    """Convergence for the pair ``e^{p x}`` and ``1`` (the ``-1`` in ``e^{zx}-1``)."""
    up1, lo1 = _tail_status(model, eta, psi, cls, p)
    up0, lo0 = _tail_status(model, eta, psi, cls, 0.0)
    return up1 and up0, lo1 and lo0


def moment_strip(model, eta: float, psi: float, cls="exponential") -> tuple[float, float]:
    """Open interval of real ``p`` for which ``E[e^{p X_T}]`` is finite under the tilted law.

    Raises :class:`DomainError` if the tilt itself is not integrable.
    """
    cls = MeasureClass.parse(cls)
    up, lo = _moments_ok(model, eta, psi, cls, 0.0)
    if not (up and lo):
        raise DomainError(f"tilt (eta={eta:.6g}, psi={psi:.6g}) is not integrable for {type(model).__name__}")
    if isinstance(model, (CJD, LJD)):
        return -math.inf, math.inf
    right, left = (model.eta1, model.eta2) if isinstance(model, KouDE) else model.decay
    if cls is MeasureClass.EXPONENTIAL:
        if psi < 0:
            return -math.inf, math.inf
        return -left - eta, right - eta
    upper = math.inf if (psi < 0 or eta < 0) else right
    return -left, upper


def _log_tilt(model, cls: MeasureClass, eta: float, psi: float) -> Callable[[np.ndarray], np.ndarray]:
    """``log`` of ``e^{eta zeta + psi zeta^2} nu(x)`` (without the jump intensity)."""
    if isinstance(model, LJD):
        s, m = model.sigma_j, model.mu_j

        def logdens(x):
            return -0.5 * ((x - m) / s) ** 2 - math.log(s * math.sqrt(2 * math.pi))
    elif isinstance(model, KouDE):
        def logdens(x):
            return np.where(
                x >= 0,
                math.log(model.p * model.eta1) - model.eta1 * x,
                math.log(model.q * model.eta2) + model.eta2 * x,
            )
    else:
        right, left = model.decay

        def logdens(x):
            ax = np.abs(x)
            return -np.where(x > 0, right, left) * ax - np.log(model.kappa * ax)

    if cls is MeasureClass.EXPONENTIAL:
        return lambda x: eta * x + psi * x * x + logdens(x)
    return lambda x: eta * np.expm1(x) + psi * np.expm1(x) ** 2 + logdens(x)


def _support(logw: Callable, p: float, start: float, direction: float, drop: float = 70.0) -> float:
    """Walk outward from ``start`` until ``logw(x) + p x`` has fallen ``drop`` below its running max."""
    best = -math.inf
    step = 0.05
    x = start
    for _ in range(200):
        with np.errstate(all="ignore"):
            v = float(logw(np.array([x]))[0] + p * x)
        if math.isnan(v):
            v = -math.inf
        if v == math.inf:
            raise QuadratureError(f"tilted jump density overflows at x={x}")
        if v > best:
            best = v
        elif v < best - drop:
            return x
        x += direction * step
        step *= 1.25
    raise QuadratureError("could not bound the integration range")


def _tilted_term(logw: Callable, z: complex, x: float, shift: float) -> complex:
    """``(e^{zx} - 1) exp(logw(x) - shift)`` without forming ``inf * 0``."""
    with np.errstate(all="ignore"):
        lw = float(logw(np.array([x]))[0]) - shift
    if lw == -math.inf or math.isnan(lw):
        return 0j
    zx = z * x
    if abs(zx) < 1.0:
        return complex(np.expm1(zx) * math.exp(lw))
    with np.errstate(all="ignore"):
        return complex(np.exp(lw + zx) - np.exp(lw))


def _peak(logw: Callable, p: float, lo: float, hi: float) -> float:
    """Rough maximum of ``logw(x) + max(p x, 0)`` on ``[lo, hi]``, used to rescale the integrand."""
    grid = np.linspace(lo, hi, 2001)
    with np.errstate(all="ignore"):
        lw = logw(grid)
        v = lw + np.maximum(p * grid, 0.0)
    v = v[np.isfinite(v)]
    return float(v.max()) if v.size else 0.0


def _quad_side(model, logw, z: complex, lo: float, hi: float, center: float) -> complex:
    """``int_lo^hi (e^{z x} - 1) exp(logw(x)) dx`` on one side of the origin.

    The integrand is rescaled by its peak so that steep tilts overflow to
    ``inf`` in the result rather than inside the quadrature.
    """
    u = z.imag
    shift = max(_peak(logw, z.real, lo, hi), 0.0)
    scale = math.exp(min(shift, 709.0)) if shift <= 709.0 else math.inf

    def h(x):
        return _tilted_term(logw, z, x, shift)

    pts = [c for c in (center,) if lo < c < hi]
    length = hi - lo
    if abs(u) * length < 200:
        val, err = integrate.quad(h, lo, hi, points=pts or None, complex_func=True,
                                  limit=500, epsabs=1e-13 / max(scale, 1.0), epsrel=1e-11)
        if not np.isfinite(val) or abs(err) > 1e-7 * max(1.0 / max(scale, 1.0), abs(val)):
            raise QuadratureError(f"tilted jump integral did not converge at z={z}")
        return _rescale(val, shift)

    # oscillatory: near the origin integrate the cancelling combination, elsewhere
    # split e^{zx} - 1 into weighted cos/sin pieces and a non-oscillating remainder
    near = min(length, 1.0 / abs(u))
    if lo >= 0:
        a, b, nlo, nhi = lo + near, hi, lo, lo + near
    else:
        a, b, nlo, nhi = lo, hi - near, hi - near, hi
    v0 = integrate.quad(h, nlo, nhi, complex_func=True, limit=200, epsabs=1e-13, epsrel=1e-11)[0]
    p = z.real

    def w(x):
        with np.errstate(all="ignore"):
            return float(np.exp(logw(np.array([x]))[0] + p * x - shift))

    def w0(x):
        with np.errstate(all="ignore"):
            return float(np.exp(logw(np.array([x]))[0] - shift))

    c = integrate.quad(w, a, b, weight="cos", wvar=u, limit=2000, epsabs=1e-14)[0]
    s = integrate.quad(w, a, b, weight="sin", wvar=u, limit=2000, epsabs=1e-14)[0]
    r = integrate.quad(w0, a, b, limit=500, epsabs=1e-14)[0]
    return _rescale(v0 + c + 1j * s - r, shift)


def _rescale(val: complex, shift: float) -> complex:
    if shift == 0.0:
        return complex(val)
    with np.errstate(all="ignore"):
        f = np.exp(shift)
        return complex(val.real * f if val.real else 0.0, val.imag * f if val.imag else 0.0)


def _quad_jump_exponent(model, z: complex, eta: float, psi: float, cls: MeasureClass) -> complex:
    """Quadrature form of ``int (e^{zx}-1) e^{tilt} F(dx)`` (``F`` = Levy density for VG)."""
    logw = _log_tilt(model, cls, eta, psi)
    p = z.real
    if isinstance(model, LJD):
        s, m = model.sigma_j, model.mu_j
        if cls is MeasureClass.EXPONENTIAL:
            g = 1.0 - 2.0 * psi * s * s
            center = (m + (eta + max(p, 0.0)) * s * s) / g
        else:
            center = m
        hi = _support(logw, p, center, +1.0)
        lo = _support(logw, p, center, -1.0)
        total = 0j
        if lo < 0:
            total += _quad_side(model, logw, z, lo, min(hi, 0.0), center)
        if hi > 0:
            total += _quad_side(model, logw, z, max(lo, 0.0), hi, center)
        return total
    hi = _support(logw, p, 1e-8, +1.0)
    lo = _support(logw, p, -1e-8, -1.0)
    return _quad_side(model, logw, z, 0.0, hi, 0.0) + _quad_side(model, logw, z, lo, 0.0, 0.0)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


def _panel_rule(lo: float, hi: float, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Composite 20-point Gauss-Legendre nodes and weights on ``[lo, hi]`` with panels of width ``<= h``."""
    n = max(1, math.ceil((hi - lo) / h))
    edges = np.linspace(lo, hi, n + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return x, w


def _grid_jump_exponent(model, z_arr: np.ndarray, eta: float, psi: float, cls: MeasureClass) -> np.ndarray:
    """Vectorised quadrature of the tilted jump integral for many ``z`` at once.

    Arguments are grouped into octave bands of ``|Im z|``; each band gets
    panels narrow enough (at most 24 radians of oscillation each) for 20-point
    Gauss-Legendre to resolve ``e^{i u x}`` to round-off.
    """
    logw = _log_tilt(model, cls, eta, psi)
    p_hi = max(float(z_arr.real.max()), 0.0)
    p_lo = min(float(z_arr.real.min()), 0.0)
    if isinstance(model, LJD):
        s, m = model.sigma_j, model.mu_j
        if cls is MeasureClass.EXPONENTIAL:
            center = (m + (eta + p_hi) * s * s) / (1.0 - 2.0 * psi * s * s)
        else:
            center = m
        hi = max(_support(logw, p_hi, center, +1.0), 0.0)
        lo = min(_support(logw, p_lo, center, -1.0), 0.0)
    else:
        hi = _support(logw, p_hi, 1e-8, +1.0)
        lo = _support(logw, p_lo, -1e-8, -1.0)
    scale = getattr(model, "lam", 1.0)
    out = np.empty(z_arr.shape, dtype=complex)
    u_abs = np.abs(z_arr.imag)
    band = np.floor(np.log2(np.maximum(u_abs, 4.0))).astype(int)
    for b in np.unique(band):
        idx = np.nonzero(band == b)[0]
        h = min(0.25, 24.0 / 2.0 ** (b + 1))
        total = np.zeros(idx.size, dtype=complex)
        for a, c in ((lo, 0.0), (0.0, hi)):
            if c <= a:
                continue
            x, w = _panel_rule(a, c, h)
            with np.errstate(all="ignore"):
                lw = logw(x)
            lw = np.where(np.isfinite(lw), lw, -np.inf)
            shift = float(np.max(lw + np.maximum(p_hi * x, p_lo * x)))
            wx = w * np.exp(lw - shift)
            for start in range(0, idx.size, 256):
                zz = z_arr[idx[start:start + 256]]
                with np.errstate(all="ignore"):
                    total[start:start + 256] += np.expm1(np.outer(zz, x)) @ wx * math.exp(shift)
        out[idx] = scale * total
    return out


def jump_exponent(model, z, eta: float, psi: float, cls="exponential", method: str = "auto"):
    """``J(z) = int (e^{zx} - 1) e^{eta zeta(x) + psi zeta(x)^2} nu(dx)`` for complex ``z``.

    Closed forms are used where available (CJD; LJD, Kou and VG under the
    exponential class) unless ``method`` is ``"quad"`` (adaptive quadrature per
    argument) or ``"grid"`` (vectorised Gauss-Legendre, suited to FFT grids).
    Raises :class:`DomainError` when the integral diverges.
    """
    cls = MeasureClass.parse(cls)
    z_arr = np.asarray(z, dtype=complex)
    scalar = z_arr.ndim == 0
    z_arr = np.atleast_1d(z_arr)

    if isinstance(model, CJD):
        zg = _cjd_zeta(model, cls)
        e = eta * zg + psi * zg * zg
        if e > EXP_CAP:
            raise DomainError(f"tilt exponent {e:.4g} overflows")
        out = model.lam * math.exp(e) * np.expm1(z_arr * model.gamma)
        return out[0] if scalar else out

    p_vals = np.unique(z_arr.real)
    for p in p_vals:
        up, lo = _moments_ok(model, eta, psi, cls, float(p))
        if not (up and lo):
            side = "upper" if not up else "lower"
            raise DomainError(
                f"{type(model).__name__} {cls.value} tilt (eta={eta:.6g}, psi={psi:.6g}) "
                f"diverges in the {side} jump tail at Re(z)={p:.6g}"
            )

    if method not in ("auto", "quad", "grid"):
        raise ValueError(f"unknown quadrature method {method!r}")
    closed = method == "auto" and cls is MeasureClass.EXPONENTIAL
    if closed and isinstance(model, LJD):
        if model.sigma_j == 0:
            e = eta * model.mu_j + psi * model.mu_j**2
            out = model.lam * math.exp(e) * np.expm1(z_arr * model.mu_j)
        else:
            out = model.lam * (nu_tilde(eta + z_arr, psi, model.mu_j, model.sigma_j)
                               - nu_tilde(eta, psi, model.mu_j, model.sigma_j))
    elif closed and isinstance(model, KouDE) and psi <= 0:
        out = model.lam * (_kou_tilted_mgf(model, eta + z_arr, psi) - _kou_tilted_mgf(model, eta, psi))
    elif closed and isinstance(model, VG) and psi == 0:
        out = _vg_log_mgf(model, eta + z_arr) - _vg_log_mgf(model, eta)
    elif method == "grid":
        out = _grid_jump_exponent(model, z_arr, eta, psi, cls)
    else:
        scale = getattr(model, "lam", 1.0)
        out = np.array([scale * _quad_jump_exponent(model, complex(zz), eta, psi, cls) for zz in z_arr])
    return out[0] if scalar else out


def jd_residual(model, r: float, eta: float, psi: float, cls="exponential", method: str = "auto") -> float:
    """Martingale residual ``log_drift + sigma^2/2 + eta sigma^2 - r + J(1)``.

    Returns ``+inf``/``-inf`` when only the upper/lower jump tail diverges,
    which keeps the residual monotone for bracketing.
    """
    cls = MeasureClass.parse(cls)
    if isinstance(model, CJD):
        return cjd_residual(model, r, eta, psi, cls)
    up, lo = _moments_ok(model, eta, psi, cls, 1.0)
    if not up and not lo:
        raise DomainError(f"tilt (eta={eta:.6g}, psi={psi:.6g}) diverges in both jump tails")
    if not up:
        return math.inf
    if not lo:
        return -math.inf
    sig2 = model.sigma**2
    j1 = jump_exponent(model, 1.0, eta, psi, cls, method=method)
    return float(model.log_drift + 0.5 * sig2 + eta * sig2 - r + j1.real)


def solve_eta_jd(model, r: float, psi: float, cls="exponential", method: str = "auto") -> float:
    """Root ``eta(psi)`` of the martingale condition for LJD, Kou or VG (CJD also accepted)."""
    ensure_valid(model)
    cls = MeasureClass.parse(cls)
    if isinstance(model, CJD):
        return solve_eta_cjd(model, r, psi, cls)
    if isinstance(model, LJD) and cls is MeasureClass.EXPONENTIAL:
        nu_tilde(0.0, psi, model.mu_j, model.sigma_j)  # raises on g(psi) <= 0
    if psi > 0 and (cls is MeasureClass.LINEAR or not isinstance(model, LJD)):
        raise DomainError(
            f"psi={psi} > 0 makes the {cls.value} tilt integral diverge for {type(model).__name__}"
        )
    eta = _solve_monotone(lambda e: jd_residual(model, r, e, psi, cls, method), None,
                          what=f"{type(model).__name__} eta(psi={psi})")
    return eta


def esscher_measure(model, r: float, psi: float, cls="exponential", method: str = "auto") -> EsscherMeasure:
    """Solve and certify the measure for any jump model."""
    cls = MeasureClass.parse(cls)
    if isinstance(model, CJD):
        return cjd_measure(model, r, psi, cls)
    eta = solve_eta_jd(model, r, psi, cls, method)
    return EsscherMeasure(cls=cls, eta=eta, psi=psi, residual=jd_residual(model, r, eta, psi, cls, method))


def martingale_residual(model, r: float, measure: EsscherMeasure) -> MartingaleResidual:
    return MartingaleResidual(jd_residual(model, r, measure.eta, measure.psi, measure.cls))


def _solve_monotone(f: Callable[[float], float], df, what: str, tol: float = RESIDUAL_TOL) -> float:
    """Root of an increasing function: bracket by doubling from [-1, 1], bisect, then polish."""
    lo, hi = -1.0, 1.0
    flo, fhi = f(lo), f(hi)
    for _ in range(80):
        if flo <= 0:
            break
        lo, hi, fhi = 2.0 * lo, lo, flo
        flo = f(lo)
    for _ in range(80):
        if fhi >= 0:
            break
        lo, hi, flo = hi, 2.0 * hi, fhi
        fhi = f(hi)
    if math.isnan(flo) or math.isnan(fhi) or flo > 0 or fhi < 0:
        raise SolverError(f"{what}: no sign change found (f({lo})={flo}, f({hi})={fhi})")
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    # bisect until both ends are finite
    while not (math.isfinite(flo) and math.isfinite(fhi)):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            raise SolverError(f"{what}: root sits on a divergence boundary near {mid}")
        fm = f(mid)
        if fm == 0:
            return mid
        if fm > 0:
            hi, fhi = mid, fm
        else:
            lo, flo = mid, fm
    root = optimize.brentq(f, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=500)
    fr = f(root)
    for _ in range(3):
        if abs(fr) <= tol:
            break
        d = df(root) if df is not None else (f(root + 1e-7) - f(root - 1e-7)) / 2e-7
        if not d > 0:
            break
        cand = root - fr / d
        if not lo <= cand <= hi:
            break
        fc = f(cand)
        if abs(fc) >= abs(fr):
            break
        root, fr = cand, fc
    if not abs(fr) <= 1e-8:
        raise SolverError(f"{what}: residual {fr:.3g} at {root}")
    return root
