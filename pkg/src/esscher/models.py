"""Market models, valuation inputs and the jump transforms shared across the package.

Models are frozen dataclasses holding *physical* (P-measure) parameters.
Constructing an inadmissible model is allowed so that :func:`validate` can
report every violated constraint; numerical routines call
:func:`ensure_valid` before touching the parameters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from enum import Enum
from typing import Union

import numpy as np


class ModelError(ValueError):
    """Raised when a model or valuation input violates its constraints."""


class DomainError(ValueError):
    """Raised when a quantity is requested outside its mathematical domain."""


class MeasureClass(str, Enum):
    """Which driver the Esscher density tilts: log-price (exponential) or return (linear)."""

    EXPONENTIAL = "exponential"
    LINEAR = "linear"

    @classmethod
    def parse(cls, value: Union[str, "MeasureClass"]) -> "MeasureClass":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"exp": cls.EXPONENTIAL, "exponential": cls.EXPONENTIAL,
                   "lin": cls.LINEAR, "linear": cls.LINEAR}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown measure class {value!r}") from None


class OptionKind(str, Enum):
    CALL = "call"
    PUT = "put"


@dataclass(frozen=True)
class MarketContext:
    """Valuation inputs: rate ``r``, spot ``x``, valuation time ``t`` and expiry ``T`` (years)."""

    r: float
    x: float
    T: float
    t: float = 0.0

    @property
    def tau(self) -> float:
        return self.T - self.t

    def violations(self) -> list[str]:
        out = _non_finite(self)
        if out:
            return out
        if not self.r > 0:
            out.append("r > 0")
        if not self.x > 0:
            out.append("x > 0")
        if not 0 <= self.t < self.T:
            out.append("0 <= t < T")
        return out

    def with_spot(self, x: float) -> "MarketContext":
        return MarketContext(self.r, x, self.T, self.t)


@dataclass(frozen=True)
class OptionSpec:
    K: float
    T: float
    kind: OptionKind = OptionKind.CALL

    def violations(self) -> list[str]:
        out = _non_finite(self)
        if not out and not self.K >= 0:
            out.append("K >= 0")
        return out


@dataclass(frozen=True)
class GBM:
    mu: float
    sigma: float

    family = "gbm"

    def violations(self) -> list[str]:
        out = _non_finite(self)
        if not out and not self.sigma > 0:
            out.append("sigma > 0")
        return out

    @property
    def log_drift(self) -> float:
        return self.mu - 0.5 * self.sigma**2


@dataclass(frozen=True)
class CJD:
    """Jump diffusion with a constant log-jump size ``gamma``.

    ``X_t = b t + sigma W_t + gamma (N_t - lam t)`` with
    ``b = mu - sigma^2/2 - lam (e^gamma - 1 - gamma)``, so that ``S = S_0 e^X``
    has expected return ``mu``.
    """

    mu: float
    sigma: float
    lam: float
    gamma: float

    family = "cjd"

    def violations(self) -> list[str]:
        out = _non_finite(self)
        if out:
            return out
        if not self.sigma > 0:
            out.append("sigma > 0")
        if not self.lam > 0:
            out.append("lambda > 0")
        if self.gamma == 0:
            out.append("gamma != 0")
        if not self.gamma > -1:
            out.append("gamma > -1")
        return out

    @property
    def gamma_tilde(self) -> float:
        return math.expm1(self.gamma)

    @property
    def b(self) -> float:
        """Drift of X in its compensated form."""
        return self.mu - 0.5 * self.sigma**2 - self.lam * (self.gamma_tilde - self.gamma)

    @property
    def log_drift(self) -> float:
        """Drift of X when the jump part is written uncompensated."""
        return self.mu - 0.5 * self.sigma**2 - self.lam * self.gamma_tilde

    @property
    def mean_jump(self) -> float:
        return self.gamma_tilde


@dataclass(frozen=True)
class LJD:
    """Merton jump diffusion: log-jumps ``J ~ N(mu_j, sigma_j^2)``."""

    mu: float
    sigma: float
    lam: float
    mu_j: float
    sigma_j: float

    family = "ljd"

    def violations(self) -> list[str]:
        out = _non_finite(self)
        if out:
            return out
        if not self.sigma > 0:
            out.append("sigma > 0")
        if not self.lam > 0:
            out.append("lambda > 0")
        if not self.sigma_j >= 0:
            out.append("sigma_J >= 0")
        return out

    @property
    def mean_jump(self) -> float:
        """E[e^J - 1]."""
        return math.expm1(self.mu_j + 0.5 * self.sigma_j**2)

    @property
    def log_drift(self) -> float:
        return self.mu - 0.5 * self.sigma**2 - self.lam * self.mean_jump

    def jump_pdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mu_j) / self.sigma_j
        return np.exp(-0.5 * z * z) / (self.sigma_j * math.sqrt(2 * math.pi))


@dataclass(frozen=True)
class KouDE:
    """Kou double-exponential jump diffusion (up-jump rate ``eta1``, down-jump rate ``eta2``)."""

    mu: float
    sigma: float
    lam: float
    p: float
    eta1: float
    eta2: float

    family = "kou"

    def violations(self) -> list[str]:
        out = _non_finite(self)
        if out:
            return out
        if not self.sigma > 0:
            out.append("sigma > 0")
        if not self.lam > 0:
            out.append("lambda > 0")
        if not 0 < self.p < 1:
            out.append("0 < p < 1")
        if not self.eta1 > 1:
            out.append("eta1 > 1")
        if not self.eta2 > 0:
            out.append("eta2 > 0")
        return out

    @property
    def q(self) -> float:
        return 1.0 - self.p

    @property
    def mean_jump(self) -> float:
        return self.p / (self.eta1 - 1) - self.q / (self.eta2 + 1)

    @property
    def log_drift(self) -> float:
        return self.mu - 0.5 * self.sigma**2 - self.lam * self.mean_jump

    def jump_pdf(self, x):
        x = np.asarray(x, dtype=float)
        up = self.p * self.eta1 * np.exp(-self.eta1 * np.abs(x))
        down = self.q * self.eta2 * np.exp(-self.eta2 * np.abs(x))
        return np.where(x >= 0, up, down)


@dataclass(frozen=True)
class VG:
    """Variance Gamma: ``X_t = b t + m G_t + delta W_{G_t}``, ``G`` gamma with unit mean rate and variance rate ``kappa``."""

    mu: float
    m: float
    delta: float
    kappa: float

    family = "vg"
    sigma = 0.0

    def violations(self) -> list[str]:
        out = _non_finite(self)
        if out:
            return out
        if not self.delta > 0:
            out.append("delta > 0")
        if not self.kappa > 0:
            out.append("kappa > 0")
        if not out and not self._log_arg > 0:
            out.append("1 - m*kappa - delta^2*kappa/2 > 0")
        return out

    @property
    def _log_arg(self) -> float:
        return 1.0 - self.m * self.kappa - 0.5 * self.delta**2 * self.kappa

    @property
    def b(self) -> float:
        return self.mu + math.log(self._log_arg) / self.kappa

    @property
    def log_drift(self) -> float:
        return self.b

    @property
    def decay(self) -> tuple[float, float]:
        """Exponential decay rates ``(right, left)`` of the Levy density."""
        d2 = self.delta**2
        root = math.sqrt(self.m**2 / d2 + 2.0 / self.kappa) / self.delta
        return root - self.m / d2, root + self.m / d2

    def levy_density(self, x):
        x = np.asarray(x, dtype=float)
        right, left = self.decay
        rate = np.where(x > 0, right, left)
        return np.exp(-rate * np.abs(x)) / (self.kappa * np.abs(x))


ModelSpec = Union[GBM, CJD, LJD, KouDE, VG]
JumpModel = Union[CJD, LJD, KouDE, VG]


@dataclass(frozen=True)
class EsscherSpec:
    """A second-order Esscher parameter pair together with its measure class."""

    cls: MeasureClass
    psi: float
    eta: float


def _non_finite(obj) -> list[str]:
    bad = []
    for f in fields(obj):
        v = getattr(obj, f.name)
        if isinstance(v, (int, float)) and not math.isfinite(v):
            bad.append(f"{f.name} finite")
    return bad


def gamma_tilde(gamma: float) -> float:
    """Multiplicative jump ``e^gamma - 1`` of a log-jump ``gamma``."""
    return math.expm1(gamma)


def zeta(cls: Union[MeasureClass, str], x):
    """Jump transform tilted by the Esscher density: ``x`` or ``e^x - 1``."""
    if MeasureClass.parse(cls) is MeasureClass.EXPONENTIAL:
        return x
    return np.expm1(x) if isinstance(x, (np.ndarray, complex)) else math.expm1(x)


def validate(model) -> list[str]:
    """Return the violated constraints of ``model``; empty means admissible."""
    return list(model.violations())


def ensure_valid(*objs) -> None:
    for obj in objs:
        bad = validate(obj)
        if bad:
            raise ModelError(f"{type(obj).__name__} violates: {', '.join(bad)}")
