"""Maximum-likelihood fitting of GBM, CJD and LJD to log-return series.

Increment densities of the jump diffusions are Poisson mixtures of
Gaussians; they are evaluated in log-sum-exp form.  GBM has a closed-form
MLE, the jump models are fitted by multi-start Nelder-Mead in transformed
coordinates (``log`` for positive parameters, ``log(1 + gamma)`` for the
constant jump) so every iterate is admissible.
"""
from __future__ import annotations

import datetime as _dt
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy import optimize
from scipy.special import gammaln

from .models import CJD, GBM, LJD, ensure_valid

MIN_OBS = 30


@dataclass(frozen=True)
class ReturnSeries:
    """Ordered log-returns sampled every ``dt`` years."""

    observations: np.ndarray
    dt: float
    source: str = ""

    def __post_init__(self):
        obs = np.asarray(self.observations, dtype=float)
        object.__setattr__(self, "observations", obs)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not np.all(np.isfinite(obs)):
            raise ValueError("observations must be finite")

    def __len__(self) -> int:
        return self.observations.size


@dataclass(frozen=True)
class FitConfig:
    n_starts: int = 5
    seed: int = 0
    xatol: float = 1e-8
    fatol: float = 1e-8
    maxiter: int = 20000


@dataclass(frozen=True)
class FitResult:
    model: Union[GBM, CJD, LJD]
    loglik: float
    converged: bool
    iterations: int
    grad_norm: float
    n_obs: int
    message: str = ""
    starts: list = field(default_factory=list, repr=False)


def k_max(lam: float, dt: float) -> int:
    m = lam * dt
    return max(20, math.ceil(m + 10.0 * math.sqrt(m)))


def _normal_logpdf(y, mean, var):
    return -0.5 * (np.log(2.0 * math.pi * var) + (y - mean) ** 2 / var)


def increment_log_density(model, dt: float, y, kmax: Optional[int] = None):
    """Log-density of one increment ``X_{t+dt} - X_t`` at ``y`` (array-friendly).

    The jump mixtures are truncated at ``kmax`` jumps (default
    ``max(20, ceil(lam dt + 10 sqrt(lam dt)))``).
    """
    y = np.asarray(y, dtype=float)
    if isinstance(model, GBM):
        return _normal_logpdf(y, model.log_drift * dt, model.sigma**2 * dt)
    if not isinstance(model, (CJD, LJD)):
        raise TypeError(f"no increment density for {type(model).__name__}")
    lt = model.lam * dt
    n = k_max(model.lam, dt) if kmax is None else kmax
    k = np.arange(n + 1, dtype=float)
    log_w = k * math.log(lt) - lt - gammaln(k + 1.0) if lt > 0 else np.where(k == 0, 0.0, -np.inf)
    base = model.log_drift * dt
    if isinstance(model, CJD):
        mean = base + k * model.gamma
        var = np.full_like(k, model.sigma**2 * dt)
    else:
        mean = base + k * model.mu_j
        var = model.sigma**2 * dt + k * model.sigma_j**2
    # log-sum-exp over the jump count, with the y-free part folded into one vector
    const = log_w - 0.5 * np.log(2.0 * math.pi * var)
    comp = (y[..., None] - mean) ** 2
    comp *= -0.5 / var
    comp += const
    top = comp.max(axis=-1)
    comp -= top[..., None]
    np.exp(comp, out=comp)
    return top + np.log(comp.sum(axis=-1))


def loglik(model, series: ReturnSeries) -> float:
    return float(np.sum(increment_log_density(model, series.dt, series.observations)))


# --- parameter transforms -------------------------------------------------

def _to_model(family: str, v: np.ndarray):
    if family == "cjd":
        return CJD(v[0], math.exp(v[1]), math.exp(v[2]), math.expm1(v[3]))
    return LJD(v[0], math.exp(v[1]), math.exp(v[2]), v[3], math.exp(v[4]))


def _to_vector(model) -> np.ndarray:
    if isinstance(model, CJD):
        return np.array([model.mu, math.log(model.sigma), math.log(model.lam), math.log1p(model.gamma)])
    return np.array([model.mu, math.log(model.sigma), math.log(model.lam), model.mu_j, math.log(model.sigma_j)])


def _fit_gbm(series: ReturnSeries) -> GBM:
    y, dt = series.observations, series.dt
    m = y.mean()
    s2 = np.mean((y - m) ** 2)
    sigma = math.sqrt(s2 / dt)
    return GBM(m / dt + 0.5 * sigma**2, sigma)


def _initial_guesses(series: ReturnSeries, family: str, gbm: GBM) -> list:
    """Moment-matched centre plus a nested start on the boundary of the smaller model."""
    y, dt = series.observations, series.dt
    med = np.median(y)
    scale = 1.4826 * np.median(np.abs(y - med))
    out = y[np.abs(y - med) > 4.0 * scale]
    lam0 = max(out.size / (y.size * dt), 0.1)
    sig0 = max(scale / math.sqrt(dt), 1e-4)
    jump0 = float(np.mean(out)) if out.size else -2.0 * scale
    if family == "cjd":
        centre = CJD(gbm.mu, sig0, lam0, jump0 if jump0 > -0.9 else -0.5)
        nested = CJD(gbm.mu, gbm.sigma, 1e-6, -scale)
    else:
        sj0 = float(np.std(out)) if out.size > 1 else abs(jump0)
        centre = LJD(gbm.mu, sig0, lam0, jump0, max(sj0, 1e-3))
        nested = LJD(gbm.mu, gbm.sigma, 1e-6, 0.0, scale)
    return [centre, nested]


def fit_mle(series: ReturnSeries, family: str, init=None, config: FitConfig = FitConfig(),
            nested_from: Optional[FitResult] = None) -> FitResult:
    """Maximum-likelihood fit of ``family`` in {``"gbm"``, ``"cjd"``, ``"ljd"``}.

    The jump families use ``config.n_starts`` Nelder-Mead runs from the
    moment-matched centre and seeded perturbations of it, plus a start on the
    boundary of the next smaller model (from ``nested_from`` when supplied).
    """
    family = family.lower()
    if len(series) < MIN_OBS:
        raise ValueError(f"need at least {MIN_OBS} observations, got {len(series)}")
    gbm = _fit_gbm(series)
    if family == "gbm":
        return FitResult(gbm, loglik(gbm, series), True, 0, 0.0, len(series), "closed form")
    if family not in ("cjd", "ljd"):
        raise ValueError(f"unknown family {family!r}")

    guesses = _initial_guesses(series, family, gbm)
    if nested_from is not None:
        m = nested_from.model
        if family == "cjd" and isinstance(m, GBM):
            guesses.append(CJD(m.mu, m.sigma, 1e-6, guesses[1].gamma))
        elif family == "ljd" and isinstance(m, CJD):
            guesses.append(LJD(m.mu, m.sigma, m.lam, m.gamma, 1e-4))
    if init is not None:
        guesses.insert(0, init)

    rng = np.random.default_rng(config.seed)
    centre = _to_vector(guesses[0])
    starts = [_to_vector(g) for g in guesses]
    while len(starts) < config.n_starts + len(guesses) - 1:
        starts.append(centre + rng.normal(0.0, 0.3, centre.size))

    def objective(v):
        try:
            model = _to_model(family, v)
        except (OverflowError, ValueError):
            return math.inf
        if model.violations():
            return math.inf
        val = -loglik(model, series)
        return val if math.isfinite(val) else math.inf

    def simplex(v0, xatol, fatol, maxiter):
        return optimize.minimize(objective, v0, method="Nelder-Mead",
                                 options={"xatol": xatol, "fatol": fatol, "maxiter": maxiter,
                                          "maxfev": 4 * maxiter, "adaptive": True})

    # screen every start loosely, then polish the best one to the full tolerance
    runs = [simplex(v0, 1e-4, 1e-4, 3000) for v0 in starts]
    best = min(runs, key=lambda res: res.fun)
    for _ in range(3):
        polished = simplex(best.x, config.xatol, config.fatol, config.maxiter)
        done = best.fun - polished.fun < config.fatol
        best = polished if polished.fun <= best.fun else best
        if done:
            break
    runs = [(float(-res.fun), bool(res.success)) for res in runs]
    model = _to_model(family, best.x)
    ensure_valid(model)
    grad = optimize.approx_fprime(best.x, objective, 1e-7)
    return FitResult(model, float(-best.fun), bool(best.success), int(best.nit),
                     float(np.linalg.norm(grad)), len(series), str(best.message), runs)


def fit_nested(series: ReturnSeries, config: FitConfig = FitConfig()) -> dict[str, FitResult]:
    """Fit GBM, CJD and LJD, each started also from the previous fit, so the log-likelihoods are ordered."""
    gbm = fit_mle(series, "gbm", config=config)
    cjd = fit_mle(series, "cjd", config=config, nested_from=gbm)
    ljd = fit_mle(series, "ljd", config=config, nested_from=cjd)
    return {"gbm": gbm, "cjd": cjd, "ljd": ljd}


def _as_date(d) -> _dt.date:
    if isinstance(d, _dt.datetime):
        return d.date()
    if isinstance(d, _dt.date):
        return d
    return _dt.date.fromisoformat(str(d))


def log_returns_from_prices(prices: Sequence[tuple], source: str = "") -> ReturnSeries:
    """Log-returns of ``(date, close)`` rows; ``dt`` is the median calendar gap over 365 days."""
    if len(prices) < 2:
        raise ValueError("need at least two prices")
    dates = [_as_date(d) for d, _ in prices]
    closes = np.array([float(c) for _, c in prices])
    for i, c in enumerate(closes):
        if not c > 0:
            raise ValueError(f"row {i}: close must be positive, got {c}")
    gaps = np.array([(b - a).days for a, b in zip(dates, dates[1:])])
    if np.any(gaps <= 0):
        i = int(np.argmax(gaps <= 0)) + 1
        raise ValueError(f"row {i}: dates must be strictly increasing")
    return ReturnSeries(np.log(closes[1:] / closes[:-1]), float(np.median(gaps)) / 365.0, source)
