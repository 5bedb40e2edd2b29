"""Monte Carlo simulation of log-prices under the physical measure and under Esscher pricing measures.

Random numbers come from counter-based Philox streams keyed by
``(seed, block)`` where each block holds a fixed number of consecutive
paths, so a path set is reproducible bit for bit whatever order or
process the blocks are generated in.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .measure import EsscherMeasure, EsscherMeasureCJD, nu_tilde
from .models import CJD, GBM, LJD, VG, KouDE, MeasureClass, ensure_valid

BLOCK = 1024


@dataclass(frozen=True)
class PathSet:
    """Simulated log-price levels, shape ``(n_paths, n_steps + 1)``.

    ``measure`` is ``"P"`` for physical paths; pricing paths carry a
    description of the Esscher measure and the rate ``r``.
    """

    measure: str
    levels: np.ndarray
    dt: float
    seed: int
    r: Optional[float] = None

    @property
    def n_paths(self) -> int:
        return self.levels.shape[0]

    @property
    def n_steps(self) -> int:
        return self.levels.shape[1] - 1

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt

    @property
    def is_pricing(self) -> bool:
        return self.measure != "P"

    def terminal(self) -> np.ndarray:
        """Terminal prices ``S_T``."""
        return np.exp(self.levels[:, -1])

    def prices(self) -> np.ndarray:
        return np.exp(self.levels)

    def checksum(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.levels).tobytes()).hexdigest()


@dataclass(frozen=True)
class _Increments:
    """Per-step law of the log-price increment: diffusion plus a compound Poisson part."""

    drift: float
    sigma: float
    lam: float
    jumps: Callable[[np.random.Generator, np.ndarray], np.ndarray]


def _jump_sampler_constant(size: float):
    def draw(rng, counts):
        return counts * size
    return draw


def _jump_sampler_normal(mean: float, sd: float):
    # a sum of k iid normals is N(k mean, k sd^2)
    def draw(rng, counts):
        z = rng.standard_normal(counts.shape)
        return counts * mean + sd * np.sqrt(counts) * z
    return draw


def _jump_sampler_double_exp(p: float, eta1: float, eta2: float):
    def draw(rng, counts):
        flat = counts.ravel()
        total = int(flat.sum())
        out = np.zeros(flat.shape)
        if total:
            up = rng.random(total) < p
            size = np.where(up, rng.exponential(1.0 / eta1, total), -rng.exponential(1.0 / eta2, total))
            owner = np.repeat(np.arange(flat.size), flat)
            out = np.bincount(owner, weights=size, minlength=flat.size).astype(float)
        return out.reshape(counts.shape)
    return draw


def _simulate(inc: Optional[_Increments], x0: float, horizon: float, n_paths: int, n_steps: int,
              seed: int, vg: Optional[tuple[float, float, float, float]] = None) -> np.ndarray:
    if n_paths < 1 or n_steps < 1:
        raise ValueError("need at least one path and one step")
    dt = horizon / n_steps
    levels = np.empty((n_paths, n_steps + 1))
    levels[:, 0] = math.log(x0)
    for block, start in enumerate(range(0, n_paths, BLOCK)):
        rows = min(BLOCK, n_paths - start)
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))
        if vg is not None:
            drift, m, delta, kappa = vg
            g = rng.gamma(dt / kappa, kappa, size=(rows, n_steps))
            z = rng.standard_normal((rows, n_steps))
            dx = drift * dt + m * g + delta * np.sqrt(g) * z
        else:
            z = rng.standard_normal((rows, n_steps))
            dx = inc.drift * dt + inc.sigma * math.sqrt(dt) * z
            if inc.lam > 0:
                counts = rng.poisson(inc.lam * dt, size=(rows, n_steps))
                dx += inc.jumps(rng, counts)
        levels[start:start + rows, 1:] = levels[start:start + rows, :1] + np.cumsum(dx, axis=1)
    return levels


def _physical_increments(model) -> _Increments:
    if isinstance(model, GBM):
        return _Increments(model.log_drift, model.sigma, 0.0, _jump_sampler_constant(0.0))
    if isinstance(model, CJD):
        return _Increments(model.log_drift, model.sigma, model.lam, _jump_sampler_constant(model.gamma))
    if isinstance(model, LJD):
        return _Increments(model.log_drift, model.sigma, model.lam,
                           _jump_sampler_normal(model.mu_j, model.sigma_j))
    if isinstance(model, KouDE):
        return _Increments(model.log_drift, model.sigma, model.lam,
                           _jump_sampler_double_exp(model.p, model.eta1, model.eta2))
    raise TypeError(f"cannot simulate {type(model).__name__}")


def simulate_p(model, x0: float, horizon: float, n_paths: int, n_steps: int, seed: int) -> PathSet:
    """Paths under the physical measure with exact per-step increments.

    GBM, CJD, LJD and Kou use Gaussian increments plus Poisson jump counts;
    VG uses gamma-subordinated Gaussian increments (shape ``dt/kappa``, scale ``kappa``).
    """
    ensure_valid(model)
    if isinstance(model, VG):
        levels = _simulate(None, x0, horizon, n_paths, n_steps, seed,
                           vg=(model.b, model.m, model.delta, model.kappa))
    else:
        levels = _simulate(_physical_increments(model), x0, horizon, n_paths, n_steps, seed)
    return PathSet("P", levels, horizon / n_steps, seed)


def _tilted_increments(model, measure: EsscherMeasure) -> _Increments:
    """Increment law under an exponential-class measure whose tilted jump law stays in the family."""
    eta, psi = measure.eta, measure.psi
    drift = model.log_drift + eta * model.sigma**2
    if isinstance(model, CJD):
        if isinstance(measure, EsscherMeasureCJD):
            lam_adj = measure.lam_adj
        else:
            z = model.gamma if measure.cls is MeasureClass.EXPONENTIAL else model.gamma_tilde
            lam_adj = model.lam * math.exp(eta * z + psi * z * z)
        return _Increments(drift, model.sigma, lam_adj, _jump_sampler_constant(model.gamma))
    if measure.cls is not MeasureClass.EXPONENTIAL:
        raise NotImplementedError("linear-class simulation is only available for constant jumps")
    if isinstance(model, LJD):
        s2 = model.sigma_j**2
        g = 1.0 - 2.0 * psi * s2
        lam_adj = model.lam * (1.0 + float(nu_tilde(eta, psi, model.mu_j, model.sigma_j)))
        return _Increments(drift, model.sigma, lam_adj,
                           _jump_sampler_normal((model.mu_j + eta * s2) / g, math.sqrt(s2 / g)))
    if isinstance(model, KouDE) and psi == 0:
        e1, e2 = model.eta1 - eta, model.eta2 + eta
        up = model.p * model.eta1 / e1
        down = model.q * model.eta2 / e2
        return _Increments(drift, model.sigma, model.lam * (up + down),
                           _jump_sampler_double_exp(up / (up + down), e1, e2))
    raise NotImplementedError(f"no tilted sampler for {type(model).__name__} with psi={psi}")


def _describe(measure: EsscherMeasure) -> str:
    return f"R_psi[{measure.cls.value}, eta={measure.eta!r}, psi={measure.psi!r}]"


def simulate_cjd_rpsi(model: CJD, measure: EsscherMeasureCJD, x0: float, horizon: float, r: float,
                      n_paths: int, n_steps: int, seed: int) -> PathSet:
    """CJD paths under the second-order measure: Brownian drift ``eta sigma`` and jump intensity ``Lambda``."""
    ensure_valid(model)
    if not measure.lam_adj >= 0:
        raise ValueError("adjusted intensity must be non-negative")
    levels = _simulate(_tilted_increments(model, measure), x0, horizon, n_paths, n_steps, seed)
    return PathSet(_describe(measure), levels, horizon / n_steps, seed, r)


def simulate_q(model, measure: EsscherMeasure, x0: float, horizon: float, r: float,
               n_paths: int, n_steps: int, seed: int) -> PathSet:
    """Paths under an Esscher pricing measure (CJD any class; LJD exponential; Kou first order)."""
    ensure_valid(model)
    levels = _simulate(_tilted_increments(model, measure), x0, horizon, n_paths, n_steps, seed)
    return PathSet(_describe(measure), levels, horizon / n_steps, seed, r)


def simulate_risk_neutral_gbm(sigma: float, r: float, x0: float, horizon: float,
                              n_paths: int, n_steps: int, seed: int) -> PathSet:
    inc = _Increments(r - 0.5 * sigma**2, sigma, 0.0, _jump_sampler_constant(0.0))
    levels = _simulate(inc, x0, horizon, n_paths, n_steps, seed)
    return PathSet("Q[bs]", levels, horizon / n_steps, seed, r)


@dataclass(frozen=True)
class Payoff:
    """Terminal payoff: ``call``, ``put``, ``spot`` (``S_T``) or ``unit`` (1)."""

    kind: str
    K: float = 0.0

    def __call__(self, s: np.ndarray) -> np.ndarray:
        if self.kind == "call":
            return np.maximum(s - self.K, 0.0)
        if self.kind == "put":
            return np.maximum(self.K - s, 0.0)
        if self.kind == "spot":
            return s
        if self.kind == "unit":
            return np.ones_like(s)
        raise ValueError(f"unknown payoff {self.kind!r}")


def mc_price(paths: PathSet, payoff: Union[Payoff, Callable[[np.ndarray], np.ndarray]],
             r: Optional[float] = None) -> tuple[float, float]:
    """Discounted sample mean of ``payoff(S_T)`` and its standard error.

    Physical-measure paths are refused.
    """
    if not paths.is_pricing:
        raise ValueError("physical-measure paths cannot be used for pricing")
    r = paths.r if r is None else r
    if r is None:
        raise ValueError("a rate is required")
    disc = math.exp(-r * paths.horizon)
    v = disc * np.asarray(payoff(paths.terminal()), dtype=float)
    # spread taken about the first sample so a constant payoff has exactly zero error
    se = float((v - v[0]).std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), se
