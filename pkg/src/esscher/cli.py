"""Command-line interface: ``esscher <command> [flags]``.

Commands: ``fit``, ``price``, ``interval``, ``hedge``, ``calibrate`` and
``charfn-check``.  Settings come from flags, then a JSON ``--config`` file,
then built-in defaults.  Every artifact echoes the effective settings.
Failures print a JSON object on stderr and exit with status 1 (2 for usage
errors).
"""
from __future__ import annotations

import argparse
import json
import math
import re
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import io as fio
from .analytic import (TruncationPolicy, bs_call, bs_put, cjd_call_detail, cjd_price_interval,
                       european_put_from_parity, ljd_call_exact, ljd_call_second_order, merton_call)
from .calibration import CalibConfig, calibrate
from .charfn import charfn_bs, charfn_cjd, charfn_for_measure, charfn_merton_qbs
from .estimation import FitConfig, fit_mle, fit_nested, log_returns_from_prices
from .fft import FftGrid, fft_call_curve, fft_put_curve, price_at_strike
from .hedging import BSPricer, CJDPricer, HedgeConfig, MertonPricer, hedge_simulate
from .measure import (cjd_measure, cjd_measure_from_eta, cjd_no_jump_risk, esscher_measure,
                      eta_psi_from_phi)
from .models import CJD, GBM, LJD, VG, KouDE, MarketContext, MeasureClass, ensure_valid
from .montecarlo import (Payoff, mc_price, simulate_cjd_rpsi, simulate_q,
                         simulate_risk_neutral_gbm)

MODELS = {"gbm": GBM, "cjd": CJD, "ljd": LJD, "kou": KouDE, "vg": VG}

DEFAULT_PARAMS = {
    "gbm": {"mu": 0.05, "sigma": 0.2},
    "cjd": {"mu": 0.05, "sigma": 0.2, "lam": 1.0, "gamma": 0.1},
    "ljd": {"mu": 0.05, "sigma": 0.2, "lam": 0.5, "mu_j": -0.05, "sigma_j": 0.1},
    "kou": {"mu": 0.05, "sigma": 0.2, "lam": 1.0, "p": 0.4, "eta1": 10.0, "eta2": 5.0},
    "vg": {"mu": 0.05, "m": -0.14, "delta": 0.12, "kappa": 0.17},
}

DEFAULTS: dict[str, Any] = {
    "model": "cjd",
    "measure": "exp",
    "psi": 0.0,
    "psi_grid": "-425:150:25",
    "phi": None,
    "method": "series",
    "kind": "call",
    "strike": 100.0,
    "spot": 100.0,
    "rate": 0.03,
    "expiry": 0.5,
    "n_fixed": None,
    "adaptive_mass": None,
    "paths": None,
    "steps": 1,
    "seed": 0,
    "out_dir": ".",
    "format": "json",
    "params": None,
    "pricer": "psi",
    "prices": None,
    "quotes": None,
    "min_open_interest": 100.0,
    "starts": 5,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        # values such as "-425:150:25" are grid specs, not options
        self._negative_number_matcher = re.compile(r"^-\d[\d.eE+:-]*$")

    def error(self, message):
        raise UsageError(message)


def _common(p: argparse.ArgumentParser) -> None:
    s = argparse.SUPPRESS
    p.add_argument("--config", default=s, help="JSON file of settings (flags take precedence)")
    p.add_argument("--model", default=s, help="gbm, cjd, ljd, kou or vg (calibrate: cjd-1st, cjd-2nd, ljd-merton)")
    p.add_argument("--params", default=s, help="model parameters, e.g. mu=0.05,sigma=0.2,lam=1,gamma=0.1")
    p.add_argument("--measure", default=s, choices=["exp", "lin"], help="Esscher class")
    p.add_argument("--psi", default=s, type=float)
    p.add_argument("--psi-grid", default=s, dest="psi_grid", help="lo:hi:step")
    p.add_argument("--phi", default=s, type=float, help="CJD solver-free parameter (replaces --psi)")
    p.add_argument("--method", default=s, choices=["series", "explicit", "fft", "mc"])
    p.add_argument("--kind", default=s, choices=["call", "put"])
    p.add_argument("--strike", default=s, type=float)
    p.add_argument("--spot", default=s, type=float)
    p.add_argument("--rate", default=s, type=float)
    p.add_argument("--expiry", default=s, type=float, help="years to expiry")
    p.add_argument("--n-fixed", default=s, dest="n_fixed", type=int, help="sum exactly k = 0..n")
    p.add_argument("--adaptive-mass", default=s, dest="adaptive_mass", type=float)
    p.add_argument("--paths", default=s, type=int)
    p.add_argument("--steps", default=s, type=int)
    p.add_argument("--seed", default=s, type=int)
    p.add_argument("--out-dir", default=s, dest="out_dir")
    p.add_argument("--format", default=s, choices=["json", "csv"])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="esscher", description="Second-order Esscher pricing for jump models")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    s = argparse.SUPPRESS
    fit = sub.add_parser("fit", help="maximum-likelihood fit to a date,close file")
    fit.add_argument("--prices", default=s)
    fit.add_argument("--starts", default=s, type=int)
    price = sub.add_parser("price", help="one European option price")
    interval = sub.add_parser("interval", help="CJD price across a psi grid")
    hedge = sub.add_parser("hedge", help="delta-hedging P&L with VaR and ES")
    hedge.add_argument("--pricer", default=s, choices=["psi", "no-jump-risk", "merton", "bs"])
    cal = sub.add_parser("calibrate", help="fit a family to call quotes")
    cal.add_argument("--quotes", default=s)
    cal.add_argument("--min-open-interest", default=s, dest="min_open_interest", type=float)
    cal.add_argument("--starts", default=s, type=int)
    check = sub.add_parser("charfn-check", help="martingale identity over model/measure pairs")
    for p in (fit, price, interval, hedge, cal, check):
        _common(p)
    return parser


def resolve(argv: Optional[Sequence[str]] = None) -> dict:
    """Effective settings: flags over ``--config`` over defaults."""
    ns = vars(build_parser().parse_args(argv))
    cfg = dict(DEFAULTS)
    if "config" in ns:
        try:
            from_file = json.loads(Path(ns["config"]).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {ns['config']}: {exc}") from None
        unknown = set(from_file) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)}")
        cfg.update(from_file)
    cfg.update({k: v for k, v in ns.items() if k != "config"})
    if cfg["paths"] is None:
        cfg["paths"] = 10_000 if cfg["command"] == "hedge" else 100_000
    return cfg


# --- helpers -------------------------------------------------------------------

def _params(cfg: dict, family: str) -> dict:
    out = dict(DEFAULT_PARAMS[family])
    given = cfg.get("params")
    if isinstance(given, str):
        for item in filter(None, given.split(",")):
            key, _, val = item.partition("=")
            if key.strip() not in out:
                raise UsageError(f"unknown parameter {key!r} for {family}; expected {sorted(out)}")
            out[key.strip()] = float(val)
    elif isinstance(given, dict):
        out.update({k: float(v) for k, v in given.items()})
    return out


def _model(cfg: dict):
    family = cfg["model"].lower()
    if family not in MODELS:
        raise UsageError(f"unknown model {family!r}; expected one of {sorted(MODELS)}")
    model = MODELS[family](**_params(cfg, family))
    ensure_valid(model)
    return family, model


def _policy(cfg: dict) -> TruncationPolicy:
    if cfg.get("n_fixed") is not None:
        return TruncationPolicy.fixed(cfg["n_fixed"])
    if cfg.get("adaptive_mass") is not None:
        return TruncationPolicy.adaptive(mass=cfg["adaptive_mass"])
    return TruncationPolicy.adaptive()


def _ctx(cfg: dict) -> MarketContext:
    ctx = MarketContext(cfg["rate"], cfg["spot"], cfg["expiry"])
    ensure_valid(ctx)
    return ctx


def _psi_grid(text: str) -> np.ndarray:
    try:
        lo, hi, step = (float(t) for t in text.split(":"))
    except ValueError:
        raise UsageError(f"--psi-grid must be lo:hi:step, got {text!r}") from None
    if not step > 0 or hi < lo:
        raise UsageError("--psi-grid needs lo <= hi and step > 0")
    n = int(math.floor((hi - lo) / step + 1e-9))
    return lo + step * np.arange(n + 1)


def _measure(cfg: dict, family: str, model):
    cls = MeasureClass.parse(cfg["measure"])
    r = cfg["rate"]
    if family == "cjd":
        if cfg.get("phi") is not None:
            eta, psi = eta_psi_from_phi(model, r, cfg["phi"], cls)
            return cjd_measure_from_eta(model, r, eta, psi, cls)
        return cjd_measure(model, r, cfg["psi"], cls)
    if cfg.get("phi") is not None:
        raise UsageError("--phi is only defined for the cjd model")
    return esscher_measure(model, r, cfg["psi"], cls)


def _describe(measure) -> dict:
    out = {"class": measure.cls.value, "eta": measure.eta, "psi": measure.psi, "residual": measure.residual}
    if hasattr(measure, "lam_adj"):
        out["lambda_adj"] = measure.lam_adj
    return out


def _emit(cfg: dict, name: str, summary: dict) -> Path:
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = dict(summary, config=_echo(cfg))
    if cfg["format"] == "csv":
        path = fio.safe_join(out_dir, name + ".csv")
        fio.write_csv(path, ("key", "value"), _flatten(summary))
    else:
        path = fio.safe_join(out_dir, name + ".json")
        fio.write_json(path, summary)
    return path


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flatten(v, f"{prefix}{k}.")
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}{i}.")
    else:
        yield prefix[:-1], "" if obj is None else obj


def _echo(cfg: dict) -> dict:
    return {k: cfg[k] for k in sorted(cfg)}


# --- commands --------------------------------------------------------------------

def cmd_fit(cfg: dict) -> dict:
    if not cfg.get("prices"):
        raise UsageError("fit needs --prices")
    rows = fio.load_prices(cfg["prices"])
    series = log_returns_from_prices(rows, str(cfg["prices"]))
    fc = FitConfig(n_starts=cfg["starts"], seed=cfg["seed"])
    family = cfg["model"].lower()
    if family == "all":
        fits = fit_nested(series, fc)
    elif family in ("gbm", "cjd", "ljd"):
        fits = {family: fit_mle(series, family, config=fc)}
    else:
        raise UsageError("fit supports --model gbm, cjd, ljd or all")
    out = {"n_obs": len(series), "dt": series.dt, "fits": {}}
    for name, res in fits.items():
        out["fits"][name] = {"params": vars(res.model), "loglik": res.loglik, "converged": res.converged,
                             "iterations": res.iterations, "grad_norm": res.grad_norm}
    _emit(cfg, "fit", out)
    return out


def _fft_value(cf, ctx: MarketContext, K: float, kind: str) -> float:
    curve = (fft_call_curve if kind == "call" else fft_put_curve)(cf, ctx.x, ctx.r, ctx.tau, FftGrid())
    return price_at_strike(curve, K)


def cmd_price(cfg: dict) -> dict:
    family, model = _model(cfg)
    ctx = _ctx(cfg)
    K, kind, method = cfg["strike"], cfg["kind"], cfg["method"]
    policy = _policy(cfg)
    out: dict = {"model": family, "method": method, "kind": kind, "strike": K}

    def finish(call_price):
        return call_price if kind == "call" else european_put_from_parity(call_price, ctx, K)

    if family == "gbm":
        sigma = model.sigma
        out["measure"] = {"class": "risk-neutral"}
        if method in ("series", "explicit"):
            out["price"] = bs_call(ctx, K, sigma) if kind == "call" else bs_put(ctx, K, sigma)
        elif method == "fft":
            out["price"] = _fft_value(charfn_bs(ctx.r, sigma, ctx.tau), ctx, K, kind)
        else:
            paths = simulate_risk_neutral_gbm(sigma, ctx.r, ctx.x, ctx.tau, cfg["paths"], cfg["steps"], cfg["seed"])
            out["price"], out["std_error"] = mc_price(paths, Payoff(kind, K))
        _emit(cfg, "price", out)
        return out

    measure = _measure(cfg, family, model)
    out["measure"] = _describe(measure)
    if method == "fft":
        out["price"] = _fft_value(charfn_for_measure(model, measure, ctx.tau), ctx, K, kind)
    elif method == "mc":
        if family == "cjd":
            paths = simulate_cjd_rpsi(model, measure, ctx.x, ctx.tau, ctx.r, cfg["paths"], cfg["steps"], cfg["seed"])
        else:
            paths = simulate_q(model, measure, ctx.x, ctx.tau, ctx.r, cfg["paths"], cfg["steps"], cfg["seed"])
        out["price"], out["std_error"] = mc_price(paths, Payoff(kind, K))
    elif family == "cjd":
        detail = cjd_call_detail(ctx, K, model, measure, policy)
        out["price"] = finish(detail.price)
        out["terms"] = detail.terms
        out["tail_bound"] = detail.bound
    elif family == "ljd":
        if method == "explicit":
            call = ljd_call_second_order(ctx, K, model, measure.eta, measure.psi, policy)
        else:
            call = ljd_call_exact(ctx, K, model, measure.eta, measure.psi, policy)
        out["price"] = finish(call)
    else:
        raise UsageError(f"{family} prices are available with --method fft or mc")
    _emit(cfg, "price", out)
    return out


def cmd_interval(cfg: dict) -> dict:
    family, model = _model(cfg)
    if family != "cjd":
        raise UsageError("interval sweeps are defined for the cjd model")
    ctx = _ctx(cfg)
    grid = _psi_grid(cfg["psi_grid"])
    policy = _policy(cfg)
    iv = cjd_price_interval(ctx, cfg["strike"], model, grid, MeasureClass.parse(cfg["measure"]), policy,
                            check=policy.mode == "adaptive")
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    cls = MeasureClass.parse(cfg["measure"])
    rows = []
    for psi, price in iv.points:
        m = cjd_measure(model, ctx.r, psi, cls)
        detail = cjd_call_detail(ctx, cfg["strike"], model, m, policy)
        rows.append((psi, m.eta, m.lam_adj, price, detail.terms, detail.bound))
    fio.write_csv(fio.safe_join(out_dir, "interval.csv"),
                  ("psi", "eta", "lambda_adj", "price", "terms", "tail_bound"), rows)
    out = {"model": family, "points": len(iv.points), "failures": [list(f) for f in iv.failures],
           "lower_bound": iv.lower_bound, "upper_bound": iv.upper_bound,
           "monotone": iv.is_monotone(), "within_bounds": iv.within_bounds(), "csv": "interval.csv"}
    _emit(cfg, "interval", out)
    return out


def cmd_hedge(cfg: dict) -> dict:
    family, model = _model(cfg)
    r = cfg["rate"]
    policy = _policy(cfg)
    choice = cfg["pricer"]
    if family == "gbm" or choice == "bs":
        pricer = BSPricer(model.sigma)
    elif family == "cjd":
        pricer = (CJDPricer(model, cjd_no_jump_risk(model, r, cfg["measure"]), policy)
                  if choice == "no-jump-risk" else CJDPricer(model, _measure(cfg, family, model), policy))
    elif family == "ljd":
        if choice == "merton":
            pricer = MertonPricer.risk_neutral(model, policy)
        else:
            m = esscher_measure(model, r, cfg["psi"], "exponential")
            pricer = MertonPricer.esscher(model, m.eta, m.psi, policy)
    else:
        raise UsageError("hedge supports gbm, cjd and ljd")
    steps = cfg["steps"] if cfg["steps"] > 1 else max(1, round(252 * cfg["expiry"]))
    hc = HedgeConfig(pricer, model, cfg["spot"], cfg["strike"], cfg["expiry"], r, steps, cfg["paths"], cfg["seed"])
    rep = hedge_simulate(hc)
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    fio.write_csv(fio.safe_join(out_dir, "pnl.csv"), ("path", "pnl"), enumerate(rep.pnl.tolist()))
    out = {"model": family, "pricer": pricer.label, "premium": rep.premium, "mean_pnl": rep.mean_pnl,
           "var_5": rep.var_5, "es_5": rep.es_5, "n_paths": int(rep.pnl.size), "steps": steps,
           "path_checksum": rep.path_checksum, "csv": "pnl.csv"}
    _emit(cfg, "hedge", out)
    return out


def cmd_calibrate(cfg: dict) -> dict:
    if not cfg.get("quotes"):
        raise UsageError("calibrate needs --quotes")
    family = cfg["model"].lower()
    quotes = fio.load_quotes(cfg["quotes"], min_open_interest=cfg["min_open_interest"])
    res = calibrate(family, quotes, CalibConfig(n_starts=cfg["starts"], seed=cfg["seed"], policy=_policy(cfg)))
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    fio.write_csv(fio.safe_join(out_dir, "iv_curve.csv"),
                  ("strike", "market_mid", "model_price", "market_iv", "model_iv"),
                  zip(quotes.strikes.tolist(), quotes.mids.tolist(), res.model_prices.tolist(),
                      res.market_iv.tolist(), res.model_iv.tolist()))
    out = {"family": family, "params": res.params, "rmse": res.rmse, "residuals": res.residuals,
           "converged": res.converged, "message": res.message, "T": quotes.T, "n_quotes": int(quotes.strikes.size),
           "csv": "iv_curve.csv"}
    _emit(cfg, "calibrate", out)
    return out


def martingale_suite(r: float = 0.03, T: float = 0.5) -> list[dict]:
    """``Phi(0)`` and ``|Phi(-i) - e^{rT}|`` for the standard model/measure pairs."""
    cjd = CJD(**DEFAULT_PARAMS["cjd"])
    ljd = LJD(**DEFAULT_PARAMS["ljd"])
    kou = KouDE(**DEFAULT_PARAMS["kou"])
    vg = VG(**DEFAULT_PARAMS["vg"])
    cases = [(f"cjd {cls} psi={psi:g}", cjd, cls, psi)
             for cls in ("exponential", "linear") for psi in (-400.0, -10.0, 0.0, 10.0, 150.0)]
    cases += [(f"ljd exponential psi={psi:g}", ljd, "exponential", psi) for psi in (-1.0, 0.0)]
    cases += [("kou exponential psi=-0.5", kou, "exponential", -0.5),
              ("kou first order", kou, "exponential", 0.0),
              ("vg first order", vg, "exponential", 0.0)]
    rows = []
    for label, model, cls, psi in cases:
        m = cjd_measure(model, r, psi, cls) if isinstance(model, CJD) else esscher_measure(model, r, psi, cls)
        cf = charfn_for_measure(model, m, T)
        rows.append({"pair": label, "eta": m.eta, "phi0_error": float(abs(cf(0.0) - 1.0)),
                     "martingale_error": cf.martingale_error(r)})
    rows.append({"pair": "bs", "eta": 0.0, "phi0_error": float(abs(charfn_bs(r, 0.2, T)(0.0) - 1.0)),
                 "martingale_error": charfn_bs(r, 0.2, T).martingale_error(r)})
    rows.append({"pair": "ljd merton risk-neutral", "eta": 0.0,
                 "phi0_error": float(abs(charfn_merton_qbs(ljd, r, T)(0.0) - 1.0)),
                 "martingale_error": charfn_merton_qbs(ljd, r, T).martingale_error(r)})
    return rows


def cmd_charfn_check(cfg: dict) -> dict:
    rows = martingale_suite(cfg["rate"], cfg["expiry"])
    # oracle deltas: FFT against the series price at the money for CJD and Merton
    ctx = MarketContext(cfg["rate"], 100.0, cfg["expiry"])
    cjd = CJD(**DEFAULT_PARAMS["cjd"])
    ljd = LJD(**DEFAULT_PARAMS["ljd"])
    m = cjd_measure(cjd, ctx.r, 0.0)
    oracle = {
        "cjd_fft_minus_series": _fft_value(charfn_cjd(cjd, m.eta, 0.0, "exponential", ctx.tau), ctx, 100.0, "call")
        - cjd_call_detail(ctx, 100.0, cjd, m).price,
        "merton_fft_minus_series": _fft_value(charfn_merton_qbs(ljd, ctx.r, ctx.tau), ctx, 100.0, "call")
        - merton_call(ctx, 100.0, ljd),
    }
    ok = all(r["martingale_error"] < 1e-7 and r["phi0_error"] < 1e-12 for r in rows)
    out = {"pairs": rows, "oracle_deltas": oracle, "all_pass": ok}
    _emit(cfg, "charfn_check", out)
    return out


COMMANDS = {"fit": cmd_fit, "price": cmd_price, "interval": cmd_interval, "hedge": cmd_hedge,
            "calibrate": cmd_calibrate, "charfn-check": cmd_charfn_check}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        cfg = resolve(argv)
        out = COMMANDS[cfg["command"]](cfg)
    except UsageError as exc:
        sys.stderr.write(fio.dumps({"error": "usage", "message": str(exc)}))
        return 2
    except Exception as exc:  # every failure is reported as JSON
        sys.stderr.write(fio.dumps({"error": type(exc).__name__, "message": str(exc)}))
        return 1
    sys.stdout.write(fio.dumps(out))
    if cfg["command"] == "charfn-check" and not out["all_pass"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
