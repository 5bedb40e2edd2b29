"""File formats: price and quote CSVs, quote sidecars, JSON and CSV artifacts.

Floats are written with 17 significant digits so every artifact re-parses to
the identical binary value.  Calendar dates become year fractions here, and
only here, with the ACT/365 convention.
"""
from __future__ import annotations

import csv
import datetime as _dt
import json
import math
import os
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from .calibration import QuoteSet

DAYS_PER_YEAR = 365.0


class InputError(ValueError):
    """Malformed input file; the message names the file and line."""


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def year_fraction(start, end) -> float:
    """ACT/365 year fraction between two dates."""
    return (_as_date(end) - _as_date(start)).days / DAYS_PER_YEAR


def _as_date(d) -> _dt.date:
    if isinstance(d, _dt.datetime):
        return d.date()
    if isinstance(d, _dt.date):
        return d
    return _dt.date.fromisoformat(str(d))


def _rows(path, header: Sequence[str]):
    """Yield ``(line_number, fields)`` after checking the header."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        if [h.strip().lower() for h in first] != list(header):
            raise InputError(f"{path}:1: header must be {','.join(header)}, got {','.join(first)}")
        for row in reader:
            if not row or all(not f.strip() for f in row):
                continue
            if len(row) != len(header):
                raise InputError(f"{path}:{reader.line_num}: expected {len(header)} fields, got {len(row)}")
            yield reader.line_num, [f.strip() for f in row]


def _number(path, line: int, name: str, text: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise InputError(f"{path}:{line}: {name} {text!r} is not a number") from None
    if not math.isfinite(val):
        raise InputError(f"{path}:{line}: {name} must be finite")
    return val


def load_prices(path) -> list[tuple[_dt.date, float]]:
    """Read a ``date,close`` file: ISO dates, strictly increasing, positive closes."""
    out: list[tuple[_dt.date, float]] = []
    for line, (d, c) in _rows(path, ("date", "close")):
        try:
            date = _dt.date.fromisoformat(d)
        except ValueError:
            raise InputError(f"{path}:{line}: date {d!r} is not ISO-8601") from None
        close = _number(path, line, "close", c)
        if not close > 0:
            raise InputError(f"{path}:{line}: close must be positive, got {c}")
        if out and date == out[-1][0]:
            raise InputError(f"{path}:{line}: duplicate date {d}")
        if out and date < out[-1][0]:
            raise InputError(f"{path}:{line}: date {d} is earlier than the previous row")
        out.append((date, close))
    if not out:
        raise InputError(f"{path}: no data rows")
    return out


def write_prices(path, rows: Iterable[tuple]) -> None:
    write_csv(path, ("date", "close"), ((_as_date(d).isoformat(), c) for d, c in rows))


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def load_quotes(path, sidecar=None, min_open_interest: float = 100.0,
                band: Optional[tuple[float, float]] = None, overrides: Optional[dict] = None) -> QuoteSet:
    """Read ``strike,mid,open_interest`` rows plus the ``{spot, r, trade_date, expiry}`` sidecar.

    Values in ``overrides`` replace sidecar fields.  Rows are sorted by strike
    and filtered by open interest and strike band.
    """
    meta: dict = {}
    side = Path(sidecar) if sidecar is not None else sidecar_path(path)
    if side.exists():
        meta = json.loads(side.read_text(encoding="utf-8"))
    elif sidecar is not None:
        raise InputError(f"{side}: sidecar not found")
    meta.update({k: v for k, v in (overrides or {}).items() if v is not None})
    missing = [k for k in ("spot", "r", "trade_date", "expiry") if k not in meta]
    if missing:
        raise InputError(f"{side}: missing sidecar fields {missing}")

    rows = []
    for line, (k, m, oi) in _rows(path, ("strike", "mid", "open_interest")):
        rows.append((_number(path, line, "strike", k), _number(path, line, "mid", m),
                     _number(path, line, "open_interest", oi), line))
    if not rows:
        raise InputError(f"{path}: no data rows")
    rows.sort(key=lambda t: t[0])
    for a, b in zip(rows, rows[1:]):
        if a[0] == b[0]:
            raise InputError(f"{path}:{b[3]}: duplicate strike {b[0]}")
    for k, m, _, line in rows:
        if not m > 0:
            raise InputError(f"{path}:{line}: mid must be positive")
    T = year_fraction(meta["trade_date"], meta["expiry"])
    if not T > 0:
        raise InputError(f"{side}: expiry must follow trade_date")
    qs = QuoteSet(float(meta["spot"]), float(meta["r"]), T, [r[0] for r in rows], [r[1] for r in rows],
                  [r[2] for r in rows], str(meta["trade_date"]), str(meta["expiry"]))
    try:
        return qs.filtered(min_open_interest, band)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None


def write_quotes(path, quotes: QuoteSet) -> None:
    """Write a quote file and its sidecar (the inverse of :func:`load_quotes` without filtering)."""
    if quotes.open_interest is None:
        raise ValueError("quotes without open interest cannot be written in the quote format")
    write_csv(path, ("strike", "mid", "open_interest"), zip(quotes.strikes, quotes.mids, quotes.open_interest))
    write_json(sidecar_path(path), {"spot": quotes.spot, "r": quotes.r,
                                    "trade_date": quotes.trade_date, "expiry": quotes.expiry})


# --- artifacts ---------------------------------------------------------------

def _encode(obj: Any, indent: int, level: int) -> str:
    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(bool(obj) if obj is not None else None)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        # JSON has no NaN or infinity; they become null
        return fmt_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [json.dumps(str(k)) + ": " + _encode(v, indent, level + 1) for k, v in obj.items()]
        return "{" + pad + ("," + pad).join(items) + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj.tolist() if isinstance(obj, np.ndarray) else obj)
        if not seq:
            return "[]"
        return "[" + pad + ("," + pad).join(_encode(v, indent, level + 1) for v in seq) + end + "]"
    if hasattr(obj, "isoformat"):
        return json.dumps(obj.isoformat())
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    """JSON text with floats at 17 significant digits."""
    return _encode(obj, indent, 0) + "\n"


def write_json(path, obj: Any) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def read_json(path) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    return str(v)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def safe_join(out_dir, name: str) -> Path:
    """Path of artifact ``name`` inside ``out_dir``; refuses anything that escapes it."""
    base = Path(out_dir).resolve()
    target = (base / name).resolve()
    if os.path.commonpath([base, target]) != str(base):
        raise ValueError(f"artifact {name!r} would be written outside {base}")
    return target
