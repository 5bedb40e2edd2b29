import datetime as dt
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from esscher import io as fio
from esscher.analytic import bs_call
from esscher.calibration import QuoteSet
from esscher.cli import main, resolve
from esscher.estimation import log_returns_from_prices
from esscher.models import GBM, MarketContext
from esscher.montecarlo import simulate_p


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def _run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out else None), (json.loads(err) if err else None)


# --- price files ----------------------------------------------------------------

def test_two_row_price_file(tmp_path):
    p = _write(tmp_path / "p.csv", "date,close\n2020-01-02,100\n2020-01-03,105\n")
    rows = fio.load_prices(p)
    assert len(log_returns_from_prices(rows)) == 1


@pytest.mark.parametrize("body,match", [
    ("2020-01-02,100\n2020-01-03,-1\n", ":3: close must be positive"),
    ("2020-01-02,100\n2020-01-02,101\n", ":3: duplicate date"),
    ("2020-01-03,100\n2020-01-02,101\n", ":3: date 2020-01-02 is earlier"),
    ("2020-01-02,abc\n", ":2: close 'abc' is not a number"),
    ("02/01/2020,100\n", ":2: date '02/01/2020' is not ISO-8601"),
])
def test_price_file_errors_name_the_line(tmp_path, body, match):
    p = _write(tmp_path / "p.csv", "date,close\n" + body)
    with pytest.raises(fio.InputError, match=match):
        fio.load_prices(p)


def test_bad_header(tmp_path):
    with pytest.raises(fio.InputError, match="header"):
        fio.load_prices(_write(tmp_path / "p.csv", "day,price\n2020-01-02,1\n"))


def test_six_thousand_rows_round_trip(tmp_path):
    levels = simulate_p(GBM(0.1, 0.3), 50.0, 6000 / 252, 1, 5999, seed=3).levels[0]
    d0 = dt.date(2000, 1, 3)
    rows = [(d0 + dt.timedelta(days=i), float(math.exp(v))) for i, v in enumerate(levels)]
    path = tmp_path / "prices.csv"
    fio.write_prices(path, rows)
    back = fio.load_prices(path)
    assert back == rows
    assert len(log_returns_from_prices(back)) == 5999


# --- quote files ----------------------------------------------------------------

SIDE = {"spot": 100.0, "r": 0.01, "trade_date": "2024-01-02", "expiry": "2024-03-05"}


def _quotes(tmp_path, rows):
    q = _write(tmp_path / "q.csv", "strike,mid,open_interest\n" + "".join(f"{a},{b},{c}\n" for a, b, c in rows))
    fio.write_json(tmp_path / "q.json", SIDE)
    return q


def test_unsorted_quotes_come_back_sorted(tmp_path):
    q = fio.load_quotes(_quotes(tmp_path, [(110, 1.0, 500), (90, 11.0, 500), (100, 4.0, 500)]))
    assert q.strikes.tolist() == [90.0, 100.0, 110.0] and q.mids.tolist() == [11.0, 4.0, 1.0]
    assert q.T == pytest.approx(63 / 365)


def test_empty_after_filter(tmp_path):
    with pytest.raises(fio.InputError, match="open interest > 100"):
        fio.load_quotes(_quotes(tmp_path, [(90, 11.0, 5), (100, 4.0, 100)]))


def test_duplicate_strike_and_missing_sidecar(tmp_path):
    with pytest.raises(fio.InputError, match="duplicate strike"):
        fio.load_quotes(_quotes(tmp_path, [(90, 11.0, 500), (90, 10.0, 500)]))
    q = _write(tmp_path / "lone.csv", "strike,mid,open_interest\n90,1,500\n")
    with pytest.raises(fio.InputError, match="missing sidecar"):
        fio.load_quotes(q)


def test_twenty_strike_file_round_trips_bit_exactly(tmp_path):
    rng = np.random.default_rng(0)
    ks = np.sort(rng.uniform(3600.0, 5300.0, 20))
    mids = rng.uniform(0.5, 800.0, 20)
    q = QuoteSet(4450.32, 0.01, 63 / 365, ks, mids, rng.integers(101, 5000, 20).astype(float),
                 "2024-01-02", "2024-03-05")
    path = tmp_path / "quotes.csv"
    fio.write_quotes(path, q)
    back = fio.load_quotes(path)
    assert back.strikes.size == 20
    assert np.array_equal(back.strikes, q.strikes) and np.array_equal(back.mids, q.mids)
    assert np.array_equal(back.open_interest, q.open_interest) and back.spot == q.spot and back.r == q.r


# --- serialisation ------------------------------------------------------------------

finite = st.floats(allow_nan=False, allow_infinity=False)


@settings(max_examples=200)
@given(st.dictionaries(st.text(max_size=8), st.one_of(finite, st.integers(), st.text(max_size=8),
                                                      st.lists(finite, max_size=5), st.booleans(), st.none())))
def test_json_round_trip(obj):
    assert json.loads(fio.dumps(obj)) == obj


def test_json_non_finite_becomes_null():
    assert json.loads(fio.dumps({"a": math.nan, "b": [math.inf]})) == {"a": None, "b": [None]}


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(finite, st.integers(), finite), min_size=1, max_size=20))
def test_csv_round_trip(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("csv") / "t.csv"
    fio.write_csv(path, ("a", "b", "c"), rows)
    header, body = fio.read_csv(path)
    assert header == ["a", "b", "c"]
    assert [(float(a), int(b), float(c)) for a, b, c in body] == rows


def test_safe_join(tmp_path):
    assert fio.safe_join(tmp_path, "x.json") == (tmp_path / "x.json").resolve()
    with pytest.raises(ValueError):
        fio.safe_join(tmp_path, "../escape.json")
    with pytest.raises(ValueError):
        fio.safe_join(tmp_path, "/etc/passwd")


# --- command line ------------------------------------------------------------------

def test_price_gbm_is_black_scholes(tmp_path, capsys):
    code, out, _ = _run(["price", "--model", "gbm", "--params", "mu=0.07,sigma=0.25", "--strike", "95",
                         "--rate", "0.02", "--expiry", "0.75", "--out-dir", str(tmp_path)], capsys)
    assert code == 0
    assert out["price"] == bs_call(MarketContext(0.02, 100.0, 0.75), 95.0, 0.25)
    saved = fio.read_json(tmp_path / "price.json")
    assert saved["price"] == out["price"] and saved["config"]["strike"] == 95.0


@pytest.mark.parametrize("method", ["series", "fft", "mc"])
def test_price_methods_agree(tmp_path, capsys, method):
    code, out, _ = _run(["price", "--model", "cjd", "--psi", "-10", "--method", method, "--paths", "100000",
                         "--out-dir", str(tmp_path)], capsys)
    assert code == 0
    code, ref, _ = _run(["price", "--model", "cjd", "--psi", "-10", "--out-dir", str(tmp_path)], capsys)
    tol = 3 * out["std_error"] if method == "mc" else 1e-3
    assert abs(out["price"] - ref["price"]) < tol


def test_interval_csv_monotone(tmp_path, capsys):
    code, out, _ = _run(["interval", "--psi-grid", "-425:150:25", "--out-dir", str(tmp_path)], capsys)
    assert code == 0 and out["monotone"] and out["within_bounds"]
    header, rows = fio.read_csv(tmp_path / "interval.csv")
    assert header == ["psi", "eta", "lambda_adj", "price", "terms", "tail_bound"]
    prices = [float(r[3]) for r in rows]
    assert len(prices) == 24 and all(b >= a - 1e-9 for a, b in zip(prices, prices[1:]))


def test_charfn_check_passes(tmp_path, capsys):
    code, out, _ = _run(["charfn-check", "--out-dir", str(tmp_path)], capsys)
    assert code == 0 and out["all_pass"]
    assert all(r["martingale_error"] < 1e-7 for r in out["pairs"])
    assert abs(out["oracle_deltas"]["cjd_fft_minus_series"]) < 1e-3


def test_byte_identical_artifacts(tmp_path, capsys):
    argv = ["hedge", "--model", "cjd", "--psi", "-50", "--paths", "500", "--steps", "20", "--seed", "7",
            "--out-dir", str(tmp_path)]
    assert main(argv) == 0
    first = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
    assert main(argv) == 0
    assert {p.name: p.read_bytes() for p in tmp_path.iterdir()} == first
    assert set(first) == {"hedge.json", "pnl.csv"}
    capsys.readouterr()


def test_writes_stay_in_out_dir(tmp_path, capsys, monkeypatch):
    work = tmp_path / "cwd"
    work.mkdir()
    monkeypatch.chdir(work)
    out = tmp_path / "out"
    for argv in (["price"], ["interval", "--psi-grid", "-10:10:10"], ["charfn-check"],
                 ["hedge", "--paths", "200", "--steps", "5"], ["price", "--format", "csv"]):
        assert main(argv + ["--out-dir", str(out)]) == 0
    capsys.readouterr()
    assert not list(work.iterdir())
    assert {p.name for p in out.iterdir()} == {"price.json", "interval.json", "interval.csv", "charfn_check.json",
                                               "hedge.json", "pnl.csv", "price.csv"}


def test_fit_and_calibrate_commands(tmp_path, capsys):
    levels = simulate_p(GBM(0.1, 0.3), 50.0, 300 / 365, 1, 300, seed=1).levels[0]
    d0 = dt.date(2020, 1, 1)
    fio.write_prices(tmp_path / "p.csv", [(d0 + dt.timedelta(days=i), math.exp(v)) for i, v in enumerate(levels)])
    code, out, _ = _run(["fit", "--model", "gbm", "--prices", str(tmp_path / "p.csv"),
                         "--out-dir", str(tmp_path)], capsys)
    assert code == 0 and out["n_obs"] == 300 and out["fits"]["gbm"]["params"]["sigma"] > 0

    ctx = MarketContext(0.01, 100.0, 63 / 365)
    ks = np.linspace(85.0, 115.0, 7)
    q = QuoteSet(100.0, 0.01, 63 / 365, ks, [bs_call(ctx, k, 0.2) + 0.1 for k in ks], np.full(7, 500.0),
                 "2024-01-02", "2024-03-05")
    fio.write_quotes(tmp_path / "q.csv", q)
    code, out, _ = _run(["calibrate", "--model", "cjd-1st", "--quotes", str(tmp_path / "q.csv"), "--starts", "2",
                         "--out-dir", str(tmp_path)], capsys)
    assert code == 0 and out["n_quotes"] == 7
    header, rows = fio.read_csv(tmp_path / "iv_curve.csv")
    assert header == ["strike", "market_mid", "model_price", "market_iv", "model_iv"] and len(rows) == 7


def test_config_precedence(tmp_path):
    cfg = _write(tmp_path / "c.json", json.dumps({"strike": 90.0, "rate": 0.04}))
    eff = resolve(["price", "--config", str(cfg), "--strike", "80"])
    assert eff["strike"] == 80.0 and eff["rate"] == 0.04 and eff["spot"] == 100.0
    assert resolve(["hedge"])["paths"] == 10_000 and resolve(["price"])["paths"] == 100_000


def test_errors_are_json(tmp_path, capsys):
    code, _, err = _run(["price", "--model", "nope"], capsys)
    assert code in (1, 2) and "message" in err
    code, _, err = _run(["fit", "--out-dir", str(tmp_path)], capsys)
    assert code == 2 and err["error"] == "usage"
    cfg = _write(tmp_path / "c.json", json.dumps({"bogus": 1}))
    code, _, err = _run(["price", "--config", str(cfg)], capsys)
    assert code == 2 and "bogus" in err["message"]
    code, _, err = _run(["price", "--strike", "abc"], capsys)
    assert code == 2
