import datetime as dt

import numpy as np
import pytest
from numpy.testing import assert_allclose

from impactlab.core import MARKET_OPEN, DayBars, Metaorder
from impactlab.io import (
    IngestError,
    config_hash,
    read_bars_csv,
    read_bars_dir,
    read_metaorders_csv,
    read_table_csv,
    read_whitelist,
    write_bars_csv,
    write_metaorders_csv,
    write_table_csv,
)
from impactlab.synth import LogCurveModel, PopulationConfig, generate_market

HEADER = "date,time,open,high,low,close,volume\n"


def _bar_lines(n, date="2012-01-03"):
    lines = []
    for k in range(n):
        m = MARKET_OPEN + k
        lines.append(f"{date},{m // 60:02d}:{m % 60:02d},10.0,10.5,9.5,10.1,100\n")
    return lines


def test_synthetic_files_round_trip(tmp_path):
    days = generate_market(PopulationConfig(12, days=2, seed=3), LogCurveModel(), noise_scale=1.0)
    write_bars_csv(tmp_path / "SYN.csv", [d.bars for d in days], comment="test")
    orders = [o.order for d in days for o in d.orders]
    write_metaorders_csv(tmp_path / "orders.csv", orders)
    bars = read_bars_csv(tmp_path / "SYN.csv")
    assert bars.diagnostics == []
    for a, b in zip(days, bars.items):
        for col in ("time", "open", "high", "low", "close", "volume"):
            assert_allclose(getattr(b, col), getattr(a.bars, col), rtol=0, atol=0)
    assert read_metaorders_csv(tmp_path / "orders.csv").items == orders


def test_malformed_rows_are_skipped_with_line_numbers(tmp_path):
    lines = _bar_lines(30)
    lines[4] = "2012-01-03,09:34,10.0,9.0,9.5,10.1,100\n"  # high below open
    path = tmp_path / "X.csv"
    path.write_text("# comment\n" + HEADER + "".join(lines))
    res = read_bars_csv(path)
    assert len(res.items) == 1 and len(res.items[0]) == 29
    assert res.diagnostics and res.diagnostics[0].startswith(f"{path}:7:")


def test_too_many_malformed_rows_abort(tmp_path):
    lines = _bar_lines(10)
    lines[1] = "garbage\n"
    lines[2] = "2012-01-03,xx,1,1,1,1,1\n"
    path = tmp_path / "X.csv"
    path.write_text(HEADER + "".join(lines))
    with pytest.raises(IngestError, match="10%"):
        read_bars_csv(path)


def test_wrong_header_is_rejected(tmp_path):
    path = tmp_path / "X.csv"
    path.write_text("a,b,c\n")
    with pytest.raises(IngestError, match="expected header"):
        read_bars_csv(path)


def test_empty_or_missing_bars_dir(tmp_path):
    with pytest.raises(IngestError, match="no-data"):
        read_bars_dir(tmp_path)
    with pytest.raises(IngestError, match="no-data"):
        read_bars_dir(tmp_path / "missing")


def test_bars_dir_keys_by_symbol_and_date(tmp_path):
    (tmp_path / "AAA.csv").write_text(HEADER + "".join(_bar_lines(5) + _bar_lines(5, "2012-01-04")))
    res = read_bars_dir(tmp_path)
    assert [k for k, _ in res.items] == [("AAA", dt.date(2012, 1, 3)), ("AAA", dt.date(2012, 1, 4))]


def test_metaorder_sign_validation(tmp_path):
    path = tmp_path / "o.csv"
    rows = [f"A,+1,10,2012-01-03T10:{k:02d},2012-01-03T10:{k + 5:02d}\n" for k in range(20)]
    rows.append("A,2,10,2012-01-03T10:00,2012-01-03T10:05\n")
    path.write_text("symbol,sign,volume,start,end\n" + "".join(rows))
    res = read_metaorders_csv(path)
    assert len(res.items) == 20
    assert "sign must be" in res.diagnostics[0]


def test_metaorder_rejects_reversed_times(tmp_path):
    path = tmp_path / "o.csv"
    path.write_text("symbol,sign,volume,start,end\nA,-1,10,2012-01-03T10:05,2012-01-03T10:00\n")
    with pytest.raises(IngestError):
        read_metaorders_csv(path)


def test_whitelist(tmp_path):
    path = tmp_path / "wl.txt"
    path.write_text("# symbols\nAAA\n\nBBB\n")
    assert read_whitelist(path) == {"AAA", "BBB"}


def test_table_round_trip_is_lossless(tmp_path):
    values = [0.1, 1 / 3, 1e-300, float("nan"), 12345678.9]
    write_table_csv(tmp_path / "t.csv", ("k", "v", "flag"), [(i, v, i % 2 == 0) for i, v in enumerate(values)], "c")
    header, rows = read_table_csv(tmp_path / "t.csv")
    assert header == ["k", "v", "flag"]
    back = [float(r[1]) for r in rows]
    assert back[:3] + back[4:] == values[:3] + values[4:]
    assert np.isnan(back[3])
    assert rows[0][2] == "true"


def test_config_hash_is_canonical():
    a = config_hash({"b": 1, "a": [1, 2]})
    assert a == config_hash({"a": [1, 2], "b": 1})
    assert a != config_hash({"a": [1, 2], "b": 2})
    assert len(a) == 16
