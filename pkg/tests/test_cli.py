import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from impactlab.cli import main
from impactlab.config import ConfigError, apply_override, make_model, validate
from impactlab.io import read_bars_dir, read_metaorders_csv, read_table_csv
from impactlab.models import PropagatorParams, vwap_trajectory
from impactlab.synth import LogCurveModel

SMALL = ["--set", "population.n_orders=300", "--set", "population.days=30", "--set", "population.symbols=[\"A\",\"B\"]"]


def _files(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def _table(path):
    header, rows = read_table_csv(path)
    return header, np.array([[float(c) for c in r] for r in rows])


def test_simulate_matches_closed_form(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--out", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == [f"trajectory_F={f}.csv" for f in ("0.25", "0.5", "0.75", "1.0")]
    for f in (0.25, 0.5, 0.75, 1.0):
        header, data = _table(out / f"trajectory_F={f}.csv")
        assert header == ["time", "z", "impact", "closed_form"]
        expected = vwap_trajectory(PropagatorParams(0.5, 0.5, 0, 1.0, f), data[:, 1])
        assert_allclose(data[:, 2], expected, atol=1e-12)
        assert_allclose(data[:, 3], expected, rtol=1e-12)


def test_simulate_ac(tmp_path):
    out = tmp_path / "ac"
    assert main(["simulate", "--out", str(out), "--set", "simulate.model=\"ac\"", "--set", "simulate.step=0.0001"]) == 0
    ends = [_table(p)[1][-1, 1] for p in sorted(out.iterdir())]
    assert_allclose(ends, ends[0], rtol=1e-3)


def test_outputs_carry_hash_and_seed(tmp_path):
    out = tmp_path / "o"
    assert main(["book-invert", "--out", str(out), "--seed", "17"]) == 0
    first = (out / "book_impact.csv").read_text().splitlines()[0]
    assert first.startswith("# impactlab book-invert config_hash=") and "seed=17" in first


def test_same_seed_gives_byte_identical_outputs(tmp_path):
    args = ["generate", "--seed", "5", "--preset", "paper-log-curve"] + SMALL
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a, b = _files(tmp_path / "a"), _files(tmp_path / "b")
    assert a == b and "metaorders.csv" in a and "bars/A.csv" in a
    assert main(["generate", "--seed", "6", "--preset", "paper-log-curve", "--out", str(tmp_path / "c")] + SMALL) == 0
    assert _files(tmp_path / "c")["metaorders.csv"] != a["metaorders.csv"]


def test_generated_files_reingest(tmp_path):
    gen = tmp_path / "gen"
    assert main(["generate", "--seed", "2", "--out", str(gen)] + SMALL) == 0
    orders = read_metaorders_csv(gen / "metaorders.csv")
    bars = read_bars_dir(gen / "bars")
    assert orders.diagnostics == [] and bars.diagnostics == []
    assert len(orders.items) == 300
    ing = tmp_path / "ing"
    assert main(["ingest", "--metaorders", str(gen / "metaorders.csv"), "--bars", str(gen / "bars"),
                 "--out", str(ing)]) == 0
    header, rows = read_table_csv(ing / "dataset.csv")
    _, truth = read_table_csv(gen / "truth.csv")
    t_idx, d_idx = header.index("temporary"), header.index("eta")
    measured: dict = {}
    for r in rows:
        measured.setdefault((r[0], r[3]), []).append(float(r[d_idx]))
    matched = 0
    for sym, start, eta, *_ in truth:
        if (sym, start) in measured:
            assert min(abs(m / float(eta) - 1) for m in measured[(sym, start)]) < 1e-9
            matched += 1
    assert matched == len(rows) > 0


def _fixture(tmp_path):
    bars = tmp_path / "bars"
    bars.mkdir()
    lines = ["date,time,open,high,low,close,volume"]
    price = 20.0
    for k in range(390):
        m = 570 + k
        nxt = price * (1.0005 if k % 3 else 0.9996)
        lines.append(f"2013-06-03,{m // 60:02d}:{m % 60:02d},{price!r},{max(price, nxt)!r},{min(price, nxt)!r},{nxt!r},1000")
        price = nxt
    (bars / "ABC.csv").write_text("\n".join(lines) + "\n")
    orders = tmp_path / "orders.csv"
    rows = ["symbol,sign,volume,start,end"]
    rows += [f"ABC,+1,500,2013-06-03T{h}:00,2013-06-03T{h}:30" for h in ("10", "11", "12")]
    rows += ["ABC,-1,50,2013-06-03T13:00,2013-06-03T13:01", "ABC,+1,50,2013-06-03T14:00,2013-06-03T14:01"]
    orders.write_text("\n".join(rows) + "\n")
    return orders, bars


def test_ingest_fixture_filter_report(tmp_path):
    orders, bars = _fixture(tmp_path)
    out = tmp_path / "out"
    assert main(["ingest", "--metaorders", str(orders), "--bars", str(bars), "--out", str(out)]) == 0
    header, rows = read_table_csv(out / "filter_report.csv")
    assert [int(r[1]) for r in rows] == [5, 5, 5, 3, 3]
    _, ds = read_table_csv(out / "dataset.csv")
    assert len(ds) == 3


def test_ingest_json_format(tmp_path):
    orders, bars = _fixture(tmp_path)
    out = tmp_path / "out"
    assert main(["ingest", "--metaorders", str(orders), "--bars", str(bars), "--out", str(out), "--format", "json"]) == 0
    doc = json.loads((out / "filter_report.json").read_text())
    assert [r["remaining"] for r in doc["rows"]] == [5, 5, 5, 3, 3]
    assert doc["seed"] == 0 and len(doc["config_hash"]) == 16


def test_empty_bars_dir_aborts_without_output(tmp_path, capsys):
    orders, _ = _fixture(tmp_path)
    empty = tmp_path / "empty"
    empty.mkdir()
    out = tmp_path / "out"
    assert main(["ingest", "--metaorders", str(orders), "--bars", str(empty), "--out", str(out)]) == 1
    assert "no-data" in capsys.readouterr().err
    assert not out.exists() or not any(out.iterdir())
    assert not [p for p in tmp_path.iterdir() if p.name.startswith(".impactlab-")]


def test_failure_keeps_previous_outputs_intact(tmp_path):
    out = tmp_path / "out"
    assert main(["book-invert", "--out", str(out)]) == 0
    before = _files(out)
    assert main(["book-invert", "--out", str(out), "--set", "book.n=-1"]) == 1
    assert _files(out) == before


def test_fit_curve_on_log_preset(tmp_path):
    out = tmp_path / "fit"
    args = ["fit-curve", "--preset", "paper-log-curve", "--seed", "3", "--out", str(out),
            "--set", "population.n_orders=100000", "--set", "population.days=5000",
            "--set", "population.herding_p_same=0.5", "--set", "market.noise_scale=0.25"]
    assert main(args) == 0
    fits = json.loads((out / "fits.json").read_text())["fits"]
    assert fits["log"]["e_rms"] < fits["power"]["e_rms"]
    assert "preset=paper-log-curve" in (out / "curve.csv").read_text().splitlines()[0]


def test_overlap_and_book_commands(tmp_path):
    out = tmp_path / "ov"
    assert main(["overlap", "--out", str(out), "--set", "population.n_orders=2000", "--set", "population.days=100"]) == 0
    header, data = _table(out / "overlap.csv")
    assert header[4] == "same_sign_fraction" and np.all(np.isfinite(data[:, 4]))
    out = tmp_path / "bk"
    assert main(["book-invert", "--out", str(out)]) == 0
    header, data = _table(out / "book_impact.csv")
    assert np.all(np.diff(data[:, 1]) > 0)
    assert_allclose(data[:, 1], data[:, 3], rtol=1e-9)


@pytest.mark.parametrize("command", ["fit-surface", "residuals", "local-exponents", "trajectories", "decay"])
def test_estimation_commands_run(tmp_path, command):
    out = tmp_path / command
    args = [command, "--out", str(out), "--set", "population.n_orders=3000", "--set", "population.days=150",
            "--set", "estimation.n_eta_bins=4", "--set", "estimation.n_f_bins=4", "--set", "estimation.window=3"]
    assert main(args) == 0
    assert any(out.iterdir())


def test_config_errors_exit_two(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"population": {"n_ordrs": 5}}))
    assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 2
    assert "unknown key population.n_ordrs" in capsys.readouterr().err
    cfg.write_text("{not json")
    assert main(["generate", "--config", str(cfg)]) == 2


def test_flags_override_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 1, "out": str(tmp_path / "from_file"), "book": {"n_points": 5}}))
    assert main(["book-invert", "--config", str(cfg), "--out", str(tmp_path / "flag"), "--set", "book.n_points=7"]) == 0
    assert not (tmp_path / "from_file").exists()
    _, data = _table(tmp_path / "flag" / "book_impact.csv")
    assert len(data) == 7


def test_config_helpers():
    raw = apply_override({}, "model.params={\"a\": 0.03}")
    cfg = validate(apply_override(raw, "model.preset=paper-log-curve"))
    model = make_model(cfg["model"])
    assert isinstance(model, LogCurveModel) and model.a == 0.03 and model.b == 465.0
    with pytest.raises(ConfigError):
        validate({"format": "xml"})
    with pytest.raises(ConfigError):
        validate({"model": {"preset": "nope"}})
    with pytest.raises(ConfigError):
        apply_override({}, "a.b.c=1")
