"""Command-line front end.

Every command reads an optional JSON config (``--config``), applies flag
overrides (flags win), validates the result, and writes its artifacts into
``--out``.  Files are staged and moved into place only when the command
succeeds, so a failed run leaves no partial output.  Each emitted file
starts with a comment line carrying the command, config hash and seed.
"""
from __future__ import annotations

import argparse
import datetime as dt
import json
import math
import shutil
import sys
import tempfile
from collections import Counter
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__
from .book import BookParams, impact_log_closed, invert_impact
from .config import PRESETS, ConfigError, apply_override, load_config, make_model, validate
from .core import FilterConfig, FilterReport
from .estimation import (
    decay_curves,
    equal_count_bins,
    fit_surface,
    impact_curve,
    local_exponent_map,
    overlap_stats,
    residual_map,
    trajectory_curves,
    weighted_nls,
)
from .io import (
    IngestError,
    config_hash,
    format_value,
    read_bars_dir,
    read_metaorders_csv,
    read_table_csv,
    read_whitelist,
    write_bars_csv,
    write_metaorders_csv,
    write_table_csv,
)
from .models import (
    AcParams,
    PropagatorParams,
    SimulationConfig,
    ac_trajectory,
    alpha_trajectory,
    simulate_metaorder_paths,
)
from .pipeline import Dataset, measure, synthetic_dataset
from .synth import PopulationConfig, PowerLaw, generate_population, iter_market

__all__ = ["main", "build_parser", "COMMANDS"]

DATASET_COLUMNS = ("symbol", "sign", "volume", "start", "end", "eta", "F", "pi", "temporary")


class Output:
    """Staging area for a command's artifacts."""

    def __init__(self, cfg: dict, command: str):
        self.cfg = cfg
        self.command = command
        self.format = cfg["format"]
        self.final = Path(cfg["out"])
        self.final.parent.mkdir(parents=True, exist_ok=True)
        self.stage = Path(tempfile.mkdtemp(prefix=".impactlab-", dir=self.final.parent))
        self.files: list[str] = []
        preset = cfg["model"]["preset"]
        self.hash = experiment_hash(cfg)
        self.comment = f"impactlab {command} config_hash={self.hash} seed={cfg['seed']}"
        if preset is not None and command in _USES_MODEL:
            self.comment += f" preset={preset} (published fitted values used as a synthetic generator, not data)"

    def path(self, name: str) -> Path:
        p = self.stage / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.files.append(name)
        return p

    def table(self, name: str, columns, rows) -> None:
        rows = list(rows)
        if self.format == "csv":
            write_table_csv(self.path(name + ".csv"), columns, rows, self.comment)
        else:
            records = [{c: _jsonable(v) for c, v in zip(columns, r)} for r in rows]
            self.json(name, {"columns": list(columns), "rows": records})

    def json(self, name: str, payload) -> None:
        doc = {"comment": self.comment, "config_hash": self.hash, "seed": self.cfg["seed"]}
        doc.update(_jsonable(payload))
        text = json.dumps(doc, indent=2, sort_keys=True, allow_nan=False)
        self.path(name + ".json").write_text(text + "\n")

    def commit(self) -> None:
        self.final.mkdir(parents=True, exist_ok=True)
        for name in self.files:
            dest = self.final / name
            dest.parent.mkdir(parents=True, exist_ok=True)
            if dest.exists():
                dest.unlink()
            shutil.move(str(self.stage / name), dest)
        shutil.rmtree(self.stage, ignore_errors=True)

    def discard(self) -> None:
        shutil.rmtree(self.stage, ignore_errors=True)


def experiment_hash(cfg: dict) -> str:
    """Config hash ignoring where the artifacts are written."""
    return config_hash({k: v for k, v in cfg.items() if k != "out"})


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


# -- data sources ----------------------------------------------------------------

def _population(cfg: dict) -> PopulationConfig:
    p = cfg["population"]
    return PopulationConfig(
        n_orders=p["n_orders"],
        eta_law=PowerLaw(*p["eta_law"]),
        f_law=PowerLaw(*p["f_law"]),
        herding_p_same=p["herding_p_same"],
        days=p["days"],
        seed=cfg["seed"],
        symbols=tuple(p["symbols"]),
        profile=p["profile"],
        daily_volume=p["daily_volume"],
        first_day=dt.date.fromisoformat(p["first_day"]),
    )


def _filters(cfg: dict) -> FilterConfig:
    f = cfg["filters"]
    wl = read_whitelist(f["whitelist"]) if f["whitelist"] else None
    return FilterConfig(wl, f["latest_end"], f["min_duration_minutes"], f["max_eta"])


def _report_diagnostics(diags) -> None:
    for line in diags:
        print(f"warning: {line}", file=sys.stderr)


def _ingest(cfg: dict, horizon_multiple: Optional[float] = None) -> Dataset:
    inp = cfg["input"]
    orders = read_metaorders_csv(inp["metaorders"])
    _report_diagnostics(orders.diagnostics)
    bars = read_bars_dir(inp["bars"])
    _report_diagnostics(bars.diagnostics)
    est = cfg["estimation"]
    return measure(orders.items, dict(bars.items), _filters(cfg), horizon_multiple, est["cross_day"])


def _dataset(cfg: dict, need_paths: bool = False) -> Dataset:
    """Observed data when input files are configured, else the synthetic generator."""
    inp = cfg["input"]
    horizon = cfg["estimation"]["horizon_multiple"] if need_paths else None
    if inp["metaorders"] or inp["bars"]:
        if not (inp["metaorders"] and inp["bars"]):
            raise ConfigError("input needs both metaorders and bars")
        return _ingest(cfg, horizon)
    if inp["dataset"]:
        if need_paths:
            raise ConfigError("paths need metaorders and bars, not a dataset table")
        return _read_dataset(inp["dataset"])
    return synthetic_dataset(
        _population(cfg), make_model(cfg["model"]), cfg["market"]["noise_scale"], _filters(cfg), horizon
    )


def _read_dataset(path) -> Dataset:
    header, rows = read_table_csv(path)
    missing = [c for c in ("eta", "F", "pi", "temporary") if c not in header]
    if missing:
        raise IngestError(f"{path}: dataset lacks columns {missing}")
    col = {c: header.index(c) for c in header}
    arr = {c: np.array([float(r[col[c]]) for r in rows]) for c in ("eta", "F", "pi", "temporary")}
    return Dataset([None] * len(rows), arr["eta"], arr["F"], arr["pi"], arr["temporary"], FilterReport([], Counter(), len(rows)))


# -- commands --------------------------------------------------------------------

def cmd_simulate(cfg: dict, out: Output) -> None:
    s = cfg["simulate"]
    rng_seed = cfg["seed"]
    if s["model"] == "ac":
        for lam in s["lambdas"]:
            p = AcParams(s["a"], s["sigma"], float(lam), s["eta"], s["horizon_t"])
            sim = simulate_metaorder_paths(p, SimulationConfig(s["noise_scale"], s["step"], rng_seed, s["horizon_multiple"]))
            t = np.minimum(sim.time, p.horizon_t)
            closed = ac_trajectory(p, t)
            out.table(f"trajectory_lambda={format_value(float(lam))}", ("time", "impact", "closed_form"),
                      zip(sim.time, sim.impact, closed))
        return
    if s["model"] != "propagator":
        raise ConfigError("simulate.model must be propagator or ac")
    for f in s["durations"]:
        p = PropagatorParams(s["delta"], s["gamma"], s["alpha"], s["eta"], float(f))
        sim = simulate_metaorder_paths(p, SimulationConfig(s["noise_scale"], s["step"], rng_seed, s["horizon_multiple"]))
        closed = alpha_trajectory(p, sim.z)
        impact = sim.impact if sim.impact.ndim == 1 else sim.impact.mean(axis=0)
        out.table(f"trajectory_F={format_value(float(f))}", ("time", "z", "impact", "closed_form"),
                  zip(sim.time, sim.z, impact, closed))


def cmd_generate(cfg: dict, out: Output) -> None:
    pop = _population(cfg)
    m = cfg["market"]
    model = make_model(cfg["model"])
    by_symbol: dict[str, list] = {}
    orders, truth = [], []
    for day in iter_market(pop, model, noise_scale=m["noise_scale"], base_sigma=m["base_sigma"], start_price=m["start_price"]):
        by_symbol.setdefault(day.symbol, []).append(day.bars)
        for o in day.orders:
            orders.append(o.order)
            d = o.descriptors
            truth.append((o.order.symbol, o.order.start.isoformat(timespec="minutes"), d.eta, d.duration_f, d.pi,
                          float(model.temporary(d.eta, d.duration_f))))
    for sym in sorted(by_symbol):
        write_bars_csv(out.path(f"bars/{sym}.csv"), by_symbol[sym], out.comment)
    write_metaorders_csv(out.path("metaorders.csv"), orders, out.comment)
    out.table("truth", ("symbol", "start", "eta", "F", "pi", "model_temporary"), truth)


def cmd_ingest(cfg: dict, out: Output) -> None:
    inp = cfg["input"]
    if not (inp["metaorders"] and inp["bars"]):
        raise ConfigError("ingest needs --metaorders and --bars")
    ds = _ingest(cfg)
    names = ("raw", "filter1", "filter2", "filter3", "filter4")
    out.table("filter_report", ("stage", "remaining"), zip(names, ds.report.stage_counts()))
    rows = []
    for k, o in enumerate(ds.orders):
        rows.append((o.symbol, "+1" if o.sign > 0 else "-1", float(o.volume), o.start.isoformat(timespec="minutes"),
                     o.end.isoformat(timespec="minutes"), ds.eta[k], ds.duration_f[k], ds.pi[k], ds.temporary[k]))
    out.table("dataset", DATASET_COLUMNS, rows)


def _fit_rows(curve, families):
    fits = {}
    for fam in families:
        try:
            fits[fam] = weighted_nls(fam, curve).to_dict()
        except (ArithmeticError, ValueError, RuntimeError) as exc:
            fits[fam] = {"family": fam, "error": str(exc)}
    return fits


def _curve_table(out: Output, name: str, curve) -> None:
    out.table(name, ("x", "impact", "se", "count"), curve.rows())


def cmd_fit_curve(cfg: dict, out: Output) -> None:
    ds = _dataset(cfg)
    est = cfg["estimation"]
    curve = impact_curve(ds.pi, ds.temporary, est["n_bins"])
    _curve_table(out, "curve", curve)
    out.json("fits", {"n_orders": len(ds), "fits": _fit_rows(curve, est["families"])})


def cmd_fit_surface(cfg: dict, out: Output) -> tuple:
    ds = _dataset(cfg)
    est = cfg["estimation"]
    grid, fit = fit_surface(ds.eta, ds.duration_f, ds.temporary, est["n_eta_bins"], est["n_f_bins"], est["surface_family"])
    out.table("surface", ("i", "j", "eta_mean", "F_mean", "impact", "se", "count"), _grid_rows(grid))
    others = {}
    for fam in ("double_power", "double_log"):
        if fam == fit.family:
            continue
        try:
            others[fam] = weighted_nls(fam, grid.curve()).to_dict()
        except (ArithmeticError, ValueError, RuntimeError) as exc:
            others[fam] = {"family": fam, "error": str(exc)}
    out.json("surface_fit", {"fit": fit.to_dict(), "other_families": others,
                             "eta_edges": grid.eta_edges, "F_edges": grid.f_edges})
    return grid, fit


def _grid_rows(grid, *extra):
    n1, n2 = grid.shape
    for i in range(n1):
        for j in range(n2):
            yield (i, j, grid.eta_mean[i, j], grid.f_mean[i, j], grid.impact_mean[i, j], grid.impact_se[i, j],
                   grid.count[i, j]) + tuple(e[i, j] for e in extra)


def cmd_residuals(cfg: dict, out: Output) -> None:
    ds = _dataset(cfg)
    est = cfg["estimation"]
    grid, fit = fit_surface(ds.eta, ds.duration_f, ds.temporary, est["n_eta_bins"], est["n_f_bins"], est["surface_family"])
    res = residual_map(fit, grid)
    out.table("residuals", ("i", "j", "eta_mean", "F_mean", "impact", "se", "count", "residual"), _grid_rows(grid, res))
    out.json("surface_fit", {"fit": fit.to_dict()})


def cmd_local_exponents(cfg: dict, out: Output) -> None:
    ds = _dataset(cfg)
    est = cfg["estimation"]
    le = local_exponent_map(ds.eta, ds.duration_f, ds.temporary, est["n_eta_bins"], est["n_f_bins"], est["window"])
    out.table("local_exponents", ("i", "j", "eta_mean", "F_mean", "impact", "se", "count", "delta", "gamma1", "flagged"),
              _grid_rows(le.grid, le.delta, le.gamma1, le.flagged))


def _edges_or_quantiles(values, edges, n):
    if edges is not None:
        return np.asarray(edges, dtype=float)
    labels = equal_count_bins(values, n)
    lo = [float(values[labels == k].min()) for k in range(n)]
    return np.array(lo + [float(values.max())])


def cmd_trajectories(cfg: dict, out: Output) -> None:
    ds = _dataset(cfg, need_paths=True)
    est = cfg["estimation"]
    eta_edges = _edges_or_quantiles(ds.eta, est["eta_edges"], est["n_eta_bins"])
    f_edges = _edges_or_quantiles(ds.duration_f, est["f_edges"], est["n_f_bins"])
    eta_range = (float(eta_edges[-2]), float(eta_edges[-1]))  # top eta bin
    curves = trajectory_curves(ds.paths, ds.eta, eta_range, f_edges, est["n_points"])
    rows, markers = [], []
    for c in curves:
        for v, y, se, n in zip(c.v, c.impact, c.se, c.count):
            rows.append((c.f_range[0], c.f_range[1], v, y, se, n))
        markers.append((c.f_range[0], c.f_range[1], c.marker_f, c.marker_impact, c.n_orders))
    out.table("trajectories", ("f_lo", "f_hi", "v", "impact", "se", "count"), rows)
    out.table("markers", ("f_lo", "f_hi", "F_mean", "temporary_mean", "n_orders"), markers)


def cmd_decay(cfg: dict, out: Output) -> None:
    ds = _dataset(cfg, need_paths=True)
    est = cfg["estimation"]
    eta_edges = _edges_or_quantiles(ds.eta, est["eta_edges"], est["n_eta_bins"])
    f_edges = _edges_or_quantiles(ds.duration_f, est["f_edges"], est["n_f_bins"])
    curves = decay_curves(ds.paths, ds.eta, eta_edges, f_edges, aggregate=est["aggregate"])
    rows = []
    for c in curves:
        for z, y, se, n in zip(c.z_grid, c.i_ren, c.se, c.count):
            rows.append((c.eta_range[0], c.eta_range[1], c.f_range[0], c.f_range[1], z, y, se, n, c.n_excluded))
    out.table("decay", ("eta_lo", "eta_hi", "f_lo", "f_hi", "z", "i_ren", "se", "count", "n_excluded"), rows)


def cmd_overlap(cfg: dict, out: Output) -> None:
    inp = cfg["input"]
    if inp["metaorders"]:
        res = read_metaorders_csv(inp["metaorders"])
        _report_diagnostics(res.diagnostics)
        orders = res.items
    else:
        orders = [o.order for o in generate_population(_population(cfg))]
    rows = overlap_stats(orders, cfg["estimation"]["horizon_multiple"], cfg["estimation"]["duration_bins"])
    out.table("overlap", ("duration_lo", "duration_hi", "count", "mean_overlaps", "same_sign_fraction",
                          "opposite_sign_fraction"),
              [(r.duration_range[0], r.duration_range[1], r.count, r.mean_overlaps, r.same_sign_fraction,
                r.opposite_sign_fraction) for r in rows])


def cmd_book_invert(cfg: dict, out: Output) -> None:
    b = cfg["book"]
    p = BookParams(b["y_norm"], b["b"], b["n"])
    pi = np.geomspace(b["pi_min"], min(b["pi_max"], p.capacity), b["n_points"])
    impact = invert_impact(p, pi)
    cols = ["pi", "impact"]
    data = [pi, impact]
    if p.n == 0:
        cols += ["log_closed_form", "log1p_form"]
        data += [impact_log_closed(p.y_norm, p.b, pi), np.log1p(p.y_norm * p.c * pi) / p.b]
    out.table("book_impact", cols, zip(*data))


_USES_MODEL = {"generate", "fit-curve", "fit-surface", "residuals", "local-exponents", "trajectories", "decay"}

COMMANDS: dict[str, tuple[Callable, str]] = {
    "simulate": (cmd_simulate, "model trajectories (propagator or Almgren-Chriss)"),
    "generate": (cmd_generate, "synthetic minute bars and metaorders"),
    "ingest": (cmd_ingest, "filter metaorders against bars and measure impacts"),
    "fit-curve": (cmd_fit_curve, "binned impact curve and family fits"),
    "fit-surface": (cmd_fit_surface, "impact surface over (eta, F) and its fit"),
    "residuals": (cmd_residuals, "standardised residuals of the surface fit"),
    "local-exponents": (cmd_local_exponents, "local power-law exponents over the surface"),
    "trajectories": (cmd_trajectories, "average immediate impact per duration bin"),
    "decay": (cmd_decay, "normalised post-execution impact"),
    "overlap": (cmd_overlap, "concurrent-order counts and sign agreement"),
    "book-invert": (cmd_book_invert, "impact from a latent order book profile"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="impactlab", description="Metaorder impact measurement and models.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--seed", type=int, help="random seed")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--format", choices=("csv", "json"), help="table format")
        sp.add_argument("--preset", choices=sorted(PRESETS), help="synthetic generator preset")
        sp.add_argument("--metaorders", help="metaorder CSV")
        sp.add_argument("--bars", help="directory of <SYMBOL>.csv minute-bar files")
        sp.add_argument("--whitelist", help="symbol whitelist file")
        sp.add_argument("--dataset", help="dataset table written by ingest")
        sp.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config field (value parsed as JSON)")
    return parser


def resolve_config(args) -> dict:
    raw = load_config(args.config) if args.config else {}
    for flag, key in (("seed", "seed"), ("out", "out"), ("format", "format")):
        if getattr(args, flag) is not None:
            raw[key] = getattr(args, flag)
    for flag, (sec, key) in {
        "preset": ("model", "preset"),
        "metaorders": ("input", "metaorders"),
        "bars": ("input", "bars"),
        "dataset": ("input", "dataset"),
        "whitelist": ("filters", "whitelist"),
    }.items():
        if getattr(args, flag) is not None:
            raw.setdefault(sec, {})[key] = getattr(args, flag)
    for assignment in args.set:
        apply_override(raw, assignment)
    return validate(raw)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    func = COMMANDS[args.command][0]
    out = Output(cfg, args.command)
    try:
        func(cfg, out)
    except Exception as exc:  # any module error: report, clean up, non-zero exit
        out.discard()
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    out.commit()
    return 0


if __name__ == "__main__":
    sys.exit(main())
