"""CSV formats for minute bars, metaorders and result tables.

Floats are written with ``repr`` so a write/read round trip is lossless.
Lines starting with ``#`` are comments; writers put the config hash there.
"""
from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import DayBars, Metaorder, MinuteBar

__all__ = [
    "BAR_HEADER",
    "ORDER_HEADER",
    "IngestError",
    "ParseResult",
    "config_hash",
    "format_value",
    "read_bars_csv",
    "read_bars_dir",
    "read_metaorders_csv",
    "read_table_csv",
    "read_whitelist",
    "write_bars_csv",
    "write_metaorders_csv",
    "write_table_csv",
]

BAR_HEADER = ("date", "time", "open", "high", "low", "close", "volume")
ORDER_HEADER = ("symbol", "sign", "volume", "start", "end")
MAX_MALFORMED = 0.10


class IngestError(ValueError):
    pass


@dataclass
class ParseResult:
    items: list
    diagnostics: list = field(default_factory=list)  # "path:line: message"


def config_hash(config) -> str:
    """Short SHA-256 of the canonical JSON form of ``config``."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def _lines(path: Path):
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.startswith("#") or not line.strip():
                continue
            yield lineno, line


def _rows(path: Path, header: Sequence[str]):
    first = True
    for lineno, line in _lines(path):
        cells = next(csv.reader([line]))
        if first:
            first = False
            if tuple(c.strip() for c in cells) != tuple(header):
                raise IngestError(f"{path}:{lineno}: expected header {','.join(header)}")
            continue
        yield lineno, [c.strip() for c in cells]


def _check_malformed(path, n_ok: int, diags: list) -> None:
    total = n_ok + len(diags)
    if total and len(diags) > MAX_MALFORMED * total:
        raise IngestError(f"{path}: {len(diags)} of {total} rows malformed (limit 10%)\n" + "\n".join(diags[:20]))


def _write_comment(fh, comment: Optional[str]) -> None:
    if comment:
        for line in comment.splitlines():
            fh.write(f"# {line}\n")


def _hhmm(minute: int) -> str:
    return f"{minute // 60:02d}:{minute % 60:02d}"


def _parse_hhmm(text: str) -> int:
    hh, mm = text.split(":")
    if len(mm) != 2:
        raise ValueError(f"bad time {text!r}")
    return int(hh) * 60 + int(mm)


def write_bars_csv(path, days: Iterable[DayBars], comment: Optional[str] = None) -> None:
    with open(path, "w", newline="") as fh:
        _write_comment(fh, comment)
        fh.write(",".join(BAR_HEADER) + "\n")
        for day in days:
            iso = day.date.isoformat()
            for k in range(len(day)):
                fh.write(
                    ",".join(
                        [iso, _hhmm(int(day.time[k]))]
                        + [format_value(float(col[k])) for col in (day.open, day.high, day.low, day.close, day.volume)]
                    )
                    + "\n"
                )


def read_bars_csv(path) -> ParseResult:
    """Parse a bar file into one :class:`DayBars` per date.

    Malformed rows are skipped with a line-numbered diagnostic; more than
    10% malformed rows raises :class:`IngestError`.
    """
    path = Path(path)
    by_day: dict[dt.date, list[MinuteBar]] = {}
    diags: list[str] = []
    n_ok = 0
    for lineno, cells in _rows(path, BAR_HEADER):
        try:
            if len(cells) != len(BAR_HEADER):
                raise ValueError(f"expected {len(BAR_HEADER)} fields, got {len(cells)}")
            date = dt.date.fromisoformat(cells[0])
            bar = MinuteBar(date, _parse_hhmm(cells[1]), *(float(c) for c in cells[2:]))
        except ValueError as exc:
            diags.append(f"{path}:{lineno}: {exc}")
            continue
        by_day.setdefault(date, []).append(bar)
        n_ok += 1
    _check_malformed(path, n_ok, diags)
    days = []
    for date in sorted(by_day):
        bars = sorted(by_day[date], key=lambda b: b.time)
        try:
            days.append(DayBars.from_bars(bars))
        except ValueError as exc:
            diags.append(f"{path}: day {date}: {exc}")
    return ParseResult(days, diags)


def read_bars_dir(directory) -> ParseResult:
    """Read ``<SYMBOL>.csv`` files; items are ``((symbol, date), DayBars)`` pairs."""
    directory = Path(directory)
    if not directory.is_dir():
        raise IngestError(f"no-data: {directory} is not a directory")
    files = sorted(directory.glob("*.csv"))
    if not files:
        raise IngestError(f"no-data: no bar files in {directory}")
    items, diags = [], []
    for f in files:
        res = read_bars_csv(f)
        items.extend(((f.stem, d.date), d) for d in res.items)
        diags.extend(res.diagnostics)
    return ParseResult(items, diags)


def _iso_minutes(t: dt.datetime) -> str:
    if t.second == 0 and t.microsecond == 0:
        return t.isoformat(timespec="minutes")
    return t.isoformat()


def write_metaorders_csv(path, orders: Iterable[Metaorder], comment: Optional[str] = None) -> None:
    with open(path, "w", newline="") as fh:
        _write_comment(fh, comment)
        fh.write(",".join(ORDER_HEADER) + "\n")
        for o in orders:
            fh.write(
                ",".join(
                    [o.symbol, "+1" if o.sign > 0 else "-1", format_value(float(o.volume)),
                     _iso_minutes(o.start), _iso_minutes(o.end)]
                )
                + "\n"
            )


def read_metaorders_csv(path) -> ParseResult:
    path = Path(path)
    orders, diags = [], []
    for lineno, cells in _rows(path, ORDER_HEADER):
        try:
            if len(cells) != len(ORDER_HEADER):
                raise ValueError(f"expected {len(ORDER_HEADER)} fields, got {len(cells)}")
            sym, sign, vol, start, end = cells
            if sign not in ("+1", "-1", "1"):
                raise ValueError(f"sign must be +1 or -1, got {sign!r}")
            orders.append(
                Metaorder(sym, int(sign), float(vol), dt.datetime.fromisoformat(start), dt.datetime.fromisoformat(end))
            )
        except ValueError as exc:
            diags.append(f"{path}:{lineno}: {exc}")
    _check_malformed(path, len(orders), diags)
    return ParseResult(orders, diags)


def read_whitelist(path) -> frozenset:
    """One symbol per line; blank lines and ``#`` comments ignored."""
    out = set()
    for _, line in _lines(Path(path)):
        out.add(line.strip())
    return frozenset(out)


def write_table_csv(path, columns: Sequence[str], rows: Iterable[Sequence], comment: Optional[str] = None) -> None:
    with open(path, "w", newline="") as fh:
        _write_comment(fh, comment)
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")


def read_table_csv(path) -> tuple[list[str], list[list[str]]]:
    """Header and raw string rows of a result table, skipping comments."""
    header, rows = None, []
    for _, line in _lines(Path(path)):
        cells = next(csv.reader([line]))
        if header is None:
            header = [c.strip() for c in cells]
        else:
            rows.append(cells)
    if header is None:
        raise IngestError(f"{path}: empty table")
    return header, rows
