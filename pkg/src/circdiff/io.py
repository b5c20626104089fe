"""CSV / JSON readers and writers used by the command-line tools.

Input formats (header row required):

* angle series - ``time,angle``; time is a number or an ISO-8601
  date/datetime (converted to days since the first row); angle in radians or
  degrees per the caller's ``units``.
* price series - ``date,price1,price2`` with ISO-8601 dates and positive
  prices.

Every error names the 1-based line of the offending row.
"""

from __future__ import annotations

import csv
import json
import math
from datetime import date, datetime
from pathlib import Path

import numpy as np

from .errors import DataError

SCHEMA_VERSION = "1.0"


def _rows(path):
    try:
        fh = open(Path(path), newline="")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError("file is empty", line=1)
        header = [h.strip() for h in header]
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            yield header, lineno, [c.strip() for c in row]


def _parse_time(text: str):
    try:
        return float(text), "numeric"
    except ValueError:
        pass
    try:
        return datetime.fromisoformat(text), "datetime"
    except ValueError:
        raise ValueError(f"unparseable timestamp {text!r}") from None


def _check_width(row, width, lineno):
    if len(row) != width or any(c == "" for c in row):
        raise DataError(f"expected {width} non-empty cells, got {row}", line=lineno)


def read_angle_series(path, units: str = "radians"):
    """Return (times, angles_in_radians, labels).

    Numeric timestamps are used as given; ISO timestamps become days since
    the first row. ``labels`` holds the raw timestamp strings.
    """
    if units not in ("radians", "degrees"):
        raise DataError(f"unknown units {units!r}")
    times, angles, labels = [], [], []
    kind = None
    for header, lineno, row in _rows(path):
        _check_width(row, 2, lineno)
        try:
            t, k = _parse_time(row[0])
        except ValueError as exc:
            raise DataError(str(exc), line=lineno) from None
        if kind is None:
            kind = k
        elif k != kind:
            raise DataError("mixed numeric and date timestamps", line=lineno)
        try:
            a = float(row[1])
        except ValueError:
            raise DataError(f"angle {row[1]!r} is not a number", line=lineno) from None
        if not math.isfinite(a):
            raise DataError("angle is not finite", line=lineno)
        if times and not _later(t, times[-1]):
            raise DataError("timestamps must be strictly increasing", line=lineno)
        times.append(t)
        angles.append(a)
        labels.append(row[0])
    if len(times) < 2:
        raise DataError("need at least two observations")
    if kind == "datetime":
        t0 = times[0]
        tt = np.array([(t - t0).total_seconds() / 86400.0 for t in times])
    else:
        tt = np.array(times, dtype=float)
    a = np.array(angles, dtype=float)
    if units == "degrees":
        a = np.deg2rad(a)
    return tt, a, labels


def _later(a, b) -> bool:
    try:
        return a > b
    except TypeError:
        return False


def write_angle_series(path, times, angles, labels=None) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "angle"])
        for i, (t, a) in enumerate(zip(times, angles)):
            w.writerow([labels[i] if labels is not None else repr(float(t)), repr(float(a))])


def _parse_date(text: str):
    try:
        return date.fromisoformat(text)
    except ValueError:
        return datetime.fromisoformat(text)


def read_price_series(path):
    """Return (dates, prices1, prices2) from a ``date,price1,price2`` file."""
    dates, p1, p2 = [], [], []
    for header, lineno, row in _rows(path):
        _check_width(row, 3, lineno)
        try:
            d = _parse_date(row[0])
        except ValueError:
            raise DataError(f"bad ISO-8601 date {row[0]!r}", line=lineno) from None
        try:
            a, b = float(row[1]), float(row[2])
        except ValueError:
            raise DataError(f"non-numeric price in {row[1:]}", line=lineno) from None
        if not (a > 0 and b > 0 and math.isfinite(a) and math.isfinite(b)):
            raise DataError("prices must be positive and finite", line=lineno)
        if dates and not _later(d, dates[-1]):
            raise DataError("dates must be strictly increasing", line=lineno)
        dates.append(d)
        p1.append(a)
        p2.append(b)
    if len(dates) < 2:
        raise DataError("need at least two rows")
    return dates, np.array(p1), np.array(p2)


def read_single_price_series(path):
    """``date,price`` file, for aligning two separately stored legs."""
    out = {}
    last = None
    for header, lineno, row in _rows(path):
        _check_width(row, 2, lineno)
        try:
            d = _parse_date(row[0])
            v = float(row[1])
        except ValueError:
            raise DataError(f"bad row {row}", line=lineno) from None
        if not (v > 0 and math.isfinite(v)):
            raise DataError("prices must be positive and finite", line=lineno)
        if last is not None and not _later(d, last):
            raise DataError("dates must be strictly increasing", line=lineno)
        last = d
        out[d] = v
    return out


def inner_join(series1: dict, series2: dict):
    """Keep only dates present in both legs (e.g. different market holidays)."""
    common = sorted(set(series1) & set(series2))
    if len(common) < 2:
        raise DataError("fewer than two common dates between the two series")
    return common, np.array([series1[d] for d in common]), np.array([series2[d] for d in common])


def write_price_series(path, dates, p1, p2) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "price1", "price2"])
        for d, a, b in zip(dates, p1, p2):
            w.writerow([d.isoformat() if hasattr(d, "isoformat") else d, repr(float(a)), repr(float(b))])


def write_bands_csv(path, times, rho_hat, lower=None, upper=None) -> None:
    """Columns time, rho_hat, lower, upper (bounds blank when absent)."""
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "rho_hat", "lower", "upper"])
        for i, t in enumerate(times):
            t = t.isoformat() if hasattr(t, "isoformat") else repr(float(t))
            lo = "" if lower is None else repr(float(lower[i]))
            hi = "" if upper is None else repr(float(upper[i]))
            w.writerow([t, repr(float(rho_hat[i])), lo, hi])


def read_table_csv(path) -> dict:
    """Generic reader for the tables this package writes.

    Returns a dict column -> list; cells that parse as floats are converted.
    """
    cols: dict[str, list] = {}
    header_seen = None
    for header, lineno, row in _rows(path):
        header_seen = header
        if len(row) > len(header):
            raise DataError("more cells than header columns", line=lineno)
        row = row + [""] * (len(header) - len(row))
        for name, cell in zip(header, row):
            try:
                val = float(cell)
            except ValueError:
                val = cell
            cols.setdefault(name, []).append(val)
    if header_seen is None:
        raise DataError("table has no data rows")
    return cols


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (date, datetime)):
        return obj.isoformat()
    return obj


def write_json(path, kind: str, payload: dict) -> None:
    doc = {"schema_version": SCHEMA_VERSION, "kind": kind, **_jsonable(payload)}
    with open(Path(path), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=False)
        fh.write("\n")


def read_json(path) -> dict:
    with open(Path(path)) as fh:
        doc = json.load(fh)
    if "schema_version" not in doc:
        raise DataError("missing schema_version")
    return doc
