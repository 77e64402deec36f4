"""Long-format CSV reading and writing of curves, and time normalisation.

The curve file has the header ``curve_id,component,time,value`` with
1-based component indices. Rows of one curve need not be contiguous; the
order of first appearance fixes the curve order.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .errors import IngestionError
from .funbasis import CurveSet

__all__ = ["CURVE_COLUMNS", "ingest_csv", "write_curves_csv", "normalize_time"]

CURVE_COLUMNS = ("curve_id", "component", "time", "value")


def _number(text, row, column):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise IngestionError(f"row {row}: column {column!r} is not numeric: {text!r}", row=row) from None
    if not math.isfinite(value):
        raise IngestionError(f"row {row}: column {column!r} is not finite: {text!r}", row=row)
    return value


def ingest_csv(path, domain=None) -> CurveSet:
    """Read a long-format curve file.

    ``domain`` defaults to the smallest interval containing every time stamp.

    Raises
    ------
    IngestionError
        On missing columns, non-numeric cells, or curves whose component sets
        disagree. The message names the offending row or curve.
    """
    path = Path(path)
    data = {}
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in CURVE_COLUMNS if c not in header]
        if missing:
            raise IngestionError(f"{path}: missing columns {missing}", row=1)
        for row_no, row in enumerate(reader, start=2):
            cid = row["curve_id"]
            if cid is None or cid == "":
                raise IngestionError(f"row {row_no}: empty curve_id", row=row_no)
            comp_text = row["component"]
            try:
                comp = int(comp_text)
            except (TypeError, ValueError):
                raise IngestionError(f"row {row_no}: component must be an integer, got {comp_text!r}", row=row_no) from None
            if comp < 1:
                raise IngestionError(f"row {row_no}: component indices are 1-based, got {comp}", row=row_no)
            t = _number(row["time"], row_no, "time")
            v = _number(row["value"], row_no, "value")
            data.setdefault(cid, {}).setdefault(comp, ([], []))
            data[cid][comp][0].append(t)
            data[cid][comp][1].append(v)
    if not data:
        raise IngestionError(f"{path}: no data rows")

    p = max(max(comps) for comps in data.values())
    ids, times, values = [], [], []
    for cid, comps in data.items():
        if sorted(comps) != list(range(1, p + 1)):
            absent = sorted(set(range(1, p + 1)) - set(comps))
            raise IngestionError(f"curve {cid!r} is missing component(s) {absent} of {p}")
        ts, vs = [], []
        for j in range(1, p + 1):
            t = np.array(comps[j][0])
            v = np.array(comps[j][1])
            if len(t) < 2:
                raise IngestionError(f"curve {cid!r} component {j} has fewer than 2 observations")
            order = np.argsort(t, kind="stable")
            ts.append(t[order])
            vs.append(v[order])
        ids.append(cid)
        times.append(ts)
        values.append(vs)
    if domain is None:
        lo = min(float(t.min()) for ts in times for t in ts)
        hi = max(float(t.max()) for ts in times for t in ts)
        domain = (lo, hi)
    return CurveSet(ids, times, values, tuple(domain))


def write_curves_csv(curves: CurveSet, path) -> None:
    """Write curves in long format with round-trip-exact float formatting."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CURVE_COLUMNS)
        for cid, ts, vs in zip(curves.ids, curves.times, curves.values):
            for j, (t, v) in enumerate(zip(ts, vs), start=1):
                for ti, vi in zip(t, v):
                    w.writerow((cid, j, repr(float(ti)), repr(float(vi))))


def normalize_time(curves: CurveSet) -> CurveSet:
    """Rescale each curve's time stamps affinely onto [0, 1].

    The start and end of a curve are taken over all its components.
    """
    times = []
    for cid, ts in zip(curves.ids, curves.times):
        lo = min(float(np.min(t)) for t in ts)
        hi = max(float(np.max(t)) for t in ts)
        if not hi > lo:
            raise IngestionError(f"curve {cid!r} has constant time {lo}; cannot normalise")
        times.append([(np.asarray(t, dtype=float) - lo) / (hi - lo) for t in ts])
    values = [[np.array(v, dtype=float) for v in vs] for vs in curves.values]
    return CurveSet(list(curves.ids), times, values, (0.0, 1.0))
