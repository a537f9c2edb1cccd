"""CSV/JSON emission with atomic file replacement."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from lattice_addressing.stirap import FidelityCurve

CURVE_COLUMNS = ("omega_over_gamma", "fidelity_initial", "fidelity_target", "leakage")


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def curve_to_csv(curve: FidelityCurve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_COLUMNS)
    for row in curve.rows():
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def curve_to_json(curve: FidelityCurve) -> str:
    data = dict(zip(CURVE_COLUMNS, (curve.omega, curve.fidelity_initial,
                                    curve.fidelity_target, curve.leakage)))
    data["crossing"] = curve.crossing
    return to_json(data)


def read_curve_csv(text: str) -> FidelityCurve:
    rows = list(csv.reader(io.StringIO(text)))
    if tuple(rows[0]) != CURVE_COLUMNS:
        raise ValueError(f"unexpected header {rows[0]}")
    cols = list(zip(*[[float(v) for v in r] for r in rows[1:]])) or [[], [], [], []]
    return FidelityCurve(*(list(c) for c in cols))


def _default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def to_json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True, default=_default) + "\n"


def table_to_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def write_atomic(path: str | os.PathLike, text: str) -> None:
    """Write ``text`` to ``path`` through a temp file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_curve(curve: FidelityCurve, path: str | os.PathLike, fmt: str = "csv") -> None:
    if fmt == "csv":
        write_atomic(path, curve_to_csv(curve))
    elif fmt == "json":
        write_atomic(path, curve_to_json(curve))
    else:
        raise ValueError(f"unknown format {fmt!r}")
