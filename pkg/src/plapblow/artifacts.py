"""Deterministic output files: CSV tables, the JSON manifest, a gnuplot script.

Files are written to a temporary sibling and renamed into place.  Reals are
formatted with 17 significant digits; lines end in LF.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

__all__ = ["fmt", "write_text", "write_csv", "write_json", "jsonable", "plot_script"]


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path, header, rows) -> Path:
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    return write_text(path, "\n".join(lines) + "\n")


def jsonable(obj):
    """Plain JSON types; non-finite reals become the strings ``inf``/``-inf``/``nan``."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else fmt(x)
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    return obj


def write_json(path, payload: dict) -> Path:
    text = json.dumps(jsonable(payload), indent=2, allow_nan=False, ensure_ascii=True)
    return write_text(path, text + "\n")


def plot_script(field_csv: str, title: str) -> str:
    """gnuplot script: log-log plot of the computed field against the analytic profile."""
    return (
        "set datafile separator ','\n"
        "set logscale xy\n"
        "set xlabel 'distance to boundary d'\n"
        "set ylabel 'u'\n"
        f"set title '{title}'\n"
        "set key top right\n"
        f"plot '{field_csv}' using 2:3 every ::1 with points pt 7 ps 0.3 title 'computed', \\\n"
        f"     '{field_csv}' using 2:4 every ::1 with lines lw 2 title 'A d^-alpha'\n"
        "pause -1\n"
    )
