"""CSV and JSON writers with a byte-stable layout."""

from __future__ import annotations

import csv
import io
import json
import sys
from pathlib import Path

import numpy as np


def fmt(value) -> str:
    """Numbers with 17 significant digits; ints and strings as is."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if value is None:
        return ""
    return str(value)


def _plain(value):
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    return value


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(row[h]) for h in header])
    return buf.getvalue()


def render_json(meta: dict, rows) -> str:
    return json.dumps({"meta": _plain(meta), "rows": _plain(list(rows))}, indent=1, allow_nan=False) + "\n"


def emit(text: str, path=None) -> None:
    """Write ``text`` to ``path`` (LF endings) or to stdout."""
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def write_report(fmt_name: str, header, rows, meta: dict, path=None) -> None:
    if fmt_name == "json":
        emit(render_json(meta, [{h: r[h] for h in header} for r in rows]), path)
    else:
        emit(render_csv(header, rows), path)
