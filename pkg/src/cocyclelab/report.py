"""Deterministic CSV output."""
from __future__ import annotations

import csv
import io
import math
from numbers import Integral, Real
from pathlib import Path

from . import __version__


def format_value(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if hasattr(v, "item") and not isinstance(v, (str, bytes)):
        v = v.item()
        if isinstance(v, bool):
            return "true" if v else "false"
    if isinstance(v, Integral):
        return str(int(v))
    if isinstance(v, Real):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def columns_of(rows):
    cols = []
    seen = set()
    for r in rows:
        for k in r:
            if k not in seen:
                seen.add(k)
                cols.append(k)
    return cols


def render_csv(rows, columns=None, provenance=None):
    """CSV text: optional '# ...' provenance line, header, one line per row."""
    rows = list(rows)
    cols = list(columns) if columns is not None else columns_of(rows)
    buf = io.StringIO()
    if provenance:
        buf.write("# " + " ".join(f"{k}={v}" for k, v in provenance.items()) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([format_value(r.get(c)) for c in cols])
    return buf.getvalue()


def emit_csv(rows, path, columns=None, provenance=None):
    """Write rows (mappings) to path; columns default to first-seen key order."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(render_csv(rows, columns, provenance))
    return p


def provenance(config_digest, command):
    return {"tool": "cocyclelab", "version": __version__, "config": config_digest, "command": command}
