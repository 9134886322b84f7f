"""Deterministic JSON/CSV emission.

All floats are written with 17 significant digits, lines end with LF, output
is ASCII, and dict key order is preserved as written by the caller; the same
object therefore always serializes to the same bytes, which is what the
cross-worker determinism guarantee rests on.
"""

from __future__ import annotations

import math

import numpy as np


def format_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return f"{x:.17g}"


def _write_json(obj, out: list[str]) -> None:
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_float(float(obj)))
    elif isinstance(obj, str):
        escaped = obj.replace("\\", "\\\\").replace('"', '\\"')
        escaped = "".join(
            c if 32 <= ord(c) < 127 else f"\\u{ord(c):04x}" for c in escaped
        )
        out.append(f'"{escaped}"')
    elif isinstance(obj, dict):
        out.append("{")
        for i, (key, val) in enumerate(obj.items()):
            if i:
                out.append(",")
            _write_json(str(key), out)
            out.append(":")
            _write_json(val, out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        out.append("[")
        for i, val in enumerate(obj):
            if i:
                out.append(",")
            _write_json(val, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj)!r}")


def to_json_bytes(obj) -> bytes:
    """Serialize to compact deterministic JSON with a trailing newline."""
    out: list[str] = []
    _write_json(obj, out)
    return ("".join(out) + "\n").encode("ascii")


def csv_bytes(header: str, rows) -> bytes:
    """CSV with one header line; row cells are formatted via format_float for
    floats and str() otherwise."""
    lines = [header]
    for row in rows:
        cells = [
            format_float(c) if isinstance(c, (float, np.floating)) else str(c)
            for c in row
        ]
        lines.append(",".join(cells))
    return ("\n".join(lines) + "\n").encode("ascii")
