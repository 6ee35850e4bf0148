"""Flat key-value text documents.

All on-disk artifacts (problems, schedules, configs, full traces) share one
plain-text format: one `key = value` pair per line, `#` comments, UTF-8,
floats rendered with 17 significant digits so doubles round-trip exactly.
Vectors are space-separated on a single line; matrices carry an explicit
`<key>.shape` entry and row-major `<key>.data`.
"""

from __future__ import annotations

import numpy as np

__all__ = ["fmt", "dumps", "loads", "get_float", "get_int", "get_bool", "get_vector", "get_matrix"]


def fmt(x) -> str:
    """Render one scalar; floats get 17 significant digits."""
    if isinstance(x, bool) or isinstance(x, np.bool_):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _fmt_vector(v) -> str:
    return " ".join(format(float(t), ".17g") for t in np.asarray(v, dtype=float).ravel())


def dumps(pairs) -> str:
    """Serialize an ordered list of (key, value) pairs.

    1-D arrays become one vector line; 2-D arrays expand into
    `key.shape` and `key.data` lines. Scalars go through `fmt`.
    """
    lines = []
    for key, value in pairs:
        if isinstance(value, np.ndarray) and value.ndim == 2:
            lines.append(f"{key}.shape = {value.shape[0]} {value.shape[1]}")
            lines.append(f"{key}.data = {_fmt_vector(value)}")
        elif isinstance(value, np.ndarray) or isinstance(value, (list, tuple)):
            lines.append(f"{key} = {_fmt_vector(value)}")
        else:
            lines.append(f"{key} = {fmt(value)}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> dict:
    """Parse a document into an ordered {key: raw-string} dict.

    Duplicate keys and lines without `=` are errors; this format is the
    reproducibility record, so nothing is silently ignored.
    """
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key in out:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def get_float(doc: dict, key: str) -> float:
    return float(doc[key])


def get_int(doc: dict, key: str) -> int:
    return int(doc[key])


def get_bool(doc: dict, key: str) -> bool:
    value = doc[key].lower()
    if value not in ("true", "false"):
        raise ValueError(f"{key}: expected true/false, got {doc[key]!r}")
    return value == "true"


def get_vector(doc: dict, key: str) -> np.ndarray:
    text = doc[key]
    if not text:
        return np.zeros(0)
    return np.array([float(t) for t in text.split()], dtype=float)


def get_matrix(doc: dict, key: str) -> np.ndarray:
    rows, cols = (int(t) for t in doc[f"{key}.shape"].split())
    data = get_vector(doc, f"{key}.data")
    if data.size != rows * cols:
        raise ValueError(f"{key}: shape {rows}x{cols} does not match {data.size} entries")
    return data.reshape(rows, cols)
