"""Canonical JSON emission.

All documents written by the package format floats with 17 significant
digits and carry the schema version field, so re-runs with the same inputs
produce byte-identical files.
"""

from __future__ import annotations

import math
from typing import Any

SCHEMA_VERSION = 1


def _fmt_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        raise ValueError("non-finite float in canonical document: %r" % x)
    if x == int(x) and abs(x) < 1e16:
        return "%.1f" % x
    return "%.17g" % x


def dumps_canonical(obj: Any, indent: int | None = None) -> str:
    """Serialize nested dict/list/scalar structures deterministically."""
    parts: list[str] = []
    _emit(obj, parts, indent, 0)
    return "".join(parts)


def _emit(obj: Any, parts: list[str], indent: int | None, depth: int) -> None:
    nl = "" if indent is None else "\n" + " " * (indent * (depth + 1))
    nl_close = "" if indent is None else "\n" + " " * (indent * depth)
    if obj is None:
        parts.append("null")
    elif obj is True:
        parts.append("true")
    elif obj is False:
        parts.append("false")
    elif isinstance(obj, int):
        parts.append(str(obj))
    elif isinstance(obj, float):
        parts.append(_fmt_float(obj))
    elif isinstance(obj, str):
        parts.append(_escape(obj))
    elif isinstance(obj, dict):
        if not obj:
            parts.append("{}")
            return
        parts.append("{")
        for i, (key, val) in enumerate(obj.items()):
            if not isinstance(key, str):
                raise TypeError("document keys must be strings")
            if i:
                parts.append(",")
            parts.append(nl)
            parts.append(_escape(key))
            parts.append(": " if indent is not None else ":")
            _emit(val, parts, indent, depth + 1)
        parts.append(nl_close)
        parts.append("}")
    elif isinstance(obj, (list, tuple)):
        if not len(obj):
            parts.append("[]")
            return
        parts.append("[")
        for i, val in enumerate(obj):
            if i:
                parts.append(",")
            parts.append(nl)
            _emit(val, parts, indent, depth + 1)
        parts.append(nl_close)
        parts.append("]")
    else:
        # numpy scalars land here; collapse them to python scalars
        item = getattr(obj, "item", None)
        if item is not None:
            _emit(item(), parts, indent, depth)
        else:
            raise TypeError("cannot serialize %r" % type(obj))


_ESCAPES = {
    '"': '\\"',
    "\\": "\\\\",
    "\n": "\\n",
    "\r": "\\r",
    "\t": "\\t",
    "\b": "\\b",
    "\f": "\\f",
}


def _escape(s: str) -> str:
    out = ['"']
    for ch in s:
        if ch in _ESCAPES:
            out.append(_ESCAPES[ch])
        elif ord(ch) < 0x20:
            out.append("\\u%04x" % ord(ch))
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)
