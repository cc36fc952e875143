"""Canonical JSON rendering with 17-significant-digit doubles.

Stdlib json cannot control float formatting, and the wire/file formats in
this package require deterministic byte-stable output with exact double
round trips, so documents are rendered by hand: compact separators, keys in
insertion order, floats via format(x, '.17g').
"""

import json
import math

import numpy as np


def format_float(x):
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot render non-finite value {x!r}")
    return format(x, ".17g")


def render(obj):
    if isinstance(obj, str):
        return json.dumps(obj, separators=(",", ":"))
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj)
    if isinstance(obj, np.ndarray):
        return render(obj.tolist())
    if isinstance(obj, dict):
        items = (f"{render(str(k))}:{render(v)}" for k, v in obj.items())
        return "{" + ",".join(items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(render(v) for v in obj) + "]"
    raise TypeError(f"cannot render {type(obj).__name__} as JSON")
