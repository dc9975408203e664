"""Line-oriented structured reports.

One record per line, ``key=value`` fields separated by single spaces,
in insertion order.  Result records go to stdout and are byte-stable
for fixed inputs and settings; wall-clock timings go to stderr so the
stdout stream stays diffable.
"""

from __future__ import annotations

import hashlib
import sys
from fractions import Fraction


def format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, complex):
        return f"{v.real!r}{'+' if v.imag >= 0 else '-'}{abs(v.imag)!r}j"
    if isinstance(v, Fraction):
        return str(v)
    return str(v)


def emit(record, out=None, **fields):
    """Write one record line; returns the line."""
    parts = [f"record={record}"]
    for key, value in fields.items():
        parts.append(f"{key}={format_value(value)}")
    line = " ".join(parts)
    print(line, file=out if out is not None else sys.stdout)
    return line


def emit_timing(record, seconds):
    print(f"timing record={record} seconds={seconds:.3f}", file=sys.stderr)


def digest(data):
    """Short content digest for input echoing."""
    if isinstance(data, str):
        data = data.encode()
    return hashlib.sha256(data).hexdigest()[:12]
