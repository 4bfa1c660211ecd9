"""Deterministic numeric/CSV formatting.

All CLI and file output goes through format_sig so golden files are byte
identical across runs and platforms: 6 significant digits, round half even
(CPython's correctly rounded float formatting), LF newlines.
"""

import math

SIG_DIGITS = 6


def format_sig(value, digits=SIG_DIGITS):
    """Render a number with a fixed count of significant digits."""
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, int):
        return str(value)
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if math.isnan(value):
        return "nan"
    if value == 0.0:
        return "0"  # normalizes -0.0
    return "{:.{p}g}".format(float(value), p=digits)


def csv_line(fields):
    return ",".join(format_sig(f) if not isinstance(f, str) else f for f in fields)


def csv_text(header, rows):
    """Join a header and row tuples into one LF-terminated CSV string."""
    lines = [csv_line(header)]
    lines.extend(csv_line(row) for row in rows)
    return "\n".join(lines) + "\n"
