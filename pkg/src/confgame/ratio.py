"""Exact rational parsing and formatting.

All quantities in this package are exact ``fractions.Fraction`` values; the
text form is ``"p/q"`` (or a bare integer).  Decimal literals are rejected so
that no value ever passes through floating point.
"""

from __future__ import annotations

from fractions import Fraction

ZERO = Fraction(0)
ONE = Fraction(1)


class RatioError(ValueError):
    pass


def parse_ratio(text: object) -> Fraction:
    """Parse an exact rational from a ``"p/q"`` or integer string."""
    if isinstance(text, bool) or not isinstance(text, str):
        raise RatioError(f"expected exact rational string 'p/q', got {text!r}")
    s = text.strip()
    try:
        if "/" in s:
            num, den = s.split("/", 1)
            return Fraction(int(num.strip()), int(den.strip()))
        return Fraction(int(s))
    except (ValueError, ZeroDivisionError) as exc:
        raise RatioError(
            f"invalid exact rational {text!r} (decimal literals are not accepted)"
        ) from exc


def format_ratio(value: Fraction) -> str:
    """Render a rational as ``"p/q"`` (or a bare integer when q == 1)."""
    q = Fraction(value)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"
