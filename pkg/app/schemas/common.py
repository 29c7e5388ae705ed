"""Shared field types for report schemas."""

import math
from fractions import Fraction
from typing import Annotated, Any

from pydantic import BeforeValidator, PlainSerializer, WithJsonSchema


def _to_fraction(value: Any) -> Fraction:  # noqa: ANN401
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("A boolean is not a rational number")
    if isinstance(value, int | str):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(str(value))
    raise TypeError(f"Cannot read {value!r} as a rational number")


def format_rational(value: Fraction) -> str:
    """Render as ``num/den`` in lowest terms."""
    return f"{value.numerator}/{value.denominator}"


Rational = Annotated[
    Fraction,
    BeforeValidator(_to_fraction),
    PlainSerializer(format_rational, return_type=str),
    WithJsonSchema({"type": "string", "pattern": r"^-?\d+/\d+$", "examples": ["1/25"]}),
]


def degree_or_none(degree: float) -> int | None:
    """Degree as reported on the wire: None stands for the zero polynomial."""
    return None if degree == -math.inf else int(degree)
