"""Value model shared by the DSL, the world model, and the evaluator.

Values are exact: integers, rationals (written as decimals in source files),
symbols (bare identifiers), and booleans. There is no floating point anywhere,
so every test can assert equality.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Union

Value = Union[int, Fraction, str, bool]


class Unknown:
    """Sentinel for an attribute value the agent cannot currently observe."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNKNOWN"


UNKNOWN = Unknown()


class EvalTypeError(Exception):
    """Comparison or arithmetic over incompatible value classes."""


def is_numeric(v: Value) -> bool:
    # bool is an int subclass; treat it as its own class
    return isinstance(v, (int, Fraction)) and not isinstance(v, bool)


def value_class(v: Value) -> str:
    if isinstance(v, bool):
        return "boolean"
    if isinstance(v, (int, Fraction)):
        return "number"
    return "symbol"


def compare(op: str, left: Value, right: Value) -> bool:
    """Apply a comparison operator to two known values.

    Ordering operators and arithmetic require numbers; `=`/`!=` also accept
    symbol-symbol and boolean-boolean. Anything else is a type mismatch.
    """
    lc, rc = value_class(left), value_class(right)
    if op in ("=", "!="):
        if lc != rc:
            raise EvalTypeError(f"cannot compare {lc} with {rc}")
        return (left == right) if op == "=" else (left != right)
    if lc != "number" or rc != "number":
        raise EvalTypeError(f"operator {op} needs numbers, got {lc} and {rc}")
    if op == "<":
        return left < right
    if op == "<=":
        return left <= right
    if op == ">":
        return left > right
    if op == ">=":
        return left >= right
    raise ValueError(f"unknown comparison operator {op!r}")


def arith(op: str, left: Value, right: Value) -> Value:
    if not is_numeric(left) or not is_numeric(right):
        raise EvalTypeError(
            f"operator {op} needs numbers, got {value_class(left)} and {value_class(right)}"
        )
    if op == "+":
        result = left + right
    elif op == "-":
        result = left - right
    elif op == "*":
        result = left * right
    else:
        raise ValueError(f"unknown arithmetic operator {op!r}")
    return normalize(result)


def normalize(v: Value) -> Value:
    """Collapse integral Fractions to int so equal values have one form."""
    if isinstance(v, Fraction) and v.denominator == 1:
        return int(v)
    return v


def format_value(v: Value) -> str:
    """Deterministic textual form used by the pretty-printer and traces."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, Fraction):
        if v.denominator == 1:
            return str(v.numerator)
        # exact decimal when the denominator divides a power of ten
        den = v.denominator
        twos = fives = 0
        while den % 2 == 0:
            den //= 2
            twos += 1
        while den % 5 == 0:
            den //= 5
            fives += 1
        if den == 1:
            scale = 10 ** max(twos, fives)
            scaled = v.numerator * scale // v.denominator
            digits = max(twos, fives)
            sign = "-" if scaled < 0 else ""
            scaled = abs(scaled)
            whole, frac = divmod(scaled, 10**digits)
            return f"{sign}{whole}.{str(frac).zfill(digits)}"
        return f"{v.numerator}/{v.denominator}"
    return str(v)
