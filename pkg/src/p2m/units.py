"""Unit-suffix parsing for configuration values.

All physical quantities are stored internally in SI base units (meters,
seconds, joules, bits/second). Configuration files may give them either as
plain numbers (already SI) or as strings with an SI-prefixed unit suffix,
e.g. "190nm", "0.5um", "12.34pJ", "1Gbps".
"""

from __future__ import annotations

import re

from .errors import ConfigError

_PREFIXES = {
    "f": 1e-15,
    "p": 1e-12,
    "n": 1e-9,
    "u": 1e-6,
    "µ": 1e-6,
    "m": 1e-3,
    "": 1.0,
    "k": 1e3,
    "M": 1e6,
    "G": 1e9,
    "T": 1e12,
}


def _table(base: str) -> dict[str, float]:
    return {prefix + base: scale for prefix, scale in _PREFIXES.items()}


# Per-dimension suffix tables keep single-letter collisions unambiguous:
# "m" is a meter in a length field and a milli- prefix in "ms".
SUFFIXES: dict[str, dict[str, float]] = {
    "length": _table("m"),
    "time": _table("s"),
    "energy": _table("J"),
    "rate": _table("bps"),
}

_QUANTITY_RE = re.compile(
    r"^\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*([A-Za-zµ]*)\s*$"
)


def parse_quantity(value, dimension: str, field: str = "value") -> float:
    """Parse a config value of the given dimension into SI base units.

    Numbers pass through unchanged; strings must carry a suffix valid for
    the dimension ("190nm" for length, "1Gbps" for rate, ...).
    """
    if isinstance(value, bool):
        raise ConfigError(f"{field}: expected a {dimension} quantity, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{field}: expected a number or unit string, got {type(value).__name__}")
    match = _QUANTITY_RE.match(value)
    if not match:
        raise ConfigError(f"{field}: cannot parse quantity {value!r}")
    number, suffix = match.groups()
    table = SUFFIXES[dimension]
    if suffix == "":
        raise ConfigError(
            f"{field}: quantity string {value!r} is missing a unit suffix "
            f"(write a bare number for SI base units)"
        )
    if suffix not in table:
        raise ConfigError(f"{field}: unknown {dimension} unit suffix in token {value!r}")
    return float(number) * table[suffix]


def parse_count(value, field: str = "value") -> int:
    """Parse an exact non-negative integer count."""
    if isinstance(value, bool):
        raise ConfigError(f"{field}: expected an integer count, got a boolean")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str):
        try:
            return int(value, 10)
        except ValueError:
            raise ConfigError(f"{field}: cannot parse count {value!r}") from None
    raise ConfigError(f"{field}: expected an integer count, got {value!r}")
