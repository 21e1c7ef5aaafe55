"""Physical quantities written as ``"<number> <unit>"`` strings in scenario files."""

import math
import re

from ..errors import ConfigurationError

TWO_PI = 2.0 * math.pi

# dimension -> unit -> factor to SI
UNITS = {
    "field": {"T": 1.0, "mT": 1e-3, "uT": 1e-6, "G": 1e-4},
    "gradient": {"T/m": 1.0, "mT/m": 1e-3, "uT/m": 1e-6, "G/cm": 1e-2},
    "length": {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9, "ps": 1e-12},
    "angular_frequency": {"rad/s": 1.0, "Hz": TWO_PI, "kHz": TWO_PI * 1e3,
                          "MHz": TWO_PI * 1e6},
    "angle": {"rad": 1.0, "deg": math.pi / 180.0, "pi": math.pi},
    "gyromagnetic": {"rad/s/T": 1.0, "Hz/T": TWO_PI, "MHz/T": TWO_PI * 1e6},
    "temperature": {"K": 1.0},
}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+]?inf)\s*(\S+)\s*$")


def parse_quantity(text, dimension):
    """Convert ``"2.5 ms"`` style text to an SI float for ``dimension``.

    Bare numbers are rejected: every physical quantity names its unit.
    ``inf`` is accepted (e.g. ``"inf s"`` for an unrelaxing T1).
    """
    table = UNITS[dimension]
    if not isinstance(text, str):
        raise ConfigurationError(
            f"expected a {dimension} with explicit unit ({', '.join(table)}), got {text!r}")
    m = _QUANTITY.match(text)
    if not m:
        raise ConfigurationError(f"cannot parse {dimension} quantity {text!r}")
    value, unit = m.groups()
    if unit not in table:
        raise ConfigurationError(
            f"unit {unit!r} is not a {dimension} unit; use one of {', '.join(table)}")
    return float(value) * table[unit]
