"""Frequency strings with unit suffixes.

All internal quantities are angular frequencies in rad/s. Ordinary
frequencies given in Hz, kHz or MHz are multiplied by 2*pi on ingestion;
the ``rad`` suffix passes a raw angular value through unchanged.
"""

import math
import re

_SCALE = {
    "hz": 2.0 * math.pi,
    "khz": 2.0 * math.pi * 1e3,
    "mhz": 2.0 * math.pi * 1e6,
    "ghz": 2.0 * math.pi * 1e9,
    "rad": 1.0,
}

_PATTERN = re.compile(
    r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z]+)\s*$"
)


def parse_frequency(text):
    """Convert ``"1.0MHz"``, ``"184.3 Hz"`` or ``"12.5rad"`` to rad/s.

    Bare numbers are rejected on purpose: whether they mean Hz or rad/s is
    exactly the ambiguity the suffix removes.
    """
    if isinstance(text, (int, float)):
        raise ValueError(
            f"frequency {text!r} has no unit; use Hz, kHz, MHz or rad"
        )
    m = _PATTERN.match(str(text))
    if m is None:
        try:
            float(text)
        except ValueError:
            pass
        else:
            raise ValueError(
                f"frequency {text!r} has no unit; use Hz, kHz, MHz or rad"
            )
        raise ValueError(f"cannot parse frequency {text!r}")
    value, unit = float(m.group(1)), m.group(2).lower()
    if unit not in _SCALE:
        raise ValueError(
            f"unknown unit {m.group(2)!r} in {text!r}; "
            f"expected one of Hz, kHz, MHz, GHz, rad"
        )
    return value * _SCALE[unit]


def format_frequency(value):
    """Inverse of :func:`parse_frequency` using the lossless ``rad`` suffix."""
    return f"{float(value)!r}rad"
