import math

import pytest

from skinrelax.units import format_frequency, parse_frequency


@pytest.mark.parametrize("text, value", [
    ("1.0MHz", 2 * math.pi * 1e6),
    ("184.3 Hz", 2 * math.pi * 184.3),
    ("20kHz", 2 * math.pi * 2e4),
    ("1e3hz", 2 * math.pi * 1e3),
    ("12.5rad", 12.5),
    ("-3rad", -3.0),
])
def test_parse(text, value):
    assert parse_frequency(text) == pytest.approx(value, rel=1e-15)


@pytest.mark.parametrize("text", ["3", 3.0, "3 furlongs", "MHz", ""])
def test_rejects(text):
    with pytest.raises(ValueError):
        parse_frequency(text)


@pytest.mark.parametrize("value", [0.1, 1157.9910521131978, 6.283185307179586e6, 1e-300])
def test_roundtrip_exact(value):
    assert parse_frequency(format_frequency(value)) == value
