"""Tropical semiring helpers.

Weights are plain Python floats: ``plus`` is ``min``, ``times`` is ``+``,
``ZERO`` (the additive identity) is ``+inf`` and ``ONE`` is ``0.0``.
"""

import math

ZERO = math.inf
ONE = 0.0

# tolerance used for approximate weight equality
DELTA = 1e-9


def plus(a, b):
    return a if a <= b else b


def times(a, b):
    return a + b


def is_zero(w):
    return w == math.inf


def check(w):
    """Return ``w`` as a float, rejecting NaN."""
    w = float(w)
    if math.isnan(w):
        raise ValueError("tropical weight cannot be NaN")
    return w


def approx_equal(a, b, delta=DELTA):
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= delta


def quantize(w, delta=1e-7):
    """Hashable key for a weight; used to merge states whose residuals agree."""
    if math.isinf(w):
        return w
    return round(w / delta)
