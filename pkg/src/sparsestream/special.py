"""Tail probabilities for the normal and chi-square distributions."""

import math

_MAX_ITER = 10_000
_EPS = 1e-16
_TINY = 1e-300


def normal_two_sided_p(z: float) -> float:
    """``2 * (1 - Phi(|z|))`` evaluated as ``erfc(|z| / sqrt 2)`` to keep tail precision."""
    return math.erfc(abs(z) / math.sqrt(2.0))


def _gamma_p_series(a, x):
    # lower regularized gamma P(a, x) by power series; converges fast for x < a + 1
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_q_contfrac(a, x):
    # upper regularized gamma Q(a, x) by modified Lentz continued fraction; for x >= a + 1
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def gammaincc(a: float, x: float) -> float:
    """Upper regularized incomplete gamma function ``Q(a, x)``."""
    if a <= 0:
        raise ValueError(f"shape must be positive, got {a}")
    if x < 0:
        raise ValueError(f"x must be non-negative, got {x}")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_p_series(a, x)
    return _gamma_q_contfrac(a, x)


def chi2_sf(stat: float, dof: float) -> float:
    """Chi-square upper tail ``P(X >= stat)``."""
    if stat <= 0:
        return 1.0
    return min(1.0, max(0.0, gammaincc(dof / 2.0, stat / 2.0)))
