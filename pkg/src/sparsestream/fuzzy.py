"""Membership functions and the uncertainty-driven significance threshold.

All membership functions accept scalars or arrays; scalars come back as
``float``.  A zero-width ramp behaves as a step whose value at the peak
point is 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class TrapezoidParams:
    a: float = 0.0
    b: float = 0.5
    c: float = 0.9
    d: float = 1.0

    def __post_init__(self):
        if not (self.a <= self.b <= self.c <= self.d):
            raise ValidationError(
                f"trapezoid needs a <= b <= c <= d, got {(self.a, self.b, self.c, self.d)}"
            )

    @classmethod
    def parse(cls, text: str) -> "TrapezoidParams":
        parts = [float(p) for p in text.split(",")]
        if len(parts) != 4:
            raise ValidationError(f"expected four comma-separated values, got {text!r}")
        return cls(*parts)


@dataclass(frozen=True)
class AlphaBand:
    alpha_min: float = 0.01
    alpha_max: float = 0.1

    def __post_init__(self):
        if not (0.0 < self.alpha_min < self.alpha_max < 1.0):
            raise ValidationError(
                f"need 0 < alpha_min < alpha_max < 1, got ({self.alpha_min}, {self.alpha_max})"
            )


def _out(x, values):
    return float(values) if np.ndim(x) == 0 else values


def _ramp(x, lo, hi):
    if hi == lo:
        return np.ones_like(x)
    return (x - lo) / (hi - lo)


def triangular_mf(x, a: float, b: float, c: float):
    """0 outside ``(a, c)``, rising linearly to 1 at ``b``, then falling."""
    if not (a <= b <= c):
        raise ValidationError(f"triangle needs a <= b <= c, got {(a, b, c)}")
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        rise = _ramp(x, a, b)
        fall = (x - c) / (b - c) if b != c else np.zeros_like(x)
    mu = np.select(
        [x == b, x <= a, x >= c, x <= b],
        [1.0, 0.0, 0.0, rise],
        default=fall,
    )
    return _out(x, mu)


def trapezoidal_mf(x, params: TrapezoidParams):
    """0 below ``a``, linear up to 1 on ``[a, b]``, 1 on ``(b, c)``, linear down on ``[c, d]``."""
    a, b, c, d = params.a, params.b, params.c, params.d
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        rise = _ramp(x, a, b)
        fall = (d - x) / (d - c) if d != c else np.ones_like(x)
    mu = np.select(
        [x < a, x <= b, x <= c, x < d],
        [0.0, rise, 1.0, fall],
        default=0.0,
    )
    return _out(x, mu)


def gaussian_mf(x, center: float, sigma: float):
    """``exp(-(x - center)**2 / (2 sigma**2))``."""
    if not sigma > 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    x = np.asarray(x, dtype=np.float64)
    return _out(x, np.exp(-((x - center) ** 2) / (2.0 * sigma**2)))


def fuzzy_alpha(u: float, band: AlphaBand = AlphaBand(), params: TrapezoidParams = TrapezoidParams()) -> float:
    """Significance threshold in ``[alpha_min, alpha_max]`` for block uncertainty ``u``.

    ``u`` is the fraction of missing cells in the block before completion.
    The threshold rises from ``alpha_min`` with the trapezoid's membership.
    """
    if not (0.0 <= u <= 1.0):
        raise ValidationError(f"uncertainty must lie in [0, 1], got {u}")
    return band.alpha_min + (band.alpha_max - band.alpha_min) * trapezoidal_mf(u, params)
