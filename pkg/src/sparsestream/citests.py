"""Conditional-independence tests: Fisher's z on partial correlation, and G².

Both return a :class:`CiResult`.  Constant inputs are treated as independent
(``p_value = 1``) and marked ``degenerate``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .special import chi2_sf, normal_two_sided_p

R_CLAMP = 1.0 - 1e-12
RIDGE = 1e-8
# inverse of a correlation matrix is trusted below this condition number
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class CiResult:
    p_value: float
    statistic: float
    dof: float
    degenerate: bool = False


def _as_conditioning(S, n) -> list[np.ndarray]:
    if S is None:
        return []
    if isinstance(S, np.ndarray):
        if S.ndim == 1:
            S = [S]
        elif S.shape[0] == n and S.ndim == 2 and S.shape[1] != n:
            S = list(S.T)
        else:
            S = list(S)
    out = [np.asarray(s, dtype=np.float64) for s in S]
    for s in out:
        if s.shape != (n,):
            raise ValidationError(f"conditioning vector of shape {s.shape}, expected ({n},)")
    return out


def _is_constant(v: np.ndarray) -> bool:
    scale = max(1.0, float(np.max(np.abs(v))))
    return float(np.ptp(v)) <= 1e-12 * scale


def _pearson(x, y):
    xc = x - x.mean()
    yc = y - y.mean()
    return float(np.dot(xc, yc) / math.sqrt(np.dot(xc, xc) * np.dot(yc, yc)))


def _partial_correlation(x, y, S):
    """Returns (r, degenerate) with r unclamped."""
    if _is_constant(x) or _is_constant(y):
        return 0.0, True
    # partialling out a constant is a no-op beyond centring, which correlation already does
    S = [s for s in S if not _is_constant(s)]
    if not S:
        return _pearson(x, y), False
    C = np.corrcoef(np.vstack([x, y, *S]))
    if np.linalg.cond(C) > MAX_CONDITION:
        C = C + RIDGE * np.eye(C.shape[0])
        if np.linalg.cond(C) > MAX_CONDITION:
            raise np.linalg.LinAlgError(
                "correlation matrix is singular even after ridge regularisation"
            )
    P = np.linalg.inv(C)
    return float(-P[0, 1] / math.sqrt(P[0, 0] * P[1, 1])), False


def _ordered(x, y):
    # fixed argument order makes the statistic exactly symmetric in (x, y)
    if x.tobytes() > y.tobytes():
        return y, x
    return x, y


def partial_correlation(x, y, S: Sequence = ()) -> float:
    """Partial correlation of ``x`` and ``y`` given the vectors in ``S``.

    With an empty ``S`` this is Pearson's r.  Otherwise it is read off the
    inverse of the joint correlation matrix of ``(x, y, *S)``.  The result
    is clamped to ``[-1 + 1e-12, 1 - 1e-12]``; a constant ``x`` or ``y``
    gives 0.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.shape[0]
    if y.shape != (n,) or x.ndim != 1:
        raise ValidationError(f"x and y must be vectors of equal length, got {x.shape}, {y.shape}")
    S = _as_conditioning(S, n)
    if n < len(S) + 4:
        raise ValidationError(f"need n >= |S| + 4, got n={n}, |S|={len(S)}")
    x, y = _ordered(x, y)
    r, _ = _partial_correlation(x, y, S)
    return min(R_CLAMP, max(-R_CLAMP, r))


def fisher_z_test(x, y, S: Sequence = (), n: int | None = None) -> CiResult:
    """Fisher's z test of ``x`` independent of ``y`` given ``S``.

    Parameters
    ----------
    x, y : array_like, shape (n,)
    S : sequence of array_like, shape (n,) each, or ndarray (n, k)
        Conditioning variables; empty for a marginal test.
    n : int, optional
        Sample size entering ``sqrt(n - |S| - 3)``; defaults to ``len(x)``.

    Returns
    -------
    CiResult
        ``statistic = sqrt(n - |S| - 3) * |atanh(r)|`` and the two-sided
        normal p-value. ``dof`` holds ``n - |S| - 3``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or y.shape != x.shape:
        raise ValidationError(f"x and y must be vectors of equal length, got {x.shape}, {y.shape}")
    S = _as_conditioning(S, x.shape[0])
    if n is None:
        n = x.shape[0]
    n_eff = n - len(S) - 3
    if n_eff <= 0:
        raise ValidationError(f"need n > |S| + 3, got n={n}, |S|={len(S)}")
    x, y = _ordered(x, y)
    r, degenerate = _partial_correlation(x, y, S)
    if degenerate:
        return CiResult(1.0, 0.0, float(n_eff), degenerate=True)
    r = min(R_CLAMP, max(-R_CLAMP, r))
    z = 0.5 * math.log((1.0 + r) / (1.0 - r))
    stat = math.sqrt(n_eff) * abs(z)
    return CiResult(normal_two_sided_p(stat), stat, float(n_eff))


def _codes(v) -> np.ndarray:
    _, inv = np.unique(np.asarray(v), return_inverse=True)
    return inv.reshape(-1)


def g2_statistic(table: np.ndarray) -> tuple[float, int]:
    """G² and dof of one contingency table (rows x, columns y).

    Empty rows and columns are dropped before counting degrees of freedom.
    """
    O = np.asarray(table, dtype=np.float64)
    O = O[O.sum(axis=1) > 0][:, O.sum(axis=0) > 0]
    total = O.sum()
    if total == 0:
        return 0.0, 0
    E = np.outer(O.sum(axis=1), O.sum(axis=0)) / total
    nz = O > 0
    g2 = 2.0 * float(np.sum(O[nz] * np.log(O[nz] / E[nz])))
    dof = (O.shape[0] - 1) * (O.shape[1] - 1)
    return max(g2, 0.0), dof


def g2_test(x, y, S: Sequence = ()) -> CiResult:
    """G² likelihood-ratio test of discrete ``x`` independent of ``y`` given ``S``.

    One contingency table is built per observed configuration of ``S``.
    Levels are counted within each stratum, so a stratum where ``x`` or
    ``y`` takes a single value adds nothing to the degrees of freedom.
    With zero total dof the result is ``p_value = 1``, marked degenerate.
    """
    xc = _codes(x)
    yc = _codes(y)
    n = xc.shape[0]
    if yc.shape[0] != n:
        raise ValidationError("x and y must have equal length")
    S = _as_conditioning(S, n) if len(S) else []
    if S:
        strata = np.unique(np.column_stack([_codes(s) for s in S]), axis=0, return_inverse=True)[1]
        strata = strata.reshape(-1)
    else:
        strata = np.zeros(n, dtype=np.int64)
    nx, ny = xc.max() + 1, yc.max() + 1
    g2, dof = 0.0, 0
    for s in range(strata.max() + 1):
        rows = strata == s
        table = np.zeros((nx, ny))
        np.add.at(table, (xc[rows], yc[rows]), 1.0)
        g, d = g2_statistic(table)
        g2 += g
        dof += d
    if dof == 0:
        return CiResult(1.0, g2, 0.0, degenerate=True)
    return CiResult(chi2_sf(g2, dof), g2, float(dof))


def conditioning_subsets(pool: Sequence, max_size: int):
    """Non-empty subsets of ``pool`` by increasing size, lexicographic within a size."""
    for size in range(1, min(max_size, len(pool)) + 1):
        yield from itertools.combinations(pool, size)
