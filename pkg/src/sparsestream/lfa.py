"""Latent factor completion of buffered feature blocks.

A block ``B`` (instances x buffered columns, ``NaN`` = missing) is factorised
as ``B ~ P @ Q.T`` by stochastic gradient descent over the observed entries,
minimising the per-entry loss

    0.5 * (f - p_m . q_j)**2 + 0.5 * lam * (|p_m|**2 + |q_j|**2)

summed over observed ``(m, j)``.  Each epoch visits observed entries in
row-major order and updates ``p_m`` and ``q_j`` simultaneously from their
pre-update values.  No shuffling, so training is deterministic given the
initial factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import DivergenceError, ValidationError

LOSS_GUARD = 1e-12


@dataclass(frozen=True)
class LfaConfig:
    """SGD hyperparameters.

    ``eta=1e-5`` is a very conservative default; on desk-scale data
    ``eta=0.01`` converges within a few hundred epochs.
    """

    d: int = 5
    lam: float = 0.01
    eta: float = 1e-5
    lmax: int = 1000
    tol: float = 1e-5
    init_seed: int = 0
    init_scale: float = 0.1

    def __post_init__(self):
        for name in ("lam", "eta", "tol", "init_scale"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite")
        if self.d < 1:
            raise ValidationError(f"latent dimension must be >= 1, got {self.d}")
        if self.lam < 0:
            raise ValidationError(f"lambda must be >= 0, got {self.lam}")
        if self.eta <= 0:
            raise ValidationError(f"eta must be > 0, got {self.eta}")
        if self.lmax < 1:
            raise ValidationError(f"lmax must be >= 1, got {self.lmax}")
        if self.tol <= 0:
            raise ValidationError(f"tol must be > 0, got {self.tol}")
        if self.init_scale <= 0:
            raise ValidationError(f"init_scale must be > 0, got {self.init_scale}")


@dataclass(frozen=True, eq=False)
class FeatureBlock:
    """Buffered columns starting at stream position ``start_index``."""

    start_index: int
    values: np.ndarray

    def __post_init__(self):
        V = np.asarray(self.values, dtype=np.float64)
        if V.ndim != 2:
            raise ValidationError(f"block values must be 2-D, got shape {V.shape}")
        object.__setattr__(self, "values", V)

    @classmethod
    def from_columns(cls, start_index: int, columns) -> "FeatureBlock":
        return cls(start_index, np.column_stack([np.asarray(c, dtype=np.float64) for c in columns]))

    @property
    def mask(self) -> np.ndarray:
        return ~np.isnan(self.values)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_observed(self) -> int:
        return int(self.mask.sum())

    @property
    def missing_rate(self) -> float:
        return 1.0 - self.n_observed / self.values.size if self.values.size else 0.0


@dataclass(frozen=True, eq=False)
class LatentFactorPair:
    P: np.ndarray
    Q: np.ndarray
    epoch_losses: tuple[float, ...] = field(default=())

    @property
    def d(self) -> int:
        return self.P.shape[1]

    @property
    def epochs(self) -> int:
        return len(self.epoch_losses)


@dataclass(frozen=True, eq=False)
class CompletedBlock:
    start_index: int
    values: np.ndarray
    mask: np.ndarray

    def column(self, j: int) -> np.ndarray:
        return self.values[:, j]


def entry_loss(f: float, p_row, q_row, lam: float) -> float:
    p = np.asarray(p_row, dtype=np.float64)
    q = np.asarray(q_row, dtype=np.float64)
    err = f - float(np.dot(p, q))
    loss = 0.5 * err * err + 0.5 * lam * (float(np.dot(p, p)) + float(np.dot(q, q)))
    if not math.isfinite(loss):
        raise FloatingPointError("entry loss is not finite")
    return loss


@numba.njit(cache=True)
def _sgd_pass(rows, cols, vals, P, Q, eta, lam):
    d = P.shape[1]
    for k in range(rows.shape[0]):
        m = rows[k]
        j = cols[k]
        e = vals[k]
        for v in range(d):
            e -= P[m, v] * Q[j, v]
        for v in range(d):
            p = P[m, v]
            q = Q[j, v]
            P[m, v] = p + eta * (e * q - lam * p)
            Q[j, v] = q + eta * (e * p - lam * q)


def _observed(block: FeatureBlock):
    rows, cols = np.nonzero(block.mask)  # row-major order
    return rows.astype(np.int64), cols.astype(np.int64), block.values[rows, cols]


def _total_loss(rows, cols, vals, P, Q, lam) -> float:
    Pm = P[rows]
    Qj = Q[cols]
    err = vals - np.einsum("ij,ij->i", Pm, Qj)
    reg = np.einsum("ij,ij->i", Pm, Pm) + np.einsum("ij,ij->i", Qj, Qj)
    with np.errstate(over="ignore", invalid="ignore"):
        return float(np.sum(0.5 * err * err + 0.5 * lam * reg))


def _check_dims(block: FeatureBlock, factors: LatentFactorPair):
    if factors.P.shape[0] != block.n_rows or factors.Q.shape[0] != block.width:
        raise ValidationError(
            f"factors {factors.P.shape}/{factors.Q.shape} do not fit block {block.values.shape}"
        )
    if factors.P.shape[1] != factors.Q.shape[1]:
        raise ValidationError("P and Q must share the latent dimension")


def sgd_epoch(block: FeatureBlock, factors: LatentFactorPair, cfg: LfaConfig):
    """One pass over the observed entries.

    Returns
    -------
    (LatentFactorPair, float)
        Updated factors (inputs are not modified) and the summed per-entry
        loss after the pass.
    """
    _check_dims(block, factors)
    rows, cols, vals = _observed(block)
    if rows.size == 0:
        raise ValidationError("block has no observed entries")
    P = factors.P.copy()
    Q = factors.Q.copy()
    _sgd_pass(rows, cols, vals, P, Q, cfg.eta, cfg.lam)
    loss = _total_loss(rows, cols, vals, P, Q, cfg.lam)
    if not math.isfinite(loss):
        raise DivergenceError(cfg.eta, epoch=1)
    return LatentFactorPair(P, Q), loss


def init_factors(n_rows: int, width: int, cfg: LfaConfig) -> LatentFactorPair:
    """Seeded uniform initial factors in ``(0, init_scale]``."""
    rng = np.random.default_rng(cfg.init_seed)
    P = cfg.init_scale * (1.0 - rng.random((n_rows, cfg.d)))
    Q = cfg.init_scale * (1.0 - rng.random((width, cfg.d)))
    return LatentFactorPair(P, Q)


def train(block: FeatureBlock, cfg: LfaConfig) -> LatentFactorPair:
    """Fit factors until ``lmax`` epochs or relative loss change below ``tol``."""
    rows, cols, vals = _observed(block)
    if rows.size == 0:
        raise ValidationError(f"block at column {block.start_index} has no observed entries")
    init = init_factors(block.n_rows, block.width, cfg)
    P, Q = init.P.copy(), init.Q.copy()
    losses: list[float] = []
    prev = None
    for epoch in range(1, cfg.lmax + 1):
        _sgd_pass(rows, cols, vals, P, Q, cfg.eta, cfg.lam)
        loss = _total_loss(rows, cols, vals, P, Q, cfg.lam)
        if not math.isfinite(loss):
            raise DivergenceError(cfg.eta, epoch)
        losses.append(loss)
        if prev is not None and abs(prev - loss) / max(prev, LOSS_GUARD) < cfg.tol:
            break
        prev = loss
    return LatentFactorPair(P, Q, tuple(losses))


def complete(block: FeatureBlock, factors: LatentFactorPair, keep_observed: bool = False) -> CompletedBlock:
    """Dense block from the factors.

    By default every cell is the reconstruction ``P @ Q.T``, observed ones
    included.  With ``keep_observed`` only missing cells are filled and
    observed values pass through unchanged.
    """
    _check_dims(block, factors)
    values = factors.P @ factors.Q.T
    mask = block.mask
    if keep_observed:
        values = np.where(mask, block.values, values)
    return CompletedBlock(block.start_index, values, mask)
