"""Neighborhood rough sets over Euclidean distance.

A :class:`NeighborhoodSpace` holds the instance-by-feature data (min-max
scaled per column by default) and a radius ``h``.  Neighborhoods are closed
balls, so every instance belongs to its own neighborhood.
"""

from __future__ import annotations

import warnings

import numpy as np

from .errors import DegenerateInputWarning, ValidationError

DEFAULT_RADIUS = 0.15


def minmax_scale(X: np.ndarray) -> np.ndarray:
    """Scale each column to [0, 1]; constant columns become 0."""
    X = np.asarray(X, dtype=np.float64)
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    span[span == 0] = 1.0
    return (X - lo) / span


class NeighborhoodSpace:
    """Instances restricted to a feature subset, with a neighborhood radius.

    Parameters
    ----------
    data : array_like, shape (n,) or (n, g)
        One row per instance. A 1-D array is a single feature.
    radius : float
        Neighborhood radius ``h >= 0``.
    scale : bool
        Min-max scale every column before measuring distances.
    """

    def __init__(self, data, radius: float = DEFAULT_RADIUS, scale: bool = True):
        X = np.asarray(data, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise ValidationError(f"data must be 1-D or 2-D, got shape {X.shape}")
        if not np.isfinite(X).all():
            raise ValidationError("neighborhood data must be finite")
        if not radius >= 0:
            raise ValidationError(f"radius must be non-negative, got {radius}")
        self.data = minmax_scale(X) if scale and X.shape[0] else X
        self.radius = float(radius)
        diff = self.data[:, None, :] - self.data[None, :, :]
        self._within = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff)) <= self.radius

    @property
    def n(self) -> int:
        return self.data.shape[0]

    def neighborhood(self, i: int) -> set[int]:
        if not 0 <= i < self.n:
            raise IndexError(f"instance {i} out of range for n={self.n}")
        return set(np.flatnonzero(self._within[i]).tolist())

    def _member(self, X) -> np.ndarray:
        member = np.zeros(self.n, dtype=bool)
        idx = np.fromiter(X, dtype=np.int64) if not isinstance(X, np.ndarray) else X
        if idx.size and (idx.min() < 0 or idx.max() >= self.n):
            raise IndexError("instance index out of range")
        member[idx] = True
        return member

    def _lower_mask(self, member: np.ndarray) -> np.ndarray:
        # neighborhood contained in X  <=>  no neighbor outside X
        return ~(self._within & ~member[None, :]).any(axis=1)

    def lower_approximation(self, X) -> set[int]:
        return set(np.flatnonzero(self._lower_mask(self._member(X))).tolist())

    def upper_approximation(self, X) -> set[int]:
        member = self._member(X)
        return set(np.flatnonzero((self._within & member[None, :]).any(axis=1)).tolist())

    def positive_region(self, labels) -> np.ndarray:
        labels = np.asarray(labels)
        if labels.shape != (self.n,):
            raise ValidationError(f"labels shape {labels.shape} does not match n={self.n}")
        pos = np.zeros(self.n, dtype=bool)
        for c in np.unique(labels):
            pos |= self._lower_mask(labels == c)
        return pos

    def dependency_degree(self, labels) -> float:
        """Fraction of instances whose neighborhood is pure in class."""
        labels = np.asarray(labels)
        if np.unique(labels).size < 2:
            warnings.warn(
                "dependency degree of a single-class decision is 1 by convention",
                DegenerateInputWarning,
                stacklevel=2,
            )
            return 1.0
        return float(self.positive_region(labels).sum()) / self.n


def neighborhood(space: NeighborhoodSpace, i: int) -> set[int]:
    return space.neighborhood(i)


def lower_approximation(space: NeighborhoodSpace, X) -> set[int]:
    return space.lower_approximation(X)


def upper_approximation(space: NeighborhoodSpace, X) -> set[int]:
    return space.upper_approximation(X)


def dependency_degree(space: NeighborhoodSpace, labels) -> float:
    return space.dependency_degree(labels)
