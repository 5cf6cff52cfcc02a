"""Monotone maps between observed measurement scales and normal scores.

The imputation layer works on a latent Gaussian scale.  Each column gets a
monotone transform built from its observed values only:

* continuous columns use empirical normal scores: sorted unique values map
  to ``ndtri(rank / (n + 1))`` with average ranks for ties; the forward map
  interpolates linearly between those nodes and clamps outside them, and
  the inverse interpolates back between order statistics (so imputed
  values never leave the observed range);
* binary and ordinal columns use a latent-threshold coding: observed level
  frequencies fix interior cut points ``ndtri(F_k)`` and each level is
  represented by the normal score of its frequency band midpoint; the
  inverse maps a latent draw to the level of the band it falls in.

Both are deterministic functions of the observed values, and both satisfy
``inverse(forward(v)) == v`` exactly for every observed value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .dataset import ColumnKind
from .errors import DataError

__all__ = ["NormalScores", "LatentThresholds", "fit_transform"]


@dataclass(frozen=True)
class NormalScores:
    """Empirical normal-score transform for a continuous column."""

    nodes: np.ndarray   # unique observed values, ascending
    scores: np.ndarray  # matching normal scores, strictly ascending

    @classmethod
    def fit(cls, observed: np.ndarray) -> "NormalScores":
        v = np.asarray(observed, dtype=float)
        if v.size == 0:
            raise DataError("cannot fit a transform on zero observed values")
        nodes, counts = np.unique(v, return_counts=True)
        ends = np.cumsum(counts)
        avg_rank = ends - (counts - 1) / 2.0  # average 1-based rank within tie group
        scores = ndtri(avg_rank / (v.size + 1))
        return cls(nodes=nodes, scores=scores)

    def forward(self, values: np.ndarray) -> np.ndarray:
        return np.interp(values, self.nodes, self.scores)

    def inverse(self, latent: np.ndarray) -> np.ndarray:
        return np.interp(latent, self.scores, self.nodes)


@dataclass(frozen=True)
class LatentThresholds:
    """Latent-Gaussian coding for a binary or ordinal column."""

    levels: np.ndarray  # unique observed level values, ascending
    scores: np.ndarray  # normal score representing each level
    cuts: np.ndarray    # len(levels) - 1 interior thresholds, ascending

    @classmethod
    def fit(cls, observed: np.ndarray) -> "LatentThresholds":
        v = np.asarray(observed, dtype=float)
        if v.size == 0:
            raise DataError("cannot fit a transform on zero observed values")
        levels, counts = np.unique(v, return_counts=True)
        cum = np.cumsum(counts) / v.size
        cuts = ndtri(cum[:-1])
        mid = (np.concatenate(([0.0], cum[:-1])) + cum) / 2.0
        scores = ndtri(mid)
        return cls(levels=levels, scores=scores, cuts=cuts)

    def forward(self, values: np.ndarray) -> np.ndarray:
        return np.interp(values, self.levels, self.scores)

    def inverse(self, latent: np.ndarray) -> np.ndarray:
        return self.levels[np.searchsorted(self.cuts, latent)]


def fit_transform(observed: np.ndarray, kind: ColumnKind):
    """Build the transform matching a column kind from its observed values."""
    if kind is ColumnKind.CONTINUOUS:
        return NormalScores.fit(observed)
    return LatentThresholds.fit(observed)
