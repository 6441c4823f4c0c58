"""TOPSIS and COPRAS aggregation of dimension scores, and Spearman rank correlation."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

__all__ = ["DecisionMatrix", "RankVector", "average_ranks", "topsis", "copras", "spearman"]


@dataclass(frozen=True)
class DecisionMatrix:
    alternatives: tuple[str, ...]
    criteria: tuple[str, ...]
    values: np.ndarray
    weights: np.ndarray | None = None
    benefit: tuple[bool, ...] | None = None

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (len(self.alternatives), len(self.criteria)):
            raise ValueError(f"values shape {vals.shape} does not match labels")
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            raise ValueError("decision matrix values must be finite and > 0")
        m = len(self.criteria)
        w = np.full(m, 1.0 / m) if self.weights is None else np.asarray(self.weights, dtype=float)
        if w.shape != (m,) or np.any(w < 0) or not math.isclose(w.sum(), 1.0, rel_tol=1e-9):
            raise ValueError("weights must be non-negative, one per criterion, and sum to 1")
        benefit = (True,) * m if self.benefit is None else tuple(bool(b) for b in self.benefit)
        if len(benefit) != m:
            raise ValueError("one benefit flag per criterion required")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "benefit", benefit)

    @classmethod
    def from_scores(
        cls, scores: Mapping[str, Mapping[str, float]], criteria: Sequence[str] | None = None
    ) -> DecisionMatrix:
        """Build from ``{alternative: {criterion: value}}``."""
        alts = tuple(scores)
        crit = tuple(criteria) if criteria is not None else tuple(next(iter(scores.values())))
        return cls(alts, crit, np.array([[scores[a][c] for c in crit] for a in alts]))


@dataclass(frozen=True)
class RankVector:
    alternatives: tuple[str, ...]
    scores: np.ndarray
    ranks: np.ndarray  # 1 = best, averaged over ties
    method: str
    tie_policy: str = "average"

    def rank_of(self, alternative: str) -> float:
        return float(self.ranks[self.alternatives.index(alternative)])

    def rows(self) -> list[tuple[str, float, float, str]]:
        return [(a, float(s), float(r), self.method) for a, s, r in zip(self.alternatives, self.scores, self.ranks)]


def average_ranks(values: Sequence[float], descending: bool = False) -> np.ndarray:
    """1-based ranks; tied values share the mean of the ranks they span."""
    x = np.asarray(values, dtype=float)
    key = -x if descending else x
    order = np.argsort(key, kind="mergesort")
    ranks = np.empty(len(x))
    sorted_keys = key[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sorted_keys[j + 1] == sorted_keys[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def topsis(m: DecisionMatrix, normalization: str = "minmax") -> RankVector:
    """Relative closeness to the ideal point under Euclidean distance.

    ``normalization`` is ``"minmax"`` (linear max-min rescaling of each
    criterion to [0, 1]) or ``"vector"`` (division by the column norm).
    A constant column carries no information and is mapped to zeros under
    min-max.
    """
    X = m.values
    if normalization == "minmax":
        lo, hi = X.min(axis=0), X.max(axis=0)
        span = hi - lo
        N = np.zeros_like(X)
        live = span > 0
        N[:, live] = (X[:, live] - lo[live]) / span[live]
        cost = ~np.array(m.benefit)
        N[:, cost & live] = 1.0 - N[:, cost & live]
    elif normalization == "vector":
        N = X / np.linalg.norm(X, axis=0)
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    V = N * m.weights
    benefit = np.array(m.benefit)
    if normalization == "minmax":
        # cost columns were already flipped, so every column is "larger is better"
        benefit = np.ones_like(benefit)
    ideal = np.where(benefit, V.max(axis=0), V.min(axis=0))
    anti = np.where(benefit, V.min(axis=0), V.max(axis=0))
    d_plus = np.sqrt(((V - ideal) ** 2).sum(axis=1))
    d_minus = np.sqrt(((V - anti) ** 2).sum(axis=1))
    total = d_plus + d_minus
    closeness = np.empty(len(X))
    flat = total == 0
    if flat.any():
        warnings.warn("alternative(s) at zero distance from both ideal and anti-ideal; closeness set to 0.5")
    closeness[flat] = 0.5
    closeness[~flat] = d_minus[~flat] / total[~flat]
    return RankVector(m.alternatives, closeness, average_ranks(closeness, descending=True), "topsis")


def copras(m: DecisionMatrix) -> RankVector:
    """Complex proportional assessment with sum normalization.

    Without cost criteria the relative significance is just the weighted
    benefit sum.  Utilities are scaled so the best alternative has 1.
    """
    X = m.values
    D = X / X.sum(axis=0) * m.weights
    benefit = np.array(m.benefit)
    s_plus = D[:, benefit].sum(axis=1)
    if benefit.all():
        Q = s_plus
    else:
        s_minus = D[:, ~benefit].sum(axis=1)
        Q = s_plus + s_minus.min() * s_minus.sum() / (s_minus * (s_minus.min() / s_minus).sum())
    U = Q / Q.max()
    return RankVector(m.alternatives, U, average_ranks(U, descending=True), "copras")


def spearman(a: RankVector | Sequence[float], b: RankVector | Sequence[float]) -> float:
    """Tie-aware Spearman correlation (Pearson correlation of average ranks).

    Rank vectors are compared on their ranks; plain sequences are ranked
    first.  A constant input has no defined correlation and gives NaN.
    """
    ra = a.ranks if isinstance(a, RankVector) else average_ranks(a)
    rb = b.ranks if isinstance(b, RankVector) else average_ranks(b)
    if isinstance(a, RankVector) and isinstance(b, RankVector) and a.alternatives != b.alternatives:
        idx = [b.alternatives.index(x) for x in a.alternatives]
        rb = rb[idx]
    if len(ra) != len(rb):
        raise ValueError(f"length mismatch: {len(ra)} vs {len(rb)}")
    if len(ra) < 2:
        raise ValueError("spearman needs at least two observations")
    # ranks of ranks are the ranks themselves, so rank the inputs only once
    da, db = ra - ra.mean(), rb - rb.mean()
    denom = math.sqrt(float((da**2).sum() * (db**2).sum()))
    if denom == 0:
        return math.nan
    return float((da * db).sum() / denom)
