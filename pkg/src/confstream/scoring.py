"""Nonconformity scores, streaming quantile thresholds and prediction sets.

Scores follow the regularized adaptive prediction set construction: for a
candidate label ``y`` with predicted probability ``p_y``

    S(y) = xi * sqrt(max(k_y - k_reg, 0)) + u * p_y + rho_y

where ``k_y`` counts labels with probability >= ``p_y`` and ``rho_y`` sums the
probabilities strictly greater than ``p_y``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from sortedcontainers import SortedList

from confstream import kernels

# Slack on ceil(t * (1 - alpha)) so that products like 10 * 0.9 do not round up
# to the next rank.
RANK_EPS = 1e-9


@dataclass(frozen=True)
class ScoreParams:
    xi: float = 0.1
    k_reg: int = 1

    def __post_init__(self):
        if not self.xi >= 0:
            raise ValueError(f"xi must be >= 0, got {self.xi}")
        if int(self.k_reg) != self.k_reg or self.k_reg < 1:
            raise ValueError(f"k_reg must be a positive integer, got {self.k_reg}")


@dataclass(frozen=True)
class PredictionSet:
    labels: frozenset[int]
    alpha_used: float
    threshold: float
    width: int

    def __contains__(self, label: int) -> bool:
        return label in self.labels


class CalibrationStore:
    """Ordered multiset of past true-label scores for one model.

    Backed by a ``SortedList`` so insertion and rank lookup are both
    logarithmic in the number of stored scores.
    """

    def __init__(self, scores: Iterable[float] = ()):
        self._scores = SortedList(float(s) for s in scores)

    @property
    def count(self) -> int:
        return len(self._scores)

    def __len__(self) -> int:
        return len(self._scores)

    def __iter__(self):
        return iter(self._scores)

    def __getitem__(self, index: int) -> float:
        return self._scores[index]

    def insert(self, score: float) -> None:
        self._scores.add(float(score))

    def rank_left(self, score: float) -> int:
        """Number of stored scores strictly below ``score``."""
        return self._scores.bisect_left(score)

    def copy(self) -> "CalibrationStore":
        return CalibrationStore(self._scores)


def check_probs(probs, tol: float = 1e-9) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("probability vector must be a nonempty 1-d sequence")
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError("probabilities must lie in [0, 1]")
    if abs(p.sum() - 1.0) > tol:
        raise ValueError(f"probabilities sum to {p.sum()!r}, expected 1")
    return p


def raps_score(probs: Sequence[float], label: int, u: float, params: ScoreParams) -> float:
    """Score of a single candidate label, evaluated directly from the definition."""
    k = len(probs)
    if not 0 <= label < k:
        raise ValueError(f"label {label} outside 0..{k - 1}")
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"u must lie in [0, 1], got {u}")
    p_y = probs[label]
    k_y = 0
    rho = 0.0
    for p in probs:
        if p >= p_y:
            k_y += 1
        if p > p_y:
            rho += p
    return params.xi * math.sqrt(max(k_y - params.k_reg, 0)) + u * p_y + rho


def raps_scores(probs, u: float, params: ScoreParams) -> np.ndarray:
    """Scores of every label, for one vector (K,) or a stack of vectors (M, K)."""
    p = np.ascontiguousarray(probs, dtype=np.float64)
    squeeze = p.ndim == 1
    if squeeze:
        p = p[None, :]
    out = np.empty_like(p)
    kernels.raps_scores(p, float(u), float(params.xi), int(params.k_reg), out)
    return out[0] if squeeze else out


def quantile_rank(alpha: float, t: int) -> int:
    return math.ceil(t * (1.0 - alpha) - RANK_EPS)


def quantile_threshold(store: CalibrationStore, alpha: float, t: int) -> float:
    """The ceil(t(1-alpha))-th smallest stored score, with +-inf outside the history."""
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    if store.count != t - 1:
        raise ValueError(f"store holds {store.count} scores, expected t-1 = {t - 1}")
    k = quantile_rank(alpha, t)
    if k <= 0:
        return -math.inf
    if k > t - 1:
        return math.inf
    return store[k - 1]


def set_from_scores(scores: np.ndarray, threshold: float, alpha: float) -> PredictionSet:
    labels = frozenset(int(i) for i in np.flatnonzero(scores <= threshold))
    return PredictionSet(labels=labels, alpha_used=float(alpha), threshold=threshold, width=len(labels))


def prediction_set(probs, store: CalibrationStore, alpha: float, t: int, u: float,
                   params: ScoreParams) -> PredictionSet:
    threshold = quantile_threshold(store, alpha, t)
    return set_from_scores(raps_scores(probs, u, params), threshold, alpha)


def alpha_bar(true_score: float, store: CalibrationStore, t: int) -> float:
    """Largest miss-coverage level whose set still contains the true label.

    With ``k*`` the 1-based rank of the first stored score ``>= true_score``,
    the label is covered exactly when ``ceil(t(1-a)) >= k*``, i.e. for
    ``a < 1 - (k*-1)/t``. The supremum is returned even though it is not
    attained. A score above every stored score behaves as ``k* = t`` (only the
    full-set sentinel covers it), giving ``1/t``.
    """
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    below = store.rank_left(true_score)
    return 1.0 - below / t
