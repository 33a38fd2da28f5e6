"""Brute-force references shared by the unit and acceptance suites."""

import math

import numpy as np

from confstream.ocp import pinball_loss


def grid_levels(lo=-0.05, hi=1.05, step=1e-4):
    return np.arange(round(lo / step), round(hi / step) + 1) * step


def grid_alpha_bar(true_score, sorted_scores, t, step=1e-4):
    """Largest grid level whose quantile threshold still covers ``true_score``.

    The threshold at level a is the ceil(t(1 - a))-th smallest stored score,
    -inf when that rank is <= 0 and +inf when it exceeds the store size.
    """
    levels = grid_levels(-0.05, 1.05, step)
    s = np.asarray(sorted_scores, dtype=np.float64)
    k = np.ceil(t * (1 - levels) - 1e-9).astype(np.int64)
    thr = np.where(k <= 0, -math.inf, np.where(k > s.size, math.inf, s[np.clip(k - 1, 0, max(s.size - 1, 0))]
                                              if s.size else math.inf))
    covered = levels[true_score <= thr]
    return float(covered.max()) if covered.size else -math.inf


def grid_comparator(bars, target, step=1e-4, eta=0.05):
    """(levels, summed pinball loss at each level) over [-eta, 1 + eta]."""
    levels = grid_levels(-eta, 1 + eta, step)
    b = np.asarray(bars, dtype=np.float64)[None, :]
    d = b - levels[:, None]
    return levels, (target * d - np.minimum(0.0, d)).sum(axis=1)


def scalar_pinball_total(bars, a, target):
    return math.fsum(pinball_loss(b, a, target) for b in bars)
