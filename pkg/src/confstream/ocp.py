"""Pinball loss, scale-free OGD on the miss-coverage level, and the best fixed level."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class OcpParams:
    target_alpha: float = 0.1
    eta: float = 0.05

    def __post_init__(self):
        if not 0.0 < self.target_alpha < 1.0:
            raise ValueError(f"target_alpha must lie in (0, 1), got {self.target_alpha}")
        # eta == 0 is allowed: it freezes alpha, which the baselines use as a control.
        if not self.eta >= 0.0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")


@dataclass(frozen=True)
class SfogdState:
    alpha: float
    cum_sq_grad: float = 0.0


def pinball_loss(alpha_bar: float, alpha_hat: float, target_alpha: float) -> float:
    d = alpha_bar - alpha_hat
    return target_alpha * d - min(0.0, d)


def pinball_grad(err: int, target_alpha: float) -> float:
    """Derivative of the pinball loss in ``alpha_hat``; ``err`` is the miss indicator."""
    return float(err) - target_alpha


def miss_indicator(alpha_bar: float, alpha_hat: float) -> int:
    return 1 if alpha_bar < alpha_hat else 0


def sfogd_step(state: SfogdState, grad: float, eta: float) -> SfogdState:
    cum = state.cum_sq_grad + grad * grad
    if cum == 0.0:
        return SfogdState(state.alpha, cum)
    return SfogdState(state.alpha - eta * grad / math.sqrt(cum), cum)


def pinball_losses(alpha_bars, alpha_hat: float, target_alpha: float) -> np.ndarray:
    d = np.asarray(alpha_bars, dtype=np.float64) - alpha_hat
    return target_alpha * d - np.minimum(0.0, d)


def best_fixed_alpha(alpha_bars, target_alpha: float) -> tuple[float, float]:
    """Minimize the summed pinball loss over a constant level.

    The objective is piecewise linear with slope ``#{abar < a} - n*target``,
    so the lower endpoint of the minimizing set is the ``ceil(n*target)``-th
    smallest value.
    """
    bars = np.sort(np.asarray(alpha_bars, dtype=np.float64))
    n = bars.size
    if n == 0:
        raise ValueError("best_fixed_alpha needs at least one value")
    k = min(max(math.ceil(n * target_alpha - 1e-9), 1), n)
    a_star = float(bars[k - 1])
    return a_star, float(pinball_losses(bars, a_star, target_alpha).sum())
