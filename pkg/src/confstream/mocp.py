"""Multi-model online conformal prediction: one expert with M model slots.

Every slot carries its own miss-coverage level updated by scale-free OGD and
an exponential weight driven by its pinball loss. Weights are stored as logs,
which keeps the selection distribution exact when raw weights would underflow.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from confstream.metrics import StepRecord
from confstream.ocp import OcpParams, SfogdState
from confstream.scoring import (CalibrationStore, ScoreParams, alpha_bar, quantile_threshold, raps_scores,
                                set_from_scores)

SAMPLE = "sample"
DETERMINISTIC = "deterministic"
MODES = (SAMPLE, DETERMINISTIC)


class ModelSlot(NamedTuple):
    sfogd: SfogdState
    weight: float


def normalize_weights(weights) -> np.ndarray:
    """Normalize positive raw weights without losing tiny values to underflow."""
    w = np.asarray(weights, dtype=np.float64)
    if w.size == 0 or np.any(w <= 0):
        raise ValueError("weights must be a nonempty array of positive values")
    return softmax(np.log(w))


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    e = np.exp(z - z.max())
    return e / e.sum()


def inverse_cdf(probs, rand: float) -> int:
    """Index i with cdf[i-1] <= rand < cdf[i]."""
    cdf = np.cumsum(probs)
    idx = int(np.searchsorted(cdf, rand, side="right"))
    return min(idx, len(cdf) - 1)


@dataclass
class MocpExpert:
    alpha: np.ndarray
    cum_sq_grad: np.ndarray
    log_weight: np.ndarray
    step_size: float
    params: OcpParams

    @property
    def num_models(self) -> int:
        return self.alpha.size

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weight)

    @property
    def slots(self) -> list[ModelSlot]:
        return [
            ModelSlot(SfogdState(float(a), float(c)), float(np.exp(lw)))
            for a, c, lw in zip(self.alpha, self.cum_sq_grad, self.log_weight)
        ]

    def distribution(self) -> np.ndarray:
        return softmax(self.log_weight)

    def select(self, mode: str = DETERMINISTIC, rand: float = 0.0) -> tuple[int, float]:
        wbar = self.distribution()
        if mode == SAMPLE:
            m = inverse_cdf(wbar, rand)
            return m, float(self.alpha[m])
        if mode == DETERMINISTIC:
            return int(np.argmax(wbar)), float(wbar @ self.alpha)
        raise ValueError(f"unknown mode {mode!r}")

    def update(self, alpha_bars) -> np.ndarray:
        """Advance every slot after the label is revealed; returns per-slot losses."""
        bars = np.asarray(alpha_bars, dtype=np.float64)
        if bars.shape != self.alpha.shape:
            raise ValueError(f"expected {self.num_models} alpha_bar values, got {bars.size}")
        target = self.params.target_alpha
        d = bars - self.alpha
        losses = target * d - np.minimum(0.0, d)
        self.log_weight -= self.step_size * losses
        grad = (bars < self.alpha).astype(np.float64) - target
        cum = self.cum_sq_grad + grad * grad
        moved = cum > 0
        self.alpha = np.where(moved, self.alpha - self.params.eta * grad / np.sqrt(np.where(moved, cum, 1.0)),
                              self.alpha)
        self.cum_sq_grad = cum
        return losses

    def copy(self) -> "MocpExpert":
        return MocpExpert(self.alpha.copy(), self.cum_sq_grad.copy(), self.log_weight.copy(),
                          self.step_size, self.params)


def mocp_init(num_models: int, init_alpha: float, params: OcpParams, step_size: float) -> MocpExpert:
    if num_models < 1:
        raise ValueError("an expert needs at least one model")
    if not 0.0 < step_size < 1.0:
        raise ValueError(f"step size must lie in (0, 1), got {step_size}")
    return MocpExpert(
        alpha=np.full(num_models, float(init_alpha)),
        cum_sq_grad=np.zeros(num_models),
        log_weight=np.full(num_models, -np.log(num_models)),
        step_size=float(step_size),
        params=params,
    )


class MocpLearner:
    """One expert with a fixed step size run directly over a stream."""

    def __init__(self, num_models: int, params: OcpParams = OcpParams(), *, step_size: float = 0.9,
                 mode: str = DETERMINISTIC, score_params: ScoreParams | None = None):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        self.expert = mocp_init(num_models, params.target_alpha, params, step_size)
        self.params = params
        self.mode = mode
        self.score_params = score_params or ScoreParams()
        self.stores = [CalibrationStore() for _ in range(num_models)]
        self.t = 0

    def step(self, probs, label: int, u: float, rand_model: float = 0.0):
        probs = np.ascontiguousarray(probs, dtype=np.float64)
        if not 0 <= label < probs.shape[1]:
            raise ValueError(f"label {label} outside 0..{probs.shape[1] - 1}")
        t = self.t + 1
        ex = self.expert
        wbar = ex.distribution()
        m, a = ex.select(self.mode, rand_model)
        scores = raps_scores(probs, u, self.score_params)
        pset = set_from_scores(scores[m], quantile_threshold(self.stores[m], a, t), a)
        true_scores = scores[:, label]
        bars = np.array([alpha_bar(s, st, t) for s, st in zip(true_scores, self.stores)])
        miss = (bars < ex.alpha).astype(np.float64)
        losses = ex.update(bars)
        weighted = float(wbar @ losses)
        for s, st in zip(true_scores, self.stores):
            st.insert(s)
        self.t = t
        return pset, StepRecord(t=t, err=int(label not in pset), expected_err=float(wbar @ miss),
                                width=pset.width, learner_loss=weighted, alpha_bars=tuple(bars.tolist()),
                                learner_alpha=a, expert=1, model=m, model_mass=tuple(wbar.tolist()))
