"""ScaleFreeOGD baseline: one SF-OGD level for a single fixed model."""

from __future__ import annotations

import numpy as np

from confstream.metrics import StepRecord
from confstream.ocp import OcpParams, SfogdState, miss_indicator, pinball_grad, pinball_loss, sfogd_step
from confstream.scoring import (CalibrationStore, PredictionSet, ScoreParams, alpha_bar, quantile_threshold,
                                raps_scores, set_from_scores)


class OgdBaseline:
    """Builds sets from ``model_index`` only; all stores are still fed each step."""

    def __init__(self, num_models: int, model_index: int, params: OcpParams = OcpParams(),
                 score_params: ScoreParams = ScoreParams()):
        if not 0 <= model_index < num_models:
            raise ValueError(f"model index {model_index} outside 0..{num_models - 1}")
        self.num_models = num_models
        self.model_index = model_index
        self.params = params
        self.score_params = score_params
        self.state = SfogdState(params.target_alpha)
        self.stores = [CalibrationStore() for _ in range(num_models)]
        self.t = 0

    @property
    def alpha(self) -> float:
        return self.state.alpha

    def advance(self, alpha_bar_value: float) -> tuple[float, int]:
        """Apply one update from the selected model's alpha_bar; returns (loss, miss)."""
        a = self.state.alpha
        loss = pinball_loss(alpha_bar_value, a, self.params.target_alpha)
        miss = miss_indicator(alpha_bar_value, a)
        self.state = sfogd_step(self.state, pinball_grad(miss, self.params.target_alpha), self.params.eta)
        self.t += 1
        return loss, miss

    def step(self, probs, label: int, u: float) -> tuple[PredictionSet, StepRecord]:
        probs = np.ascontiguousarray(probs, dtype=np.float64)
        k = probs.shape[1]
        if not 0 <= label < k:
            raise ValueError(f"label {label} outside 0..{k - 1}")
        t = self.t + 1
        m = self.model_index
        a = self.state.alpha
        scores = raps_scores(probs, u, self.score_params)
        pset = set_from_scores(scores[m], quantile_threshold(self.stores[m], a, t), a)
        true_scores = scores[:, label]
        bars = tuple(alpha_bar(s, store, t) for s, store in zip(true_scores, self.stores))
        loss, miss = self.advance(bars[m])
        for s, store in zip(true_scores, self.stores):
            store.insert(s)
        mass = tuple(1.0 if i == m else 0.0 for i in range(self.num_models))
        return pset, StepRecord(t=t, err=int(label not in pset), expected_err=float(miss), width=pset.width,
                                learner_loss=loss, alpha_bars=bars, learner_alpha=a, expert=-1, model=m,
                                model_mass=mass, n_active=0)
