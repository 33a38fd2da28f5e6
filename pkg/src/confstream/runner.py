"""Drive a learner over a stream and collect step records."""

from __future__ import annotations

from dataclasses import dataclass

from confstream.baselines import OgdBaseline
from confstream.metrics import StepRecord
from confstream.mocp import DETERMINISTIC, SAMPLE, MocpLearner
from confstream.ocp import OcpParams
from confstream.samocp import CORRECTED, Samocp
from confstream.scoring import ScoreParams
from confstream.simulator import Stream, run_rng

METHODS = ("samocp", "mocp", "ogd-baseline")


@dataclass(frozen=True)
class LearnerConfig:
    method: str = "samocp"
    mode: str = DETERMINISTIC
    sign_mode: str = CORRECTED
    target_alpha: float = 0.1
    eta: float = 0.05
    epsilon: float = 0.9
    sigma: float = 140.0
    g: int = 8
    model_index: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        OcpParams(self.target_alpha, self.eta)

    @property
    def ocp(self) -> OcpParams:
        return OcpParams(self.target_alpha, self.eta)


def make_learner(cfg: LearnerConfig, num_models: int, score_params: ScoreParams):
    if cfg.method == "samocp":
        return Samocp(num_models, cfg.ocp, g=cfg.g, sigma=cfg.sigma, epsilon=cfg.epsilon,
                      mode=cfg.mode, sign_mode=cfg.sign_mode, score_params=score_params)
    if cfg.method == "mocp":
        return MocpLearner(num_models, cfg.ocp, step_size=cfg.epsilon, mode=cfg.mode, score_params=score_params)
    return OgdBaseline(num_models, cfg.model_index, cfg.ocp, score_params)


def run_learner(learner, stream: Stream, seed: int) -> list[StepRecord]:
    """One pass over ``stream``; u (and selection draws in sample mode) come from ``run_rng(seed)``."""
    rng = run_rng(seed)
    sample = getattr(learner, "mode", None) == SAMPLE
    records = []
    for probs, label in stream:
        u = rng.random()
        if isinstance(learner, Samocp):
            if sample:
                re, rm = rng.random(), rng.random()
                _, rec = learner.step(probs, label, u, re, rm)
            else:
                _, rec = learner.step(probs, label, u)
        elif isinstance(learner, MocpLearner):
            _, rec = learner.step(probs, label, u, rng.random() if sample else 0.0)
        else:
            _, rec = learner.step(probs, label, u)
        records.append(rec)
    return records


def run_config(cfg: LearnerConfig, stream: Stream, score_params: ScoreParams, seed: int) -> list[StepRecord]:
    learner = make_learner(cfg, stream.probs.shape[1], score_params)
    return run_learner(learner, stream, seed)
