"""Seeded synthetic probability streams with severity-driven distribution shift.

Each candidate model is a stochastic classifier whose top-1 accuracy decays
with the current severity level. Randomness comes from numpy's PCG64 seeded
through ``SeedSequence(seed, spawn_key=(0,))``; the learner's own draws use
``spawn_key=(1,)`` (see ``run_rng``), so a stream can be exported and replayed
under the same seed.

Per instance the draws are consumed in this order: the true label
(``integers(K)``), then for each model in order a hit draw (``random()``), a
wrong label (``integers(K - 1)``) only on a miss, and ``K`` standard normals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

SUDDEN = "sudden"
GRADUAL = "gradual"
STATIONARY = "stationary"


@dataclass(frozen=True)
class ShiftSchedule:
    mode: str = SUDDEN
    batch_size: int = 500
    max_severity: int = 5

    def __post_init__(self):
        if self.mode not in (SUDDEN, GRADUAL, STATIONARY):
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.max_severity < 0:
            raise ValueError("max_severity must be nonnegative")


def severity_at(t: int, schedule: ShiftSchedule) -> int:
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    if schedule.mode == STATIONARY or schedule.max_severity == 0:
        return 0
    batch = (t - 1) // schedule.batch_size
    top = schedule.max_severity
    if schedule.mode == SUDDEN:
        return 0 if batch % 2 == 0 else top
    # 0, 1, ..., top, top-1, ..., 1, then back to 0
    pos = batch % (2 * top)
    return pos if pos <= top else 2 * top - pos


@dataclass(frozen=True)
class ModelProfile:
    base_accuracy: float
    degradation: float = 0.0
    sharpness: float = 3.0

    def __post_init__(self):
        if not 0.0 < self.base_accuracy < 1.0:
            raise ValueError("base_accuracy must lie in (0, 1)")
        if self.degradation < 0:
            raise ValueError("degradation must be nonnegative")
        if not self.sharpness > 0:
            raise ValueError("sharpness must be positive")

    def accuracy(self, severity: int, num_classes: int) -> float:
        return min(max(self.base_accuracy - self.degradation * severity, 1.0 / num_classes), 1.0)


@dataclass(frozen=True)
class StreamConfig:
    num_classes: int
    num_models: int
    horizon: int
    schedule: ShiftSchedule = field(default_factory=ShiftSchedule)
    profiles: tuple[ModelProfile, ...] = ()
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("need at least two classes")
        if self.num_models < 1 or self.horizon < 1:
            raise ValueError("num_models and horizon must be positive")
        if len(self.profiles) != self.num_models:
            raise ValueError(f"{len(self.profiles)} profiles for {self.num_models} models")


@dataclass
class Stream:
    probs: np.ndarray  # (T, M, K)
    labels: np.ndarray  # (T,)
    severities: np.ndarray  # (T,)

    def __len__(self) -> int:
        return self.labels.size

    def __iter__(self) -> Iterator[tuple[np.ndarray, int]]:
        for p, y in zip(self.probs, self.labels):
            yield p, int(y)


def stream_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(0,))))


def run_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(1,))))


def emit_instance(rng: np.random.Generator, t: int, config: StreamConfig) -> tuple[np.ndarray, int]:
    """One instance: (M, K) probability rows and the true label.

    The intended top label gets logit ``sharpness + max(other logits)`` so it is
    always the argmax; the other logits are standard normal noise.
    """
    k = config.num_classes
    sev = severity_at(t, config.schedule)
    label = int(rng.integers(k))
    out = np.empty((config.num_models, k))
    for m, prof in enumerate(config.profiles):
        if rng.random() < prof.accuracy(sev, k):
            top = label
        else:
            top = int(rng.integers(k - 1))
            top += top >= label
        logits = rng.standard_normal(k)
        logits[top] = -math.inf
        logits[top] = logits.max() + prof.sharpness
        e = np.exp(logits - logits[top])
        out[m] = e / e.sum()
    return out, label


def generate_stream(config: StreamConfig) -> Stream:
    rng = stream_rng(config.seed)
    T = config.horizon
    probs = np.empty((T, config.num_models, config.num_classes))
    labels = np.empty(T, dtype=np.int64)
    for i in range(T):
        probs[i], labels[i] = emit_instance(rng, i + 1, config)
    sev = np.array([severity_at(t, config.schedule) for t in range(1, T + 1)], dtype=np.int64)
    return Stream(probs, labels, sev)


def crossing_profiles(sharpness: float = 3.0) -> tuple[ModelProfile, ModelProfile]:
    """Model A leads when clean and collapses under shift; model B is flat."""
    return (ModelProfile(0.9, 0.15, sharpness), ModelProfile(0.6, 0.0, sharpness))


def crossing_config(seed: int = 0, horizon: int = 5000, mode: str = SUDDEN, num_classes: int = 10,
                    batch_size: int = 500, max_severity: int = 5) -> StreamConfig:
    return StreamConfig(num_classes=num_classes, num_models=2, horizon=horizon,
                        schedule=ShiftSchedule(mode, batch_size, max_severity),
                        profiles=crossing_profiles(), seed=seed)


def stationary_config(seed: int = 0, horizon: int = 5000, num_classes: int = 10,
                      num_models: int = 4) -> StreamConfig:
    accs = (0.85, 0.75, 0.65, 0.55, 0.45, 0.35)
    if num_models > len(accs):
        accs = accs + (0.3,) * (num_models - len(accs))
    profiles = tuple(ModelProfile(a, 0.0) for a in accs[:num_models])
    return StreamConfig(num_classes=num_classes, num_models=num_models, horizon=horizon,
                        schedule=ShiftSchedule(STATIONARY), profiles=profiles, seed=seed)
