"""Strongly adaptive multi-model online conformal prediction.

A new MOCP expert is born at every step with a geometric-covering lifetime;
active experts are combined with meta-weights that track their loss relative
to the learner. Expert state is held as struct-of-arrays (one row per active
expert, in birth order) so the per-step update runs in a single kernel call.
"""

from __future__ import annotations

import bisect
import heapq
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from confstream import kernels
from confstream.metrics import StepRecord
from confstream.mocp import DETERMINISTIC, MODES, SAMPLE, MocpExpert, inverse_cdf
from confstream.ocp import OcpParams
from confstream.scoring import CalibrationStore, ScoreParams, alpha_bar, quantile_threshold, raps_scores, \
    set_from_scores, PredictionSet

CORRECTED = "corrected"
PAPER = "paper"
SIGN_MODES = {CORRECTED: 1.0, PAPER: -1.0}


class StreamStateError(RuntimeError):
    """Raised when a step is fed data inconsistent with the learner's state."""


def lifetime(t: int, g: int) -> int:
    """``g`` times the largest power of two dividing ``t``."""
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    if g < 1:
        raise ValueError(f"g must be >= 1, got {g}")
    return g * (t & -t)


def expert_step_size(life: int, epsilon: float, sigma: float) -> float:
    return min(epsilon, sigma / math.sqrt(life))


def max_active(t: int, g: int) -> int:
    return g * (int(math.floor(math.log2(t))) + 1)


@dataclass
class Expert:
    birth: int
    lifetime: int
    step_size: float
    meta_weight: float
    mocp: MocpExpert | None = None

    @property
    def last_active(self) -> int:
        return self.birth + self.lifetime - 1

    def is_active(self, t: int) -> bool:
        return self.birth <= t <= self.last_active


def meta_weight_update(expert: Expert, learner_loss: float, expert_loss: float,
                       sign_mode: str = CORRECTED, t: int | None = None) -> Expert:
    """Meta-weight after one step; ``r = learner_loss - expert_loss``.

    ``corrected`` multiplies by ``exp(+eps * r)`` (experts that beat the learner
    gain weight); ``paper`` uses the literal ``exp(-eps * r)``. When ``t`` is
    given and the expert has no further active step, the weight drops to 0.
    """
    sign = SIGN_MODES[sign_mode]
    if t is not None and not expert.birth <= t < expert.last_active:
        h = 0.0
    else:
        h = expert.meta_weight * math.exp(sign * expert.step_size * (learner_loss - expert_loss))
    return Expert(expert.birth, expert.lifetime, expert.step_size, h, expert.mocp)


class Selection(NamedTuple):
    expert: int  # birth time of the selected expert
    model: int
    alpha: float
    model_mass: np.ndarray


class CoveringSchedule:
    """Birth/retirement bookkeeping only (no learner state).

    ``births`` and ``ends`` stay in birth order; a heap of end times finds the
    experts that expire at a given step without scanning the active set.
    """

    def __init__(self, g: int):
        if g < 1:
            raise ValueError(f"g must be >= 1, got {g}")
        self.g = g
        self.births: list[int] = []
        self.ends: list[int] = []
        self._heap: list[tuple[int, int]] = []

    def spawn(self, t: int) -> int:
        life = lifetime(t, self.g)
        self.births.append(t)
        self.ends.append(t + life - 1)
        heapq.heappush(self._heap, (t + life - 1, t))
        return life

    def expire(self, t: int) -> list[int]:
        """Drop experts whose last active step is before ``t``.

        Returns their positions (ascending) in the order held before the call.
        """
        gone = []
        while self._heap and self._heap[0][0] < t:
            gone.append(heapq.heappop(self._heap)[1])
        if not gone:
            return gone
        pos = sorted(bisect.bisect_left(self.births, b) for b in gone)
        for i in reversed(pos):
            del self.births[i]
            del self.ends[i]
        return pos

    def __len__(self) -> int:
        return len(self.births)


class Samocp:
    """Online learner over ``num_models`` candidate models.

    ``step`` runs one full round on model outputs. ``begin``/``finish`` split a
    round around set construction so that scripted alpha_bar sequences can
    drive the learner directly.
    """

    def __init__(self, num_models: int, params: OcpParams = OcpParams(), *, g: int = 8,
                 sigma: float = 140.0, epsilon: float = 0.9, mode: str = DETERMINISTIC,
                 sign_mode: str = CORRECTED, score_params: ScoreParams = ScoreParams()):
        if num_models < 1:
            raise ValueError("need at least one model")
        if not 0.0 < epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
        if not sigma > 1.0:
            raise ValueError(f"sigma must exceed 1, got {sigma}")
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        if sign_mode not in SIGN_MODES:
            raise ValueError(f"unknown sign mode {sign_mode!r}")
        self.num_models = num_models
        self.params = params
        self.g = g
        self.sigma = sigma
        self.epsilon = epsilon
        self.mode = mode
        self.sign_mode = sign_mode
        self.score_params = score_params
        self.stores = [CalibrationStore() for _ in range(num_models)]
        self.t = 0
        self.last_learner_alpha = params.target_alpha
        self.schedule = CoveringSchedule(g)

        cap = max(16, max_active(1024, g))
        self._alloc(cap)
        self.n = 0
        self._pending: Selection | None = None
        self._prev_joint = np.zeros((0, num_models))
        self._prev_births = np.zeros(0, dtype=np.int64)

    def _alloc(self, cap: int) -> None:
        m = self.num_models
        old = getattr(self, "alpha", None)
        arrays = {
            "alpha": np.zeros((cap, m)), "cumsq": np.zeros((cap, m)), "logw": np.zeros((cap, m)),
            "wbar": np.zeros((cap, m)), "logh": np.zeros(cap), "hbar": np.zeros(cap),
            "eps": np.zeros(cap), "birth": np.zeros(cap, dtype=np.int64), "life": np.zeros(cap, dtype=np.int64),
        }
        if old is not None:
            for name, arr in arrays.items():
                arr[: self.n] = getattr(self, name)[: self.n]
        for name, arr in arrays.items():
            setattr(self, name, arr)
        self.mass = np.zeros(m)

    @property
    def cap(self) -> int:
        return self.alpha.shape[0]

    # -- expert lifecycle ------------------------------------------------

    def spawn_expert(self, t: int) -> Expert:
        if self.n == self.cap:
            self._alloc(2 * self.cap)
        life = self.schedule.spawn(t)
        eps = expert_step_size(life, self.epsilon, self.sigma)
        i = self.n
        self.alpha[i] = self.last_learner_alpha
        self.cumsq[i] = 0.0
        self.logw[i] = -math.log(self.num_models)
        self.logh[i] = math.log(eps)
        self.eps[i] = eps
        self.birth[i] = t
        self.life[i] = life
        self.n += 1
        return self.expert(i)

    def retire_expired(self, t: int) -> int:
        gone = self.schedule.expire(t)
        if not gone:
            return 0
        keep = np.ones(self.n, dtype=bool)
        keep[gone] = False
        idx = np.flatnonzero(keep)
        removed = len(gone)
        for arr in (self.alpha, self.cumsq, self.logw, self.logh, self.eps, self.birth, self.life):
            arr[: idx.size] = arr[idx]
        self.n = idx.size
        return removed

    def expert(self, i: int) -> Expert:
        mocp = MocpExpert(self.alpha[i].copy(), self.cumsq[i].copy(), self.logw[i].copy(),
                          float(self.eps[i]), self.params)
        return Expert(int(self.birth[i]), int(self.life[i]), float(self.eps[i]),
                      float(np.exp(self.logh[i])), mocp)

    def experts(self) -> list[Expert]:
        return [self.expert(i) for i in range(self.n)]

    def active_births(self) -> list[int]:
        return [int(b) for b in self.birth[: self.n]]

    def meta_distribution(self) -> np.ndarray:
        lh = self.logh[: self.n]
        e = np.exp(lh - lh.max())
        return e / e.sum()

    # -- one round -------------------------------------------------------

    def select(self, rand_expert: float = 0.0, rand_model: float = 0.0) -> Selection:
        n = self.n
        if n == 0:
            raise StreamStateError("no active experts")
        mix = kernels.aggregate(self.alpha, self.logw, self.logh, n, self.wbar, self.hbar, self.mass)
        mass = self.mass.copy()
        if self.mode == SAMPLE:
            i = inverse_cdf(self.hbar[:n], rand_expert)
            m = inverse_cdf(self.wbar[i], rand_model)
            return Selection(int(self.birth[i]), m, float(self.alpha[i, m]), mass)
        i = int(np.argmax(self.hbar[:n]))
        return Selection(int(self.birth[i]), int(np.argmax(mass)), float(mix), mass)

    def begin(self, rand_expert: float = 0.0, rand_model: float = 0.0) -> Selection:
        """Spawn, retire and select for step ``t + 1``."""
        if self._pending is not None:
            raise StreamStateError("begin() called twice without finish()")
        t = self.t + 1
        self.spawn_expert(t)
        self.retire_expired(t)
        self._pending = self.select(rand_expert, rand_model)
        return self._pending

    def finish(self, alpha_bars: Sequence[float]) -> tuple[float, float, float]:
        """Update all active experts from this step's alpha_bars.

        Returns (learner_loss, expected_err, weight_drift).
        """
        sel = self._pending
        if sel is None:
            raise StreamStateError("finish() called before begin()")
        bars = np.ascontiguousarray(alpha_bars, dtype=np.float64)
        if bars.shape != (self.num_models,):
            raise ValueError(f"expected {self.num_models} alpha_bar values, got {bars.shape}")
        n = self.n
        if self.mode == SAMPLE:
            sel_n = int(np.searchsorted(self.birth[:n], sel.expert))
            sel_m = sel.model
        else:
            sel_n = sel_m = -1
        joint = self.hbar[:n, None] * self.wbar[:n]
        cs_before = self.cumsq[:n].copy()
        learner_loss, expected_err = kernels.update(
            self.alpha, self.cumsq, self.logw, self.logh, self.eps, self.wbar, self.hbar, n, bars,
            self.params.target_alpha, self.params.eta, sel_n, sel_m, SIGN_MODES[self.sign_mode])
        drift = self._drift(joint, cs_before)
        self.last_learner_alpha = sel.alpha
        self.t += 1
        self._pending = None
        return learner_loss, expected_err, drift

    def _drift(self, joint: np.ndarray, cs_before: np.ndarray) -> float:
        # sum |p_t - p_{t-1} * H_{t-1} / H_t| over experts active at t, p = hbar * wbar
        births = self.birth[: self.n]
        prev = np.zeros_like(joint)
        pos = np.searchsorted(self._prev_births, births)
        pos = np.minimum(pos, max(self._prev_births.size - 1, 0))
        if self._prev_births.size:
            hit = self._prev_births[pos] == births
            prev[hit] = self._prev_joint[pos[hit]]
        cs_after = self.cumsq[: self.n]
        ratio = np.sqrt(np.divide(cs_before, cs_after, out=np.zeros_like(cs_after), where=cs_after > 0))
        self._prev_joint = joint
        self._prev_births = births.copy()
        return float(np.abs(joint - prev * ratio).sum())

    def step(self, probs, label: int, u: float, rand_expert: float = 0.0,
             rand_model: float = 0.0) -> tuple[PredictionSet, StepRecord]:
        probs = np.ascontiguousarray(probs, dtype=np.float64)
        if probs.ndim != 2 or probs.shape[0] != self.num_models:
            raise ValueError(f"expected ({self.num_models}, K) probabilities, got {probs.shape}")
        k = probs.shape[1]
        if not 0 <= label < k:
            raise StreamStateError(f"label {label} outside 0..{k - 1}")
        t = self.t + 1
        if any(s.count != t - 1 for s in self.stores):
            raise StreamStateError(f"calibration stores must hold {t - 1} scores at step {t}")
        sel = self.begin(rand_expert, rand_model)
        scores = raps_scores(probs, u, self.score_params)
        pset = set_from_scores(scores[sel.model], quantile_threshold(self.stores[sel.model], sel.alpha, t),
                               sel.alpha)
        true_scores = scores[:, label]
        bars = [alpha_bar(s, store, t) for s, store in zip(true_scores, self.stores)]
        n_active = self.n
        learner_loss, expected_err, drift = self.finish(bars)
        for s, store in zip(true_scores, self.stores):
            store.insert(s)
        record = StepRecord(
            t=t, err=int(label not in pset), expected_err=expected_err, width=pset.width,
            learner_loss=learner_loss, alpha_bars=tuple(bars), learner_alpha=sel.alpha,
            expert=sel.expert, model=sel.model, model_mass=tuple(float(x) for x in sel.model_mass),
            n_active=n_active, weight_drift=drift,
        )
        return pset, record

    def alpha_bounds(self) -> tuple[float, float]:
        a = self.alpha[: self.n]
        return float(a.min()), float(a.max())
