"""Per-step records and the evaluation metrics computed from them."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


@dataclass(frozen=True)
class StepRecord:
    t: int
    err: int
    expected_err: float
    width: int
    learner_loss: float
    alpha_bars: tuple[float, ...]
    learner_alpha: float
    expert: int
    model: int
    model_mass: tuple[float, ...] = ()
    n_active: int = 1
    weight_drift: float = 0.0


@dataclass
class MetricsReport:
    steps: int
    target_alpha: float
    coverage: float
    cove: float
    avg_width: float
    single_width: float
    avg_regret: float
    regret_window: int
    window_regrets: list[float] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        return cls(**json.loads(text))


def _nonempty(records: Sequence[StepRecord]) -> None:
    if len(records) == 0:
        raise ValueError("no step records")


def coverage(records: Sequence[StepRecord]) -> float:
    _nonempty(records)
    return 100.0 * (1.0 - sum(r.err for r in records) / len(records))


def coverage_error(records: Sequence[StepRecord], target_alpha: float) -> float:
    _nonempty(records)
    return abs(math.fsum(r.expected_err for r in records) / len(records) - target_alpha)


def avg_width(records: Sequence[StepRecord]) -> float:
    _nonempty(records)
    return sum(r.width for r in records) / len(records)


def single_width(records: Sequence[StepRecord]) -> float:
    _nonempty(records)
    return sum(1 for r in records if r.width == 1 and r.err == 0) / len(records)


def _window_comparator(bars: np.ndarray, window: int, stride: int, target_alpha: float) -> np.ndarray:
    """Best fixed (model, alpha) loss for each window; ``bars`` has shape (T, M)."""
    best = None
    k = min(max(math.ceil(window * target_alpha - 1e-9), 1), window)
    for m in range(bars.shape[1]):
        wins = sliding_window_view(bars[:, m], window)[::stride]
        a_star = np.partition(wins, k - 1, axis=1)[:, k - 1 : k]
        d = wins - a_star
        loss = (target_alpha * d - np.minimum(0.0, d)).sum(axis=1)
        best = loss if best is None else np.minimum(best, loss)
    return best


def window_regrets(records: Sequence[StepRecord], window: int, target_alpha: float,
                   stride: int | None = None) -> list[tuple[int, int, float]]:
    """(start_t, end_t, regret) per window.

    Default stride equals the window (disjoint tiling, trailing partial window
    dropped). Regret is the summed learner loss minus the best fixed
    (model, alpha) loss inside the window.
    """
    if window <= 0:
        raise ValueError(f"window must be positive, got {window}")
    stride = window if stride is None else stride
    if stride <= 0:
        raise ValueError(f"stride must be positive, got {stride}")
    if window > len(records):
        return []
    bars = np.array([r.alpha_bars for r in records], dtype=np.float64)
    losses = np.array([r.learner_loss for r in records], dtype=np.float64)
    learner = sliding_window_view(losses, window)[::stride].sum(axis=1)
    regrets = learner - _window_comparator(bars, window, stride, target_alpha)
    t0 = records[0].t
    return [(t0 + i * stride, t0 + i * stride + window - 1, float(r)) for i, r in enumerate(regrets)]


def windowed_regret(records: Sequence[StepRecord], window: int, target_alpha: float,
                    stride: int | None = None) -> list[float]:
    return [r for _, _, r in window_regrets(records, window, target_alpha, stride)]


def regret_by_width(records: Sequence[StepRecord], widths: Sequence[int], target_alpha: float,
                    stride: int | None = None) -> list[dict]:
    """Sliding-window regret sweep over interval widths.

    ``normalized`` divides the worst window by sqrt(width) * (1 + ln T), the
    shape of the strongly adaptive bound.
    """
    rows = []
    scale_t = 1.0 + math.log(len(records))
    for w in widths:
        regs = windowed_regret(records, w, target_alpha, stride or max(1, w // 2))
        if not regs:
            continue
        worst = max(regs)
        rows.append({
            "width": w,
            "windows": len(regs),
            "mean_regret": float(np.mean(regs)),
            "max_regret": worst,
            "normalized": worst / (math.sqrt(w) * scale_t),
        })
    return rows


def build_report(records: Sequence[StepRecord], target_alpha: float, window: int = 100) -> MetricsReport:
    regs = windowed_regret(records, min(window, len(records)), target_alpha)
    return MetricsReport(
        steps=len(records),
        target_alpha=target_alpha,
        coverage=coverage(records),
        cove=coverage_error(records, target_alpha),
        avg_width=avg_width(records),
        single_width=single_width(records),
        avg_regret=float(np.mean(regs)) if regs else 0.0,
        regret_window=window,
        window_regrets=regs,
    )


STEP_COLUMNS = ["t", "err", "expected_err", "width", "learner_loss", "learner_alpha",
                "expert", "model", "n_active", "weight_drift"]


def _num(x) -> str:
    # shortest round-tripping text, also for numpy scalars
    return repr(float(x))


def write_steps_csv(records: Sequence[StepRecord], path: Path) -> None:
    m = len(records[0].alpha_bars) if records else 0
    header = STEP_COLUMNS + [f"alpha_bar_{i}" for i in range(m)] + [f"mass_{i}" for i in range(m)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in records:
            mass = r.model_mass or (0.0,) * m
            w.writerow([r.t, r.err, _num(r.expected_err), r.width, _num(r.learner_loss),
                        _num(r.learner_alpha), r.expert, r.model, r.n_active, _num(r.weight_drift)]
                       + [_num(x) for x in r.alpha_bars] + [_num(x) for x in mass])


def read_steps_csv(path: Path) -> list[StepRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        bars = tuple(float(row[k]) for k in sorted((k for k in row if k.startswith("alpha_bar_")),
                                                   key=lambda s: int(s.rsplit("_", 1)[1])))
        mass = tuple(float(row[k]) for k in sorted((k for k in row if k.startswith("mass_")),
                                                   key=lambda s: int(s.rsplit("_", 1)[1])))
        out.append(StepRecord(
            t=int(row["t"]), err=int(row["err"]), expected_err=float(row["expected_err"]),
            width=int(row["width"]), learner_loss=float(row["learner_loss"]),
            alpha_bars=bars, learner_alpha=float(row["learner_alpha"]), expert=int(row["expert"]),
            model=int(row["model"]), model_mass=mass, n_active=int(row["n_active"]),
            weight_drift=float(row["weight_drift"]),
        ))
    return out


def write_window_csv(rows: Sequence[tuple[int, int, float]], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["window_start", "window_end", "regret"])
        for start, end, reg in rows:
            w.writerow([start, end, _num(reg)])


def write_width_sweep_csv(rows: Sequence[dict], path: Path) -> None:
    cols = ["width", "windows", "mean_regret", "max_regret", "normalized"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (_num(v) if isinstance(v, float) else v) for k, v in row.items()})
