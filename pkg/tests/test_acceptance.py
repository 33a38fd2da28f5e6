"""End-to-end acceptance checks, one test per criterion.

Each test prints a PASS/FAIL line (repeated in the terminal summary) and
asserts both the criterion and its runtime budget.
"""

import math
import time

import numpy as np

from confstream import kernels
from confstream.baselines import OgdBaseline
from confstream.cli import main as cli_main
from confstream.metrics import coverage, coverage_error
from confstream.mocp import MocpLearner, mocp_init
from confstream.ocp import OcpParams, best_fixed_alpha
from confstream.runner import LearnerConfig, run_config, run_learner
from confstream.samocp import CoveringSchedule, Samocp, max_active
from confstream.scoring import CalibrationStore, ScoreParams, alpha_bar
from confstream.simulator import crossing_config, generate_stream, stationary_config

from oracles import grid_alpha_bar, grid_comparator

SEEDS10 = range(10)
SEEDS5 = range(5)


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def finish(report, number, name, ok, detail, timer, budget):
    in_time = timer.elapsed < budget
    report(number, name, ok and in_time, f"{detail}; {timer.elapsed:.2f}s (budget {budget}s)")
    assert ok, detail
    assert in_time, f"took {timer.elapsed:.2f}s, budget {budget}s"


def test_01_boundedness(report_criterion):
    rng = np.random.default_rng(101)
    n, m, steps = 16, 4, 100_000
    worst = []
    with Timer() as tm:
        for eta in (0.01, 0.05, 1.0):
            alpha = rng.random((n, m))
            cumsq, logw = np.zeros((n, m)), np.zeros((n, m))
            logh, eps = np.zeros(n), rng.uniform(0.01, 0.9, n)
            wbar, hbar, mass = np.zeros((n, m)), np.zeros(n), np.zeros(m)
            # a third of the draws sit on the extremes to push levels outward
            bars = rng.random((steps, m))
            edge = rng.random((steps, m)) < 0.33
            bars[edge] = rng.choice([0.0, 1.0], size=int(edge.sum()))
            lo, hi = math.inf, -math.inf
            for b in bars:
                kernels.aggregate(alpha, logw, logh, n, wbar, hbar, mass)
                kernels.update(alpha, cumsq, logw, logh, eps, wbar, hbar, n, b, 0.1, eta, -1, -1, 1.0)
                lo, hi = min(lo, alpha.min()), max(hi, alpha.max())
            worst.append((eta, lo, hi))
    ok = all(-eta <= lo and hi <= 1 + eta for eta, lo, hi in worst)
    detail = ", ".join(f"eta={eta}: [{lo:.4f}, {hi:.4f}]" for eta, lo, hi in worst)
    finish(report_criterion, 1, "boundedness", ok, f"{steps} steps x {n * m} slots; {detail}", tm, 5)


def test_02_alpha_bar_oracle(report_criterion):
    rng = np.random.default_rng(102)
    diffs = []
    with Timer() as tm:
        for _ in range(200):
            size = int(rng.integers(0, 80))
            # coarse rounding forces ties between stored and true scores
            scores = np.round(rng.random(size) * 3, int(rng.integers(1, 4)))
            store = CalibrationStore()
            for s in scores:
                store.insert(float(s))
            true = float(rng.choice(scores)) if size and rng.random() < 0.4 else float(rng.random() * 3.2)
            got = alpha_bar(true, store, size + 1)
            diffs.append(abs(got - grid_alpha_bar(true, np.sort(scores), size + 1)))
    # the supremum is not attained, so a grid point exactly at alpha_bar reads one step low
    ok = max(diffs) <= 1e-4 + 1e-12
    finish(report_criterion, 2, "alpha_bar oracle", ok, f"200 instances, max |diff| {max(diffs):.2e}", tm, 5)


def test_03_comparator_oracle(report_criterion):
    rng = np.random.default_rng(103)
    arg_gap, val_gap = 0.0, 0.0
    with Timer() as tm:
        for _ in range(100):
            n = int(rng.integers(1, 60))
            bars = rng.integers(0, 10_001, size=n) / 1e4
            target = float(rng.choice([0.05, 0.1, 0.2, 0.5, 0.9]))
            a, loss = best_fixed_alpha(bars, target)
            levels, losses = grid_comparator(bars, target)
            best = losses.min()
            minimizers = levels[losses <= best + 1e-9]
            val_gap = max(val_gap, abs(loss - best))
            arg_gap = max(arg_gap, float(np.min(np.abs(minimizers - a))))
    ok = val_gap <= 1e-6 and arg_gap <= 1e-4 + 1e-12
    finish(report_criterion, 3, "comparator oracle", ok,
           f"100 instances, value gap {val_gap:.2e}, argument gap {arg_gap:.2e}", tm, 5)


def test_04_static_regret_bound(report_criterion):
    target, eta, m = 0.1, 0.05, 4
    rows = []
    with Timer() as tm:
        for horizon in (100, 1000, 5000):
            bound = math.sqrt(horizon) * ((1 + 2 * eta) ** 2 / (2 * eta) + eta / (2 * target) + math.log(m)
                                          + (1 + eta) ** 2)
            for seed in SEEDS5:
                stream = generate_stream(stationary_config(seed, horizon, num_classes=10, num_models=m))
                learner = MocpLearner(m, OcpParams(target, eta), step_size=1 / math.sqrt(horizon))
                recs = run_learner(learner, stream, seed)
                bars = np.array([r.alpha_bars for r in recs])
                comparator = min(best_fixed_alpha(bars[:, j], target)[1] for j in range(m))
                rows.append((horizon, seed, math.fsum(r.learner_loss for r in recs) - comparator, bound))
    ok = all(reg <= bound for _, _, reg, bound in rows)
    worst = {h: max(reg for hh, _, reg, _ in rows if hh == h) for h in (100, 1000, 5000)}
    bounds = {h: b for h, _, _, b in rows}
    detail = ", ".join(f"T={h}: max regret {worst[h]:.2f} <= {bounds[h]:.1f}" for h in worst)
    finish(report_criterion, 4, "static regret bound", ok, detail, tm, 30)


def crossing_runs(cfg):
    out = []
    for seed in SEEDS10:
        stream = generate_stream(crossing_config(seed))
        out.append((stream, run_config(cfg, stream, ScoreParams(), seed)))
    return out


def test_05_coverage(report_criterion):
    with Timer() as tm:
        covs = [coverage(recs) for _, recs in crossing_runs(LearnerConfig())]
    mean = float(np.mean(covs))
    finish(report_criterion, 5, "coverage", 86.0 <= mean <= 94.0,
           f"mean {mean:.2f}% over 10 seeds (range {min(covs):.2f}-{max(covs):.2f})", tm, 60)


def test_06_width_and_adaptation(report_criterion):
    with Timer() as tm:
        runs = crossing_runs(LearnerConfig())
        widths = {"samocp": [], "ogd-A": [], "ogd-B": []}
        shifts = hits = sustained = 0
        for seed, (stream, recs) in zip(SEEDS10, runs):
            widths["samocp"].append(np.mean([r.width for r in recs]))
            for idx, key in ((0, "ogd-A"), (1, "ogd-B")):
                base = run_config(LearnerConfig(method="ogd-baseline", model_index=idx), stream, ScoreParams(), seed)
                widths[key].append(np.mean([r.width for r in base]))
            # model A is more accurate at severity 0, model B at the top severity
            starts = np.flatnonzero(np.diff(stream.severities)) + 1
            for s in starts:
                better = 0 if stream.severities[s] == 0 else 1
                mass = np.array([r.model_mass[better] for r in recs[s:s + 300]])
                shifts += 1
                hits += bool(mass.max() > 0.5)
                sustained += bool(mass[200:].mean() > 0.5)
    avg = {k: float(np.mean(v)) for k, v in widths.items()}
    best_base = min(avg["ogd-A"], avg["ogd-B"])
    rate = hits / shifts
    ok = avg["samocp"] <= best_base + 0.05 and rate >= 0.8
    detail = (f"width {avg['samocp']:.3f} vs best baseline {best_base:.3f}; mass > 0.5 within 300 steps "
              f"after {hits}/{shifts} shifts ({100 * rate:.1f}%); held over steps 200-300: {sustained}/{shifts}")
    finish(report_criterion, 6, "width and adaptation", ok, detail, tm, 120)


def test_07_cove_trend(report_criterion):
    horizons = (1000, 2000, 4000, 8000)
    table = np.zeros((len(SEEDS5), len(horizons)))
    with Timer() as tm:
        for i, seed in enumerate(SEEDS5):
            stream = generate_stream(stationary_config(seed, horizons[-1]))
            recs = run_config(LearnerConfig(), stream, ScoreParams(), seed)
            # the learner never sees the horizon and streams are prefix-stable
            table[i] = [coverage_error(recs[:h], 0.1) for h in horizons]
    mean = table.mean(axis=0)
    ok = all(b <= 1.2 * a for a, b in zip(mean, mean[1:]))
    detail = "mean CovE " + ", ".join(f"T={h}: {c:.4f}" for h, c in zip(horizons, mean))
    finish(report_criterion, 7, "CovE trend", ok, detail, tm, 120)


def test_08_schedule(report_criterion):
    # births and retirements for g = 1: expert t lives (t & -t) steps
    want = {1: [1], 2: [2], 3: [2, 3], 4: [4], 5: [4, 5]}
    with Timer() as tm:
        s = Samocp(1, g=1)
        seen = {}
        for t in range(1, 6):
            s.begin()
            seen[t] = s.active_births()
            s.finish([0.5])
        sets_ok = seen == want
        bound_ok = True
        peak = {}
        for g in (1, 8, 32):
            sched = CoveringSchedule(g)
            top = 0
            for t in range(1, 100_001):
                sched.spawn(t)
                sched.expire(t)
                top = max(top, len(sched))
                if len(sched) > max_active(t, g):
                    bound_ok = False
                    break
            peak[g] = top
    detail = f"g=1 active sets {seen}; peak |A(t)| to 1e5: " + ", ".join(f"g={g}: {p}" for g, p in peak.items())
    finish(report_criterion, 8, "expert schedule", sets_ok and bound_ok, detail, tm, 5)


def test_09_degenerate_equivalence(report_criterion):
    rng = np.random.default_rng(109)
    bars = np.where(rng.random(100) < 0.2, rng.choice([0.0, 1.0], 100), rng.random(100))
    params = OcpParams(0.1, 0.05)
    with Timer() as tm:
        base = OgdBaseline(1, 0, params)
        expert = mocp_init(1, params.target_alpha, params, 0.9)
        # the fused kernel on a single row that never retires
        alpha, cumsq, logw = np.full((1, 1), 0.1), np.zeros((1, 1)), np.zeros((1, 1))
        logh, eps = np.zeros(1), np.full(1, 0.9)
        wbar, hbar, mass = np.zeros((1, 1)), np.zeros(1), np.zeros(1)
        mismatches = 0
        for b in bars:
            row = np.array([b])
            mix = kernels.aggregate(alpha, logw, logh, 1, wbar, hbar, mass)
            mismatches += mix != base.alpha or expert.alpha[0] != base.alpha
            kernels.update(alpha, cumsq, logw, logh, eps, wbar, hbar, 1, row, 0.1, 0.05, -1, -1, 1.0)
            expert.update(row)
            base.advance(float(b))
        mismatches += alpha[0, 0] != base.alpha or expert.alpha[0] != base.alpha
    finish(report_criterion, 9, "degenerate equivalence", mismatches == 0,
           f"100 scripted steps, {mismatches} trajectory mismatches", tm, 1)


def test_10_determinism_and_replay(report_criterion, tmp_path, capsys):
    with Timer() as tm:
        codes = [
            cli_main(["run", "--seed", "7", "--out", str(tmp_path / "a")]),
            cli_main(["run", "--seed", "7", "--out", str(tmp_path / "b")]),
            cli_main(["export", "--seed", "7", "--out", str(tmp_path / "s.jsonl")]),
            cli_main(["run", "--stream", str(tmp_path / "s.jsonl"), "--seed", "7", "--out", str(tmp_path / "c")]),
        ]
        same_steps = (tmp_path / "a" / "steps.csv").read_bytes() == (tmp_path / "b" / "steps.csv").read_bytes()
        same_report = (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "c" / "report.json").read_bytes()
    capsys.readouterr()
    ok = codes == [0, 0, 0, 0] and same_steps and same_report
    finish(report_criterion, 10, "determinism and replay", ok,
           f"exit codes {codes}, steps.csv identical: {same_steps}, replayed report.json identical: {same_report}",
           tm, 30)
