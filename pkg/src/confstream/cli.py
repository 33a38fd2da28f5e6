"""Command-line entry point.

    confstream run --method samocp --stream synthetic --mode deterministic --seed 7 --out results/
    confstream run --stream stream.jsonl --seeds 0..9 --out results/
    confstream export --seed 7 --out stream.jsonl
    confstream validate stream.jsonl

Exit codes: 0 success, 1 malformed configuration, 2 malformed stream file,
3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from confstream.metrics import (StepRecord, build_report, regret_by_width, window_regrets, write_steps_csv,
                                write_width_sweep_csv, write_window_csv)
from confstream.mocp import MODES
from confstream.runner import METHODS, LearnerConfig, run_config
from confstream.samocp import SIGN_MODES
from confstream.scoring import ScoreParams
from confstream.simulator import (GRADUAL, STATIONARY, SUDDEN, ShiftSchedule, StreamConfig, crossing_profiles,
                                  generate_stream, stationary_config)
from confstream.streamio import StreamFormatError, read_stream, validate_stream, write_stream

log = logging.getLogger("confstream")

EXIT_CONFIG, EXIT_STREAM, EXIT_INVARIANT = 1, 2, 3
DEFAULT_SWEEP = tuple(range(50, 501, 50))


class ConfigError(ValueError):
    pass


class InvariantViolation(RuntimeError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class RunConfig:
    learner: LearnerConfig
    stream: str  # "synthetic" or a path
    seed: int
    out: str
    xi: float | None = None
    k_reg: int | None = None
    scenario: str = "crossing"
    schedule: str = SUDDEN
    horizon: int = 5000
    num_classes: int = 10
    num_models: int = 4
    batch_size: int = 500
    max_severity: int = 5
    window: int = 100
    sweep: tuple[int, ...] = ()

    def synthetic_config(self) -> StreamConfig:
        if self.scenario == "crossing":
            return StreamConfig(self.num_classes, 2, self.horizon,
                                ShiftSchedule(self.schedule, self.batch_size, self.max_severity),
                                crossing_profiles(), self.seed)
        cfg = stationary_config(self.seed, self.horizon, self.num_classes, self.num_models)
        return StreamConfig(cfg.num_classes, cfg.num_models, cfg.horizon,
                            ShiftSchedule(self.schedule, self.batch_size, self.max_severity), cfg.profiles, self.seed)


def _add_synthetic_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("synthetic stream")
    g.add_argument("--scenario", choices=("crossing", "stationary"), default="crossing",
                   help="crossing: 2 models whose ranking flips with severity; stationary: fixed-accuracy models")
    g.add_argument("--schedule", choices=(SUDDEN, GRADUAL, STATIONARY), default=SUDDEN)
    g.add_argument("--horizon", type=int, default=5000)
    g.add_argument("--num-classes", type=int, default=10)
    g.add_argument("--num-models", type=int, default=4, help="stationary scenario only")
    g.add_argument("--batch-size", type=int, default=500)
    g.add_argument("--max-severity", type=int, default=5)


def _seed_range(text: str) -> list[int]:
    lo, sep, hi = text.partition("..")
    try:
        if not sep:
            return [int(lo)]
        a, b = int(lo), int(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N or A..B, got {text!r}") from None
    if b < a:
        raise argparse.ArgumentTypeError(f"empty seed range {text!r}")
    return list(range(a, b + 1))


def _widths(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated widths, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="confstream", description=__doc__.split("\n\n")[0])
    common = _Parser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a learner over a synthetic or recorded stream", parents=[common])
    run.add_argument("--method", choices=METHODS, default="samocp")
    run.add_argument("--mode", choices=MODES, default="deterministic")
    run.add_argument("--sign-mode", choices=sorted(SIGN_MODES), default="corrected")
    run.add_argument("--target-alpha", type=float, default=0.1)
    run.add_argument("--eta", type=float, default=0.05)
    run.add_argument("--epsilon", type=float, default=0.9)
    run.add_argument("--sigma", type=float, default=140.0)
    run.add_argument("--g", type=int, default=8)
    run.add_argument("--xi", type=float, default=None, help="defaults to the stream header, else 0.1")
    run.add_argument("--k-reg", type=int, default=None, help="defaults to the stream header, else 1")
    run.add_argument("--model-index", type=int, default=0, help="model used by ogd-baseline")
    run.add_argument("--stream", default="synthetic", help="'synthetic' or a JSONL stream file")
    seeds = run.add_mutually_exclusive_group()
    seeds.add_argument("--seed", type=int, default=0)
    seeds.add_argument("--seeds", type=_seed_range, default=None, help="A..B: independent runs in parallel")
    run.add_argument("--out", default="results")
    run.add_argument("--window", type=int, default=100, help="regret window length")
    run.add_argument("--regret-sweep", nargs="?", const=DEFAULT_SWEEP, type=_widths, default=(),
                     help="also write regret_by_width.csv (default widths 50,100,...,500)")
    _add_synthetic_args(run)

    exp = sub.add_parser("export", help="write a synthetic stream as JSONL", parents=[common])
    exp.add_argument("--seed", type=int, default=0)
    exp.add_argument("--out", required=True)
    exp.add_argument("--xi", type=float, default=0.1)
    exp.add_argument("--k-reg", type=int, default=1)
    _add_synthetic_args(exp)

    val = sub.add_parser("validate", help="check a JSONL stream file", parents=[common])
    val.add_argument("path")
    return parser


def _check_records(records: list[StepRecord], cfg: LearnerConfig, k: int) -> None:
    lo, hi = -cfg.eta - 1e-12, 1 + cfg.eta + 1e-12
    for r in records:
        if not lo <= r.learner_alpha <= hi:
            raise InvariantViolation(f"step {r.t}: alpha {r.learner_alpha} outside [-eta, 1+eta]")
        if not 0 <= r.width <= k or r.err not in (0, 1):
            raise InvariantViolation(f"step {r.t}: bad width/err ({r.width}, {r.err})")
        if not -1e-12 <= r.expected_err <= 1 + 1e-12:
            raise InvariantViolation(f"step {r.t}: expected_err {r.expected_err} outside [0, 1]")


def execute(cfg: RunConfig) -> dict:
    """One run: load or generate the stream, run, write artifacts; returns the report dict."""
    if cfg.stream == "synthetic":
        stream = generate_stream(cfg.synthetic_config())
        header_params = ScoreParams()
    else:
        header, stream = read_stream(cfg.stream)
        header_params = header.score_params
    score_params = ScoreParams(header_params.xi if cfg.xi is None else cfg.xi,
                               header_params.k_reg if cfg.k_reg is None else cfg.k_reg)
    if cfg.learner.method == "ogd-baseline" and not 0 <= cfg.learner.model_index < stream.probs.shape[1]:
        raise ConfigError(f"model index {cfg.learner.model_index} outside 0..{stream.probs.shape[1] - 1}")
    records = run_config(cfg.learner, stream, score_params, cfg.seed)
    _check_records(records, cfg.learner, stream.probs.shape[2])

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    report = build_report(records, cfg.learner.target_alpha, cfg.window)
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    write_steps_csv(records, out / "steps.csv")
    write_window_csv(window_regrets(records, min(cfg.window, len(records)), cfg.learner.target_alpha),
                     out / "window_regret.csv")
    if cfg.sweep:
        write_width_sweep_csv(regret_by_width(records, cfg.sweep, cfg.learner.target_alpha),
                              out / "regret_by_width.csv")
    meta = asdict(cfg)
    meta["score_params"] = asdict(score_params)
    (out / "run_config.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    log.info("seed %d: coverage %.2f%%, avg width %.3f", cfg.seed, report.coverage, report.avg_width)
    return asdict(report)


def _summarize(reports: dict[int, dict]) -> dict:
    keys = ("coverage", "cove", "avg_width", "single_width", "avg_regret")
    summary = {"seeds": sorted(reports)}
    for key in keys:
        vals = np.array([reports[s][key] for s in sorted(reports)])
        summary[key] = {"mean": float(vals.mean()), "std": float(vals.std())}
    return summary


def cmd_run(args) -> int:
    try:
        learner = LearnerConfig(args.method, args.mode, args.sign_mode, args.target_alpha, args.eta,
                                args.epsilon, args.sigma, args.g, args.model_index)
        if not 0 < args.epsilon < 1 or args.sigma <= 1 or args.g < 1 or args.window < 1:
            raise ConfigError("need 0 < epsilon < 1, sigma > 1, g >= 1, window >= 1")
        if args.xi is not None or args.k_reg is not None:
            ScoreParams(args.xi if args.xi is not None else 0.1, args.k_reg if args.k_reg is not None else 1)
        if args.stream != "synthetic" and not Path(args.stream).is_file():
            print(f"confstream: stream file not found: {args.stream}", file=sys.stderr)
            return EXIT_STREAM
        seeds = args.seeds or [args.seed]
        configs = []
        for s in seeds:
            out = args.out if args.seeds is None else os.path.join(args.out, f"seed_{s}")
            cfg = RunConfig(learner, args.stream, s, out, args.xi, args.k_reg, args.scenario, args.schedule,
                            args.horizon, args.num_classes, args.num_models, args.batch_size, args.max_severity,
                            args.window, tuple(args.regret_sweep))
            if cfg.stream == "synthetic":
                cfg.synthetic_config()
            configs.append(cfg)
    except ValueError as exc:
        print(f"confstream: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if len(configs) == 1:
            reports = {configs[0].seed: execute(configs[0])}
        else:
            workers = int(os.environ.get("CONFSTREAM_THREADS", os.cpu_count() or 1))
            with ProcessPoolExecutor(max_workers=max(1, min(workers, len(configs)))) as pool:
                reports = dict(zip(seeds, pool.map(execute, configs)))
            Path(args.out, "summary.json").write_text(
                json.dumps(_summarize(reports), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except StreamFormatError as exc:
        print(f"confstream: malformed stream {args.stream}: {exc}", file=sys.stderr)
        return EXIT_STREAM
    except ConfigError as exc:
        print(f"confstream: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"confstream: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    for s in sorted(reports):
        r = reports[s]
        print(f"seed {s}: coverage {r['coverage']:.2f}%  avg width {r['avg_width']:.3f}  "
              f"avg regret {r['avg_regret']:.4f}  single width {r['single_width']:.3f}")
    return 0


def cmd_export(args) -> int:
    try:
        cfg = RunConfig(LearnerConfig(), "synthetic", args.seed, "", None, None, args.scenario, args.schedule,
                        args.horizon, args.num_classes, args.num_models, args.batch_size, args.max_severity)
        stream = generate_stream(cfg.synthetic_config())
        params = ScoreParams(args.xi, args.k_reg)
    except ValueError as exc:
        print(f"confstream: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    write_stream(args.out, stream, params)
    print(f"wrote {len(stream)} instances to {args.out}")
    return 0


def cmd_validate(args) -> int:
    try:
        problems = validate_stream(args.path)
    except OSError as exc:
        print(f"confstream: cannot read {args.path}: {exc}", file=sys.stderr)
        return EXIT_STREAM
    if not problems:
        print("ok")
        return 0
    for line, msg in problems:
        print(f"{args.path}:{line}: {msg}")
    return EXIT_STREAM


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    return {"run": cmd_run, "export": cmd_export, "validate": cmd_validate}[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
