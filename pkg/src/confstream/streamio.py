"""JSON Lines stream files.

Line 1 is a header ``{"k": K, "m": M, "xi": ..., "k_reg": ...}``; every
following line is ``{"t": int, "probs": [[K reals] x M], "label": int}`` with
strictly increasing ``t``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from confstream.scoring import ScoreParams
from confstream.simulator import Stream

PROB_TOL = 1e-6


class StreamFormatError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


@dataclass(frozen=True)
class StreamHeader:
    k: int
    m: int
    xi: float
    k_reg: int

    @property
    def score_params(self) -> ScoreParams:
        return ScoreParams(self.xi, self.k_reg)


def write_stream(path, stream: Stream, score_params: ScoreParams) -> None:
    _, m, k = stream.probs.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"k": k, "m": m, "xi": score_params.xi, "k_reg": score_params.k_reg}) + "\n")
        for i, (p, y) in enumerate(stream):
            fh.write(json.dumps({"t": i + 1, "probs": p.tolist(), "label": y}) + "\n")


def _parse_header(text: str) -> StreamHeader:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StreamFormatError(1, f"invalid JSON ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise StreamFormatError(1, "header must be a JSON object")
    for key in ("k", "m", "xi", "k_reg"):
        if key not in obj:
            raise StreamFormatError(1, f"header missing {key!r}")
    k, m = obj["k"], obj["m"]
    if not (isinstance(k, int) and k >= 2 and isinstance(m, int) and m >= 1):
        raise StreamFormatError(1, "header needs integer k >= 2 and m >= 1")
    try:
        ScoreParams(float(obj["xi"]), obj["k_reg"])
    except (TypeError, ValueError) as exc:
        raise StreamFormatError(1, str(exc)) from None
    return StreamHeader(k, m, float(obj["xi"]), int(obj["k_reg"]))


def _check_row(obj, header: StreamHeader, last_t: int | None) -> list[str]:
    if not isinstance(obj, dict):
        return ["row must be a JSON object"]
    problems = []
    for key in ("t", "probs", "label"):
        if key not in obj:
            problems.append(f"missing {key!r}")
    if problems:
        return problems
    t, probs, label = obj["t"], obj["probs"], obj["label"]
    if not isinstance(t, int) or isinstance(t, bool):
        problems.append("t must be an integer")
    elif last_t is not None and t <= last_t:
        problems.append(f"t={t} does not increase (previous {last_t})")
    if not isinstance(label, int) or isinstance(label, bool) or not 0 <= label < header.k:
        problems.append(f"label {label!r} outside 0..{header.k - 1}")
    if not isinstance(probs, list) or len(probs) != header.m:
        n = len(probs) if isinstance(probs, list) else "non-list"
        problems.append(f"expected {header.m} probability rows, got {n}")
        return problems
    for i, row in enumerate(probs):
        if not isinstance(row, list) or len(row) != header.k:
            problems.append(f"model {i}: expected {header.k} probabilities")
            continue
        if not all(isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x) for x in row):
            problems.append(f"model {i}: non-numeric probability")
            continue
        if any(x < 0 or x > 1 for x in row):
            problems.append(f"model {i}: probability outside [0, 1]")
        s = math.fsum(row)
        if abs(s - 1.0) > PROB_TOL:
            problems.append(f"model {i}: probabilities sum to {s!r}")
    return problems


def _rows(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, text in enumerate(fh, start=1):
            yield lineno, text


def validate_stream(path) -> list[tuple[int, str]]:
    """All violations as (line, message); empty when the file is well formed."""
    violations: list[tuple[int, str]] = []
    header = None
    last_t = None
    for lineno, text in _rows(path):
        if lineno == 1:
            try:
                header = _parse_header(text)
            except StreamFormatError as exc:
                return [(exc.line, exc.message)]
            continue
        if not text.strip():
            violations.append((lineno, "blank line"))
            continue
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            violations.append((lineno, f"invalid JSON ({exc.msg})"))
            continue
        violations.extend((lineno, p) for p in _check_row(obj, header, last_t))
        if isinstance(obj, dict) and isinstance(obj.get("t"), int):
            last_t = obj["t"] if last_t is None else max(last_t, obj["t"])
    if header is None:
        violations.append((1, "empty file"))
    return violations


def read_stream(path) -> tuple[StreamHeader, Stream]:
    """Parse a stream file, raising ``StreamFormatError`` at the first bad line."""
    header = None
    probs, labels = [], []
    last_t = None
    for lineno, text in _rows(path):
        if lineno == 1:
            header = _parse_header(text)
            continue
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise StreamFormatError(lineno, f"invalid JSON ({exc.msg})") from None
        problems = _check_row(obj, header, last_t)
        if problems:
            raise StreamFormatError(lineno, "; ".join(problems))
        last_t = obj["t"]
        probs.append(obj["probs"])
        labels.append(obj["label"])
    if header is None:
        raise StreamFormatError(1, "empty file")
    if not labels:
        raise StreamFormatError(2, "stream has no instances")
    arr = np.asarray(probs, dtype=np.float64).reshape(len(labels), header.m, header.k)
    return header, Stream(arr, np.asarray(labels, dtype=np.int64), np.zeros(len(labels), dtype=np.int64))
