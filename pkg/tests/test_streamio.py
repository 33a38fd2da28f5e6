import json

import numpy as np
import pytest

from confstream.scoring import ScoreParams
from confstream.simulator import crossing_config, generate_stream
from confstream.streamio import StreamFormatError, read_stream, validate_stream, write_stream


def write_lines(path, header, rows):
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for r in rows:
            fh.write((r if isinstance(r, str) else json.dumps(r)) + "\n")
    return path


HEADER = {"k": 3, "m": 2, "xi": 0.1, "k_reg": 1}
GOOD = {"t": 1, "probs": [[0.2, 0.3, 0.5], [0.6, 0.2, 0.2]], "label": 2}


def test_round_trip(tmp_path):
    stream = generate_stream(crossing_config(seed=3, horizon=50))
    write_stream(tmp_path / "s.jsonl", stream, ScoreParams(0.2, 2))
    assert validate_stream(tmp_path / "s.jsonl") == []
    header, back = read_stream(tmp_path / "s.jsonl")
    assert header.score_params == ScoreParams(0.2, 2)
    np.testing.assert_array_equal(back.probs, stream.probs)
    np.testing.assert_array_equal(back.labels, stream.labels)


def test_valid_minimal(tmp_path):
    assert validate_stream(write_lines(tmp_path / "s", HEADER, [GOOD])) == []


@pytest.mark.parametrize("row,needle", [
    ({**GOOD, "label": 3}, "label 3 outside 0..2"),
    ({**GOOD, "probs": GOOD["probs"][:1]}, "expected 2 probability rows"),
    ({**GOOD, "probs": [[0.2, 0.3, 0.3], [0.6, 0.2, 0.2]]}, "sum to 0.8"),
    ({**GOOD, "probs": [[0.2, 0.3], [0.6, 0.2, 0.2]]}, "expected 3 probabilities"),
    ({**GOOD, "probs": [[-0.1, 0.6, 0.5], [0.6, 0.2, 0.2]]}, "outside [0, 1]"),
    ({"t": 1, "probs": GOOD["probs"]}, "missing 'label'"),
    ("{not json", "invalid JSON"),
])
def test_row_violations_name_the_line(tmp_path, row, needle):
    path = write_lines(tmp_path / "s", HEADER, [GOOD | {"t": 0}, row])
    problems = validate_stream(path)
    assert problems and problems[0][0] == 3
    assert needle in problems[0][1]
    with pytest.raises(StreamFormatError) as info:
        read_stream(path)
    assert info.value.line == 3


def test_sum_tolerance(tmp_path):
    row = {**GOOD, "probs": [[0.2, 0.3, 0.5 + 5e-7], [0.6, 0.2, 0.2]]}
    assert validate_stream(write_lines(tmp_path / "s", HEADER, [row])) == []


def test_time_must_increase(tmp_path):
    problems = validate_stream(write_lines(tmp_path / "s", HEADER, [GOOD, GOOD]))
    assert problems == [(3, "t=1 does not increase (previous 1)")]


@pytest.mark.parametrize("header", [{"k": 3, "m": 2, "xi": 0.1}, {"k": 1, "m": 2, "xi": 0.1, "k_reg": 1},
                                    {"k": 3, "m": 2, "xi": -1, "k_reg": 1}])
def test_bad_header(tmp_path, header):
    problems = validate_stream(write_lines(tmp_path / "s", header, [GOOD]))
    assert len(problems) == 1 and problems[0][0] == 1


def test_no_instances(tmp_path):
    with pytest.raises(StreamFormatError):
        read_stream(write_lines(tmp_path / "s", HEADER, []))
