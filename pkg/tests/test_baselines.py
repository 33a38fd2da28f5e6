import numpy as np
import pytest

from confstream.baselines import OgdBaseline
from confstream.ocp import OcpParams, SfogdState, miss_indicator, pinball_grad, sfogd_step
from confstream.scoring import CalibrationStore, ScoreParams, alpha_bar, raps_scores

PARAMS = OcpParams(0.1, 0.05)


def test_advance_matches_sfogd():
    rng = np.random.default_rng(0)
    base = OgdBaseline(1, 0, PARAMS)
    state = SfogdState(0.1)
    for b in rng.random(200):
        base.advance(b)
        state = sfogd_step(state, pinball_grad(miss_indicator(b, state.alpha), 0.1), 0.05)
        assert base.alpha == state.alpha


def test_advance_returns_loss_and_miss():
    base = OgdBaseline(1, 0, PARAMS)
    assert base.advance(0.05) == (pytest.approx(0.045), 1)
    assert base.advance(0.9) == (pytest.approx(0.1 * (0.9 - 0.05)), 0)


def test_step_feeds_every_store():
    rng = np.random.default_rng(1)
    base = OgdBaseline(3, 2, PARAMS)
    shadow = [CalibrationStore() for _ in range(3)]
    for t in range(1, 60):
        probs = rng.dirichlet(np.ones(5), size=3)
        u = float(rng.random())
        y = int(rng.integers(5))
        pset, rec = base.step(probs, y, u)
        true = raps_scores(probs, u, ScoreParams())[:, y]
        want = [alpha_bar(s, st, t) for s, st in zip(true, shadow)]
        for s, st in zip(true, shadow):
            st.insert(s)
        assert rec.alpha_bars == pytest.approx(tuple(want))
        assert rec.model == 2 and rec.model_mass == (0.0, 0.0, 1.0)
        assert rec.err == int(y not in pset.labels)
    assert [s.count for s in base.stores] == [59] * 3


def test_model_index_range():
    with pytest.raises(ValueError):
        OgdBaseline(2, 2)
    with pytest.raises(ValueError):
        OgdBaseline(2, 0).step(np.full((2, 3), 1 / 3), 5, 0.5)
