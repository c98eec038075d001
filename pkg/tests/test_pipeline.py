import numpy as np
import pytest

from coarseglue.groups import MarkedGroup
from coarseglue.hilbert import interval_width
from coarseglue.pipeline import relhyp_embed_pipeline


def test_integer_group_is_interval_map():
    eta, rep = relhyp_embed_pipeline(MarkedGroup([0], 5), 2, 0.5)
    assert rep.passed
    T = interval_width(2, 0.5)
    assert T == 32
    exps = np.array([0 if not g else g[0][1] for g in _elements(eta, MarkedGroup([0], 5))])
    want = np.maximum(0, T - np.abs(exps[:, None] - exps[None, :])) / T
    assert np.allclose(eta.gram(), want, atol=1e-12)
    assert rep.certificate.decay_values[-1] == pytest.approx(1 - 10 / 32)


def _elements(eta, group):
    return [group.parse(lab) for lab in eta.space.labels]


def test_finite_factors_give_constant_map():
    eta, rep = relhyp_embed_pipeline(MarkedGroup([2, 2], 8), 2, 0.5)
    assert rep.passed
    assert rep.n_elements == 17
    assert rep.certificate.max_close_diff == 0
    # measured: every piece is a constant map, so nothing decays
    assert rep.certificate.decay_values == [1.0] * 17


def test_small_free_group():
    eta, rep = relhyp_embed_pipeline(MarkedGroup([0, 0], 3), 1, 0.5)
    assert rep.passed
    assert all(s.passed for s in rep.stages)
    assert rep.certificate.max_close_diff <= 0.5
    assert eta.norm_error() <= 1e-9
    assert rep.metric_check["s"]["agree"] and rep.metric_check["rel"]["agree"]
    names = [s.name for s in rep.stages]
    assert names[0] == "ball[1]" and names[-1] == "ball[3]"
    assert {c["n"] for c in rep.recursion_checks} == {1, 2, 3}


def test_mixed_factors():
    eta, rep = relhyp_embed_pipeline(MarkedGroup([0, 3], 3), 1, 0.4)
    assert rep.passed
    assert rep.certificate.max_close_diff <= 0.4


def test_piece_budget_uses_measured_variation():
    eta, rep = relhyp_embed_pipeline(MarkedGroup([0, 0], 2), 1, 0.5)
    for s in rep.stages:
        assert s.piece_eps == pytest.approx(s.eps - np.sqrt(s.variation))
        assert s.piece_eps >= s.eps / 2
