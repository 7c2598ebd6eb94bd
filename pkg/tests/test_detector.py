import pytest
from hypothesis import given
from hypothesis import strategies as st

from netcas.detector import DetectorState, UninitializedBaselineError, drop_permil, round_half_away, update_baselines
from netcas.monitor import ThroughputSample


def sample(b, l, n=1):
    return ThroughputSample(0, b, l, n)


def test_baseline_updates():
    d = DetectorState()
    update_baselines(d, sample(10, 0.002))
    assert (d.b_bar, d.l_bar) == (10, 0.002)
    update_baselines(d, sample(8, 0.001))
    assert (d.b_bar, d.l_bar) == (10, 0.001)
    update_baselines(d, sample(12, 0.003))
    assert (d.b_bar, d.l_bar) == (12, 0.001)


def test_score_examples():
    d = DetectorState(b_bar=10, l_bar=0.010)
    assert drop_permil(d, sample(10, 0.010)) == 0
    assert drop_permil(d, sample(5, 0.015)) == 500
    assert d.last_drop_permil == 500
    assert drop_permil(d, sample(0, 0.030)) == 1000


def test_better_than_baseline_clamps_to_zero():
    d = DetectorState(b_bar=10, l_bar=0.010)
    assert drop_permil(d, sample(20, 0.001)) == 0


def test_uninitialized():
    with pytest.raises(UninitializedBaselineError):
        DetectorState().drop_permil(sample(1, 1))


def test_empty_sample_not_a_baseline():
    with pytest.raises(ValueError):
        DetectorState().update_baselines(sample(0, 0, n=0))


def test_weights_must_sum_to_one():
    with pytest.raises(ValueError):
        DetectorState(0.6, 0.6)


def test_round_half_away():
    assert [round_half_away(x) for x in (0.5, 1.5, 2.5, -0.5, 2.49)] == [1, 2, 3, -1, 2]


def test_decay_relaxes_baselines():
    d = DetectorState(decay=0.1)
    d.update_baselines(sample(100, 1.0))
    d.update_baselines(sample(50, 2.0))
    assert d.b_bar == pytest.approx(90) and d.l_bar == pytest.approx(1.1)


pos = st.floats(1e-6, 1e9, allow_nan=False)
beta = st.floats(0, 1)


@given(pos, pos, beta, st.floats(0, 1e10), st.floats(0, 1e10), st.floats(1e-9, 1e3))
def test_monotone_in_throughput(b_bar, l_bar, bb, b1, b2, l):
    d = DetectorState(bb, 1 - bb, b_bar, l_bar)
    lo, hi = sorted((b1, b2))
    assert d.drop_permil(sample(hi, l)) <= d.drop_permil(sample(lo, l))


@given(pos, pos, beta, st.floats(0, 1e10), st.floats(1e-9, 1e3), st.floats(1e-9, 1e3))
def test_monotone_in_latency(b_bar, l_bar, bb, b, l1, l2):
    d = DetectorState(bb, 1 - bb, b_bar, l_bar)
    lo, hi = sorted((l1, l2))
    assert d.drop_permil(sample(b, lo)) <= d.drop_permil(sample(b, hi))


@given(pos, pos, beta, st.floats(0, 1e12), st.floats(0, 1e6))
def test_range(b_bar, l_bar, bb, b, l):
    assert 0 <= DetectorState(bb, 1 - bb, b_bar, l_bar).drop_permil(sample(b, l)) <= 1000


@given(pos, pos)
def test_baseline_sample_scores_zero(b, l):
    d = DetectorState()
    s = sample(b, l)
    d.update_baselines(s)
    assert d.drop_permil(s) == 0
