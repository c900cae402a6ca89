import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from gfmm import (
    DimensionMismatchError, EmptyModelError, GfmmModel, Hyperbox, IntervalData, IntervalPattern,
    InvalidParameterError, membership, predict, ramp,
)
from gfmm.core import as_interval_data, membership_matrix


@pytest.mark.parametrize("z, g, expected", [(0.2, 1, 0.2), (0.6, 2, 1.0), (-0.3, 1, 0.0), (0.25, 4, 1.0)])
def test_ramp(z, g, expected):
    assert ramp(z, g) == pytest.approx(expected)


def test_ramp_rejects_nonpositive_gamma():
    with pytest.raises(InvalidParameterError):
        ramp(0.1, 0)


def test_pattern_validation():
    with pytest.raises(InvalidParameterError):
        IntervalPattern([0.5], [0.4])
    with pytest.raises(InvalidParameterError):
        IntervalPattern([-0.1], [0.4])
    with pytest.raises(DimensionMismatchError):
        IntervalPattern([0.1, 0.2], [0.4])
    p = IntervalPattern.point([0.3, 0.4], 2)
    assert p == IntervalPattern([0.3, 0.4], [0.3, 0.4], 2)


def test_membership_examples():
    box = Hyperbox([0.2, 0.3], [0.6, 0.7], 1)
    assert membership(box, IntervalPattern.point([0.7, 0.7])) == pytest.approx(0.9)
    box = Hyperbox([0.2, 0.2], [0.3, 0.3], 1)
    assert membership(box, IntervalPattern.point([0.0, 0.25])) == pytest.approx(0.8)
    assert membership(box, IntervalPattern.point([0.25, 0.25])) == 1.0


def test_membership_of_sentinel_box_raises():
    with pytest.raises(Exception):
        membership(Hyperbox.empty(2), IntervalPattern.point([0.1, 0.1]))


def test_membership_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        membership(Hyperbox([0.1], [0.2]), IntervalPattern.point([0.1, 0.1]))


# grid coordinates keep 1 - f(z) away from rounding to exactly 1
coord = st.integers(0, 1000).map(lambda i: i / 1000)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 4).flatmap(lambda n: st.tuples(
    st.lists(st.tuples(coord, coord), min_size=n, max_size=n),
    st.lists(st.tuples(coord, coord), min_size=n, max_size=n),
    st.floats(0.25, 8))))
def test_membership_matches_oracle_and_containment(args):
    box_iv, pat_iv, gamma = args
    v, w = [min(a) for a in box_iv], [max(a) for a in box_iv]
    lo, up = [min(a) for a in pat_iv], [max(a) for a in pat_iv]
    b = membership(Hyperbox(v, w), IntervalPattern(lo, up), gamma)
    assert 0.0 <= b <= 1.0
    assert b == pytest.approx(oracles.membership(v, w, lo, up, gamma), abs=1e-12)
    inside = all(v[j] <= lo[j] and up[j] <= w[j] for j in range(len(v)))
    assert (b == 1.0) == inside


def test_membership_matrix_matches_scalar(rng):
    V = rng.random((7, 3)) * 0.5
    W = V + rng.random((7, 3)) * 0.5
    X = rng.random((11, 3))
    M = membership_matrix(V, W, X, X, np.full(3, 2.0))
    for i in range(11):
        for k in range(7):
            assert M[i, k] == pytest.approx(oracles.membership(V[k], W[k], X[i], X[i], 2.0))


def test_predict_tie_goes_to_smaller_class():
    model = GfmmModel.from_boxes([Hyperbox([0.6], [0.7], 2), Hyperbox([0.1], [0.2], 1)])
    label, scores = predict(model, IntervalPattern.point([0.4]))
    assert scores == {1: pytest.approx(0.8), 2: pytest.approx(0.8)}
    assert label == 1


def test_predict_ignores_unlabeled_boxes():
    model = GfmmModel.from_boxes([Hyperbox([0.3], [0.5], 0), Hyperbox([0.8], [0.9], 2)])
    label, scores = predict(model, IntervalPattern.point([0.4]))
    assert label == 2 and set(scores) == {2}
    with pytest.raises(EmptyModelError):
        GfmmModel.from_boxes([Hyperbox([0.3], [0.5], 0)]).predict(IntervalData([[0.4]]))


def test_class_union_takes_max_over_boxes():
    model = GfmmModel.from_boxes([Hyperbox([0.0], [0.1], 1), Hyperbox([0.5], [0.6], 1), Hyperbox([0.9], [1.0], 2)])
    res = model.predict_batch(IntervalData([[0.55]]))
    assert res.score_dict(0)[1] == 1.0
    assert res.winners[0] == 1


def test_error_rate_skips_unlabeled_patterns():
    model = GfmmModel.from_boxes([Hyperbox([0.0], [0.4], 1), Hyperbox([0.6], [1.0], 2)])
    data = IntervalData([[0.1], [0.9], [0.2], [0.5]], labels=[1, 1, 0, 0])
    assert model.error_rate(data) == 0.5


def test_as_interval_data_forms():
    X = np.array([[0.1, 0.2], [0.3, 0.4]])
    a = as_interval_data((X, [1, 2]))
    b = as_interval_data((X, X, [1, 2]))
    c = as_interval_data([IntervalPattern.point(x, l) for x, l in zip(X, [1, 2])])
    for d in (a, b, c):
        assert np.array_equal(d.lower, X) and np.array_equal(d.labels, [1, 2])


def test_model_copy_and_box_set():
    m = GfmmModel.from_boxes([Hyperbox([0.1], [0.2], 1), Hyperbox([0.5], [0.6], 2)], gamma=2)
    c = m.copy()
    assert c.same_boxes(m) and c.box_set() == m.box_set()
    c.V[0, 0] = 0.0
    assert not c.same_boxes(m)
