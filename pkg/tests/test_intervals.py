import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from oracles import bitmap, bitmap_scores, random_ms_ranges, runs, sort_and_sweep
from trkit.errors import InvalidRangeError
from trkit.intervals import (
    RangeSet,
    TimeRange,
    intersect,
    measure,
    normalize,
    score,
    union,
)


def rs(*pairs):
    return RangeSet.from_pairs(pairs)


def test_normalize_examples():
    out = normalize([(3, 5), (1, 2), (4.9, 6)], 0)
    assert out.as_lists() == [[1, 2], [3, 6]]
    assert out.as_lists() == sort_and_sweep([(3, 5), (1, 2), (4.9, 6)], 0)
    assert normalize([], 0.5).as_lists() == []
    assert normalize([(0, 1), (1.4, 2)], 0.5).as_lists() == [[0, 2]]


def test_normalize_gap_against_ms_discretization():
    # 1.4 - 1 = 0.4 s gap, bridged by a 0.5 s merge gap: fill gaps <= 500 ms on a 1 ms bitmap
    grid = bitmap([(0, 1000), (1400, 2000)], 3000)
    filled = grid.copy()
    for (s0, e0), (s1, _) in zip(runs(grid), runs(grid)[1:]):
        if s1 - e0 <= 500:
            filled[e0:s1] = True
    assert runs(filled) == [(0, 2000)]


@pytest.mark.parametrize("bad, idx", [([(0, 1), (5, 3)], 1), ([(-1, 2)], 0)])
def test_normalize_rejects_invalid(bad, idx):
    with pytest.raises(InvalidRangeError) as exc:
        normalize(bad, 0)
    assert exc.value.index == idx
    assert f"index {idx}" in str(exc.value)


def test_normalize_rejects_negative_gap():
    with pytest.raises(ValueError):
        normalize([(0, 1)], -0.1)


def test_zero_measure_retained_but_weightless():
    out = normalize([(5, 5), (0, 1)], 0)
    assert out.as_lists() == [[0, 1], [5, 5]]
    assert measure(out) == 1


def test_intersect_examples():
    assert intersect(rs((10, 20)), rs((15, 25))).as_lists() == [[15, 20]]
    x = rs((1, 2), (3, 7.5))
    assert intersect(x, x) == x
    assert intersect(rs((0, 5)), rs((5, 10))).as_lists() == []


def test_union_examples():
    assert union(rs((10, 20)), rs((15, 25))).as_lists() == [[10, 25]]
    x = rs((1, 2), (3, 7.5))
    assert union(x, RangeSet()) == x
    assert union(rs((0, 1)), rs((2, 3))).as_lists() == [[0, 1], [2, 3]]


def test_score_examples():
    a = rs((10, 20), (30, 40))
    s = score(a, a)
    assert (s.precision, s.recall, s.iou) == (1, 1, 1)
    s = score(rs((15, 25)), rs((10, 20)))
    assert (s.precision, s.recall) == (0.5, 0.5)
    assert s.iou == 5 / 15
    s = score(RangeSet(), rs((0, 10)))
    assert (s.precision, s.recall, s.iou) == (0, 0, 0)


def test_score_degenerate_conventions():
    s = score(rs((0, 10)), RangeSet())
    assert (s.precision, s.recall, s.iou, s.degenerate) == (0, 0, 0, False)
    s = score(RangeSet(), RangeSet())
    assert (s.precision, s.recall, s.iou, s.degenerate) == (1, 1, 1, True)


def test_rangeset_rejects_overlap():
    with pytest.raises(InvalidRangeError):
        RangeSet((TimeRange(0, 2), TimeRange(1, 3)))


def test_bitmap_oracle_equivalence_ms_units():
    rng = np.random.default_rng(11)
    H = 2000
    for _ in range(300):
        p = random_ms_ranges(rng, 5, H)
        g = random_ms_ranges(rng, 5, H)
        P, G = RangeSet.from_pairs(p), RangeSet.from_pairs(g)
        assert [tuple(r) for r in intersect(P, G).as_lists()] == runs(bitmap(p, H) & bitmap(g, H))
        assert [tuple(r) for r in union(P, G).as_lists() if r[1] > r[0]] == runs(bitmap(p, H) | bitmap(g, H))
        s = score(P, G)
        assert (s.precision, s.recall, s.iou) == bitmap_scores(p, g, H)


def _pairs():
    pair = st.tuples(st.integers(0, 500), st.integers(0, 100)).map(lambda t: (t[0] / 10, (t[0] + t[1]) / 10))
    return st.lists(pair, max_size=6)


@given(_pairs(), st.sampled_from([0.0, 0.3, 1.0]))
def test_normalize_idempotent(pairs, gap):
    once = normalize(pairs, gap)
    assert normalize(once, gap) == once
    assert measure(once) >= 0


@given(_pairs(), _pairs())
def test_commutative_and_bounded(p, g):
    P, G = RangeSet.from_pairs(p), RangeSet.from_pairs(g)
    assert intersect(P, G) == intersect(G, P)
    assert union(P, G) == union(G, P)
    assert score(P, G).iou == score(G, P).iou
    assert measure(intersect(P, G)) <= min(measure(P), measure(G)) + 1e-9
    assert measure(union(P, G)) == pytest.approx(measure(P) + measure(G) - measure(intersect(P, G)), abs=1e-9)
    if measure(P) > 0 and measure(G) > 0:
        s = score(P, G)
        assert 0 <= s.iou <= min(s.precision, s.recall) + 1e-12 <= 1 + 1e-12


@given(_pairs().filter(bool), _pairs().filter(bool), st.data())
@settings(max_examples=100)
def test_enlarging_prediction_never_lowers_recall(p, g, data):
    i = data.draw(st.integers(0, len(p) - 1))
    grow = data.draw(st.floats(0, 20))
    bigger = list(p)
    s, e = bigger[i]
    bigger[i] = (max(0.0, s - grow), e + grow)
    G = RangeSet.from_pairs(g)
    assume(measure(G) > 0)
    assert score(RangeSet.from_pairs(bigger), G).recall >= score(RangeSet.from_pairs(p), G).recall - 1e-12


def test_perfect_iff_equal():
    a = rs((1, 2), (4, 6))
    assert score(a, rs((1, 2), (4, 6))).iou == 1
    assert score(a, rs((1, 2), (4, 5.5))).iou < 1
