from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dc2.geometry import Region, ScoredRegion, intersection_area, iou, nms, split_region

from oracles import greedy_nms, mask, pixel_iou


def tuples(regions):
    return [r.as_tuple() for r in regions]


@pytest.mark.parametrize(
    "parent, expected",
    [
        ((0, 0, 1024, 1024), [(0, 0, 512, 512), (512, 0, 512, 512), (0, 512, 512, 512), (512, 512, 512, 512)]),
        ((0, 0, 7, 5), [(0, 0, 3, 2), (3, 0, 4, 2), (0, 2, 3, 3), (3, 2, 4, 3)]),
        ((10, 20, 100, 60), [(10, 20, 50, 30), (60, 20, 50, 30), (10, 50, 50, 30), (60, 50, 50, 30)]),
    ],
)
def test_split_examples(parent, expected):
    assert tuples(split_region(Region(*parent))) == expected


@pytest.mark.parametrize("parent", [(0, 0, 1, 5), (0, 0, 5, 1), (3, 3, 1, 1)])
def test_split_rejects_degenerate(parent):
    with pytest.raises(ValueError, match="unsplittable region"):
        split_region(Region(*parent))


def test_region_rejects_empty():
    with pytest.raises(ValueError):
        Region(0, 0, 0, 4)


def check_tiling(w: int, h: int, x: int = 0, y: int = 0) -> None:
    parent = Region(x, y, w, h)
    quads = split_region(parent)
    cover = np.zeros((y + h, x + w), dtype=np.int32)
    for q in quads:
        assert parent.contains(q)
        cover[q.y:q.bottom, q.x:q.right] += 1
    assert (cover[y:, x:] == 1).all(), (w, h)
    assert cover.sum() == w * h
    assert sum(q.area for q in quads) == parent.area


def test_split_tiles_exhaustively():
    for w in range(2, 65):
        for h in range(2, 65):
            check_tiling(w, h)


@given(st.integers(0, 50), st.integers(0, 50), st.integers(2, 80), st.integers(2, 80))
def test_split_tiles_offset_parents(x, y, w, h):
    check_tiling(w, h, x, y)


@pytest.mark.parametrize(
    "a, b, expected",
    [
        ((0, 0, 10, 10), (0, 0, 10, 10), 1.0),
        ((0, 0, 10, 10), (20, 20, 5, 5), 0.0),
        ((0, 0, 10, 10), (5, 0, 10, 10), 50 / 150),
    ],
)
def test_iou_examples(a, b, expected):
    assert iou(Region(*a), Region(*b)) == pytest.approx(expected, abs=1e-12)
    assert pixel_iou(a, b, 30) == pytest.approx(expected, abs=1e-12)


def random_box(rng, size=40):
    w = int(rng.integers(1, size + 1))
    h = int(rng.integers(1, size + 1))
    x = int(rng.integers(0, size - w + 1))
    y = int(rng.integers(0, size - h + 1))
    return (x, y, w, h)


def test_iou_matches_pixel_count():
    rng = np.random.default_rng(7)
    for _ in range(200):
        a, b = random_box(rng), random_box(rng)
        assert iou(Region(*a), Region(*b)) == pixel_iou(a, b, 40)
        assert intersection_area(Region(*a), Region(*b)) == int((mask(a, 40) & mask(b, 40)).sum())


def test_iou_symmetric_and_bounded():
    rng = np.random.default_rng(8)
    for _ in range(200):
        a, b = Region(*random_box(rng)), Region(*random_box(rng))
        v = iou(a, b)
        assert v == iou(b, a)
        assert 0.0 <= v <= 1.0


def S(box, layer, order=0):
    return ScoredRegion(Region(*box), layer, order)


def test_nms_examples():
    kept = nms([S((0, 0, 10, 10), 2), S((0, 0, 10, 10), 1)], 0.5)
    assert [(k.region.as_tuple(), k.layer) for k in kept] == [((0, 0, 10, 10), 2)]

    kept = nms([S((0, 0, 10, 10), 1, 0), S((100, 100, 10, 10), 1, 1)], 0.5)
    assert len(kept) == 2

    kept = nms([S((0, 0, 10, 10), 2, 0), S((5, 0, 10, 10), 1, 1), S((0, 5, 10, 10), 1, 2)], 0.3)
    assert [(k.region.as_tuple(), k.layer) for k in kept] == [((0, 0, 10, 10), 2)]


def test_nms_empty():
    assert nms([], 0.5) == []


def test_nms_suppresses_at_threshold():
    # IoU exactly 0.5: 10x10 vs 10x5 inside it
    kept = nms([S((0, 0, 10, 10), 2, 0), S((0, 0, 10, 5), 1, 1)], 0.5)
    assert len(kept) == 1


def test_nms_same_layer_tiebreak():
    kept = nms([S((1, 0, 10, 10), 1, 5), S((0, 0, 10, 10), 1, 3)], 0.5)
    assert [k.tiebreak for k in kept] == [3]


def test_nms_rejects_bad_threshold():
    with pytest.raises(ValueError):
        nms([S((0, 0, 2, 2), 0)], 1.5)


def random_candidates(rng, n):
    return [ScoredRegion(Region(*random_box(rng)), int(rng.integers(0, 4)), i) for i in range(n)]


def test_nms_properties_on_random_sets():
    rng = np.random.default_rng(11)
    for trial in range(500):
        thr = float(rng.choice([0.1, 0.3, 0.5, 0.7]))
        cands = random_candidates(rng, int(rng.integers(0, 12)))
        kept = nms(cands, thr)
        # idempotent
        assert nms(kept, thr) == kept
        # survivors are pairwise below the threshold
        for i in range(len(kept)):
            for j in range(i + 1, len(kept)):
                assert iou(kept[i].region, kept[j].region) < thr
        # every dropped candidate overlaps a survivor that outranks it
        for c in cands:
            if c in kept:
                continue
            assert any(
                iou(c.region, k.region) >= thr and k.priority() < c.priority() for k in kept
            )


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_nms_matches_pixel_oracle(seed):
    rng = np.random.default_rng(seed)
    cands = random_candidates(rng, int(rng.integers(1, 8)))
    thr = 0.5
    got = [(c.region.as_tuple(), c.layer, c.tiebreak) for c in nms(cands, thr)]
    want = greedy_nms([(c.region.as_tuple(), c.layer, c.tiebreak) for c in cands], thr, 40)
    assert got == want
