import numpy as np
import pytest

from stereoseg.disparity_prior import (
    DisparityHistogram,
    DisparityInterval,
    PriorThresholds,
    bounding_rect,
    build_prior_mask,
    disparity_histogram,
    find_foreground_peak,
    grow_interval,
    round_half_up,
)
from stereoseg.errors import EmptyMask, NoForegroundPeak, NoValidDisparity
from stereoseg.media_io import BinaryMask, DisparityMap


def _dm(d, valid=None):
    d = np.asarray(d, dtype=np.float32)
    if valid is None:
        valid = np.ones_like(d, dtype=bool)
    return DisparityMap(d=d, valid=np.asarray(valid, dtype=bool))


# The spec's two-peak example declares bins {5:6000, 39:200, 40:3000, 41:200}
# with total 10000; the remaining 600 sit in a flat pair of bins that no rule
# can select, keeping every stated threshold intact.
TWO_PEAK = {5: 6000, 19: 300, 20: 300, 39: 200, 40: 3000, 41: 200}

# Growth fixture: 8850 filler far below keeps total at 10000 (n_th2 = 1000)
# without being reachable before growth stops.
GROW_BINS = {5: 8850, 38: 150, 39: 300, 40: 500, 41: 200}


def test_round_half_up_ties():
    assert list(round_half_up(np.array([9.4, 9.6, 9.5, 10.5]))) == [9, 10, 10, 11]


def test_histogram_uniform_map():
    dm = _dm(np.full((100, 100), 10.0))
    h = disparity_histogram(dm)
    assert h.f(10) == 10000
    assert h.total == 10000


def test_histogram_all_invalid():
    dm = _dm(np.full((4, 4), 10.0), valid=np.zeros((4, 4), dtype=bool))
    with pytest.raises(NoValidDisparity):
        disparity_histogram(dm)


def test_histogram_rounding():
    dm = _dm(np.array([[9.4, 9.6]]))
    h = disparity_histogram(dm)
    assert h.f(9) == 1 and h.f(10) == 1


def test_histogram_excludes_invalid_pixels():
    dm = _dm(np.array([[10.0, 20.0]]), valid=np.array([[True, False]]))
    h = disparity_histogram(dm)
    assert h.total == 1 and h.f(20) == 0


def test_peak_single_bin():
    h = DisparityHistogram.from_counts({10: 10000})
    assert find_foreground_peak(h) == 10


def test_peak_two_peaks_nearest_wins():
    h = DisparityHistogram.from_counts(TWO_PEAK)
    assert h.total == 10000
    assert find_foreground_peak(h) == 40


def test_peak_most_frequent_rule():
    h = DisparityHistogram.from_counts(TWO_PEAK)
    assert find_foreground_peak(h, rule="most_frequent") == 5


def test_peak_uniform_spread_has_none():
    h = DisparityHistogram.from_counts({d: 50 for d in range(200)})
    assert h.total == 10000
    with pytest.raises(NoForegroundPeak):
        find_foreground_peak(h)


def test_peak_satisfies_all_conditions_on_random_histograms():
    rng = np.random.default_rng(7)
    for _ in range(50):
        counts = rng.integers(0, 400, size=rng.integers(3, 60))
        h = DisparityHistogram(counts)
        if h.total == 0:
            continue
        th = PriorThresholds.from_total(h.total)
        try:
            d = find_foreground_peak(h, th)
        except NoForegroundPeak:
            continue
        assert h.f(d) > h.f(d - 1)
        assert h.f(d) > h.f(d + 1)
        assert h.f(d) > th.n_th1


def test_grow_single_bin_already_exceeds():
    h = DisparityHistogram.from_counts({10: 10000})
    got = grow_interval(h, 10, PriorThresholds(n_th1=100, n_th2=1000))
    assert (got.d_lo, got.d_hi) == (10, 10)


def test_grow_fixture_step_by_step():
    # greedy: 500 -> +39 (800) -> +41 (1000, not > n_th2) -> +38 (1150) stop
    h = DisparityHistogram.from_counts(GROW_BINS)
    assert h.total == 10000
    got = grow_interval(h, 40)
    assert (got.d_lo, got.d_hi) == (38, 41)


def test_grow_from_zero_goes_up_only():
    h = DisparityHistogram.from_counts({0: 10, 1: 5, 2: 5})
    got = grow_interval(h, 0, PriorThresholds(n_th1=0, n_th2=15))
    assert got.d_lo == 0 and got.d_hi >= 1


def test_grow_invariant_exceeds_or_covers():
    rng = np.random.default_rng(13)
    for _ in range(50):
        counts = rng.integers(0, 100, size=rng.integers(2, 40))
        h = DisparityHistogram(counts)
        if h.total == 0:
            continue
        th = PriorThresholds.from_total(h.total)
        populated = np.flatnonzero(counts)
        d_th = int(populated[rng.integers(populated.size)])
        got = grow_interval(h, d_th, th)
        assert got.d_lo <= d_th <= got.d_hi
        cum = int(counts[got.d_lo : got.d_hi + 1].sum())
        covers_all = got.d_lo == 0 and got.d_hi >= populated[-1]
        assert cum > th.n_th2 or covers_all


def test_scaling_counts_leaves_peak_and_interval_unchanged():
    h1 = DisparityHistogram.from_counts(TWO_PEAK)
    h2 = DisparityHistogram(h1.counts * 7)
    th1 = PriorThresholds.from_total(h1.total)
    th2 = PriorThresholds.from_total(h2.total)
    d1 = find_foreground_peak(h1, th1)
    d2 = find_foreground_peak(h2, th2)
    assert d1 == d2
    g1 = grow_interval(h1, d1, th1)
    g2 = grow_interval(h2, d2, th2)
    assert (g1.d_lo, g1.d_hi) == (g2.d_lo, g2.d_hi)


def test_prior_mask_all_inside():
    dm = _dm(np.full((3, 3), 10.0))
    mask = build_prior_mask(dm, DisparityInterval(10, 10, 10))
    assert mask.label.all()


def test_prior_mask_invalid_never_foreground():
    dm = _dm(np.full((2, 2), 10.0), valid=np.array([[True, False], [True, True]]))
    mask = build_prior_mask(dm, DisparityInterval(10, 10, 10))
    assert mask.label[0, 1] == 0 and mask.label.sum() == 3


def test_prior_mask_rounds_then_tests_membership():
    dm = _dm(np.array([[9.4, 10.2]]))
    mask = build_prior_mask(dm, DisparityInterval(10, 11, 10))
    assert list(mask.label[0]) == [0, 1]


def test_prior_mask_count_matches_histogram():
    rng = np.random.default_rng(23)
    dm = _dm(rng.uniform(0, 30, size=(40, 40)))
    h = disparity_histogram(dm)
    iv = DisparityInterval(5, 12, 8)
    mask = build_prior_mask(dm, iv)
    assert mask.label.sum() == h.counts[5:13].sum()


def test_bounding_rect_single_pixel():
    m = np.zeros((10, 10), dtype=np.uint8)
    m[4, 3] = 1
    r = bounding_rect(BinaryMask(m), 0)
    assert (r.x0, r.y0, r.x1, r.y1) == (3, 4, 3, 4)


def test_bounding_rect_empty():
    with pytest.raises(EmptyMask):
        bounding_rect(BinaryMask(np.zeros((4, 4), dtype=np.uint8)), 0)


def test_bounding_rect_margin_and_clamp():
    m = np.zeros((10, 10), dtype=np.uint8)
    m[5, 2] = 1
    m[3, 7] = 1
    r = bounding_rect(BinaryMask(m), 1)
    assert (r.x0, r.y0, r.x1, r.y1) == (1, 2, 8, 6)
