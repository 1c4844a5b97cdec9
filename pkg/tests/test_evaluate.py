import json

import numpy as np
import pytest
from scipy import stats

from snapscore.evaluate import (MeasureMap, QueryAnnotation, aggregate,
                                interval_metrics, random_baseline)


MM = MeasureMap(downbeats=tuple(float(i) * 2.0 for i in range(10)),
                end_time=20.0)


# --- measure maps -------------------------------------------------------------

def test_measure_map_validation():
    with pytest.raises(ValueError):
        MeasureMap((0.0, 0.0, 1.0), 2.0)
    with pytest.raises(ValueError):
        MeasureMap((0.0, 1.0), 1.0)


def test_measure_interval_conversion():
    assert MM.measure_interval(1, 1) == (0.0, 2.0)
    assert MM.measure_interval(3, 5) == (4.0, 10.0)
    assert MM.measure_interval(10, 10) == (18.0, 20.0)  # ends at piece end
    with pytest.raises(ValueError):
        MM.measure_interval(0, 3)


def test_measure_map_json_round_trip():
    back = MeasureMap.from_dict(json.loads(json.dumps(MM.to_dict())))
    assert back == MM
    with pytest.raises(ValueError, match="endTime"):
        MeasureMap.from_dict({"downbeats": [0.0, 1.0]})


def test_annotation_acceptable_intervals():
    ann = QueryAnnotation("img.png", "s1", (2, 4),
                          extra_intervals=((12.0, 18.0),))
    assert ann.acceptable_intervals(MM) == [(2.0, 8.0), (12.0, 18.0)]


# --- interval metrics -----------------------------------------------------------

def test_interval_metrics_half_overlap():
    metrics, overlap, _ = interval_metrics((10.0, 20.0), [(15.0, 25.0)])
    assert (metrics.precision, metrics.recall, metrics.f_measure) == \
        (0.5, 0.5, 0.5)
    assert overlap == 5.0


def test_interval_metrics_identity():
    metrics, _, _ = interval_metrics((3.0, 7.0), [(3.0, 7.0)])
    assert (metrics.precision, metrics.recall, metrics.f_measure) == (1, 1, 1)


def test_interval_metrics_zero_duration_hypothesis():
    metrics, overlap, _ = interval_metrics((5.0, 5.0), [(0.0, 10.0)])
    assert (metrics.precision, metrics.recall, metrics.f_measure) == (0, 0, 0)
    assert overlap == 0.0


def test_interval_metrics_picks_best_truth():
    metrics, _, best = interval_metrics(
        (10.0, 20.0), [(0.0, 2.0), (11.0, 19.0), (18.0, 30.0)])
    assert best == (11.0, 19.0)
    assert metrics.recall == 1.0
    assert metrics.precision == pytest.approx(0.8)


def test_interval_metrics_translation_invariant():
    a = interval_metrics((10.0, 20.0), [(15.0, 25.0), (40.0, 50.0)])[0]
    shift = 1234.5
    b = interval_metrics((10.0 + shift, 20.0 + shift),
                         [(15.0 + shift, 25.0 + shift),
                          (40.0 + shift, 50.0 + shift)])[0]
    assert a == b


def test_interval_metrics_empty_truth_raises():
    with pytest.raises(ValueError):
        interval_metrics((0.0, 1.0), [])


def test_metrics_bounds_and_f_formula():
    rng = np.random.default_rng(0)
    for _ in range(200):
        a, b = sorted(rng.uniform(0, 30, 2))
        c, d = sorted(rng.uniform(0, 30, 2))
        if b == a or d == c:
            continue
        m, _, _ = interval_metrics((a, b), [(c, d)])
        assert 0.0 <= m.precision <= 1.0
        assert 0.0 <= m.recall <= 1.0
        want_f = 0.0 if m.precision + m.recall == 0 else \
            2 * m.precision * m.recall / (m.precision + m.recall)
        assert m.f_measure == want_f


# --- aggregation -----------------------------------------------------------------

def test_aggregate_single_query_equals_interval_metrics():
    metrics, overlap, best = interval_metrics((10.0, 20.0), [(15.0, 25.0)])
    micro, macro = aggregate([(10.0, best[1] - best[0], overlap)])
    assert micro == metrics
    assert macro == metrics


def test_aggregate_half_good_half_bad():
    micro, macro = aggregate([(10.0, 10.0, 10.0), (10.0, 10.0, 0.0)])
    assert (micro.precision, micro.recall, micro.f_measure) == (0.5, 0.5, 0.5)
    assert macro.precision == 0.5 and macro.f_measure == 0.5


def test_aggregate_all_perfect():
    micro, _ = aggregate([(5.0, 5.0, 5.0)] * 7)
    assert micro.f_measure == 1.0


# --- random baseline ---------------------------------------------------------------

def test_baseline_single_choice_is_deterministic():
    mm = MeasureMap((0.0, 1.0, 2.0, 3.0), 4.0)  # 4 measures, window of 3
    assert random_baseline(mm, 3, seed=0) == (0.0, 3.0)
    assert random_baseline(mm, 3, seed=99) == (0.0, 3.0)


def test_baseline_repeatable_for_fixed_seed():
    a = random_baseline(MM, 4, seed=1234)
    b = random_baseline(MM, 4, seed=1234)
    assert a == b


def test_baseline_too_short_piece():
    mm = MeasureMap((0.0, 1.0), 2.0)
    with pytest.raises(ValueError, match="too short"):
        random_baseline(mm, 2, seed=0)


def test_baseline_interval_spans_n_measures():
    hyp = random_baseline(MM, 4, seed=7)
    assert hyp[1] - hyp[0] == pytest.approx(8.0)


def test_baseline_uniform_start_distribution():
    n = 4
    starts = [1, 2, 3, 4, 5, 6]  # valid starts: 1 .. num_measures - n
    counts = dict.fromkeys(starts, 0)
    for seed in range(10_000):
        hyp = random_baseline(MM, n, seed)
        counts[int(hyp[0] / 2.0) + 1] += 1
    chi2 = stats.chisquare(list(counts.values()))
    assert chi2.pvalue > 0.01
