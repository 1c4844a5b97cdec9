import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dtw_brute_force
from snapscore.align import (AlignmentError, align, column_cost, cost_matrix,
                             map_to_time, matched_event_range, subsequence_dtw)
from snapscore.bootleg import BootlegScore, midi_bootleg
from snapscore.config import Config
from snapscore.midi import NoteEvent


def make_events(pitch_sets, dt=0.5):
    return [NoteEvent(i * dt, frozenset(p), len(p))
            for i, p in enumerate(pitch_sets)]


def random_reference(rng, n_events):
    pitch_sets = [set(map(int, rng.integers(21, 109, rng.integers(1, 5))))
                  for _ in range(n_events)]
    events = make_events(pitch_sets)
    return events, midi_bootleg(events)


def excerpt_query(reference: BootlegScore, e1: int, e2: int) -> BootlegScore:
    lo, hi = 3 * e1, 3 * (e2 + 1)
    return BootlegScore(
        reference.masks[lo:hi],
        reference.counts[lo:hi],
        [None if ev is None else ev - e1
         for ev in reference.event_index[lo:hi]],
    )


# --- column cost -------------------------------------------------------------

def test_cost_filler_vs_anything_is_zero():
    assert column_cost(0, 0, 0, 0) == 0.0
    assert column_cost(0, (1 << 30) | (1 << 40), 0, 2) == 0.0


def test_cost_full_overlap():
    mask = (1 << 27) | (1 << 28)
    assert column_cost(mask, mask, 1, 1) == -2.0


def test_cost_no_overlap():
    assert column_cost(1 << 10, (1 << 20) | (1 << 21), 1, 2) == 0.0


def test_cost_normalized_by_max_count():
    mask = (1 << 5) | (1 << 9)
    assert column_cost(mask, mask, 2, 4) == pytest.approx(-0.5)


def test_cost_matrix_bounds_and_swap_symmetry():
    rng = np.random.default_rng(0)
    events_a, a = random_reference(rng, 6)
    events_b, b = random_reference(rng, 9)
    costs = cost_matrix(a, b)
    assert costs.shape == (18, 27)
    assert costs.min() >= -62.0 and costs.max() <= 0.0
    assert np.array_equal(costs, cost_matrix(b, a).T)


# --- subsequence DTW -----------------------------------------------------------

def test_dtw_single_row_picks_cheapest_column():
    costs = np.array([[0.0, -1.0, -3.0, -2.0]])
    ref_start, ref_end, path, total = subsequence_dtw(costs)
    assert (ref_start, ref_end) == (2, 2)
    assert path == ((0, 2),)
    assert total == -3.0


def test_dtw_end_tie_prefers_smallest_column():
    costs = np.array([[-1.0, -1.0]])
    assert subsequence_dtw(costs)[0] == 0


def test_dtw_query_longer_than_reference():
    with pytest.raises(AlignmentError, match="longer than reference"):
        subsequence_dtw(np.zeros((4, 3)))


def test_dtw_exact_subsequence_recovery():
    rng = np.random.default_rng(5)
    ref = rng.random((62, 30)) < 0.1
    q = ref[:, 6:15]
    overlap = q.astype(float).T @ ref.astype(float)
    counts_q = q.sum(axis=0)
    counts_r = ref.sum(axis=0)
    norm = np.maximum.outer(counts_q, counts_r)
    costs = np.where(norm > 0, -overlap / np.maximum(norm, 1), 0.0)
    ref_start, ref_end, path, total = subsequence_dtw(costs)
    assert (ref_start, ref_end) == (6, 14)
    diag = sum(costs[i, 6 + i] for i in range(9))
    assert total == pytest.approx(diag)
    assert path == tuple((i, 6 + i) for i in range(9))


def test_dtw_path_covers_all_query_rows():
    rng = np.random.default_rng(9)
    costs = -rng.random((7, 19))
    _, _, path, _ = subsequence_dtw(costs)
    assert [q for q, _ in path] == list(range(7))
    assert all((q2 >= q1 and r2 >= r1)
               for (q1, r1), (q2, r2) in zip(path, path[1:]))


def test_dtw_upper_bound_by_diagonal():
    rng = np.random.default_rng(13)
    for _ in range(20):
        nq = int(rng.integers(1, 8))
        nr = int(rng.integers(nq, 14))
        costs = -rng.random((nq, nr)) * 3
        total = subsequence_dtw(costs)[3]
        best_diag = min(
            costs[0, s] + sum(costs[i, s + i] for i in range(1, nq))
            for s in range(nr - nq + 1))
        assert total <= best_diag + 1e-12


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_dtw_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    nq = int(rng.integers(1, 7))
    nr = int(rng.integers(nq, 11))
    costs = rng.uniform(-3, 0, (nq, nr))
    assert subsequence_dtw(costs)[3] == dtw_brute_force(costs)


def test_dtw_translation_equivariance():
    rng = np.random.default_rng(17)
    events, ref = random_reference(rng, 20)
    query = excerpt_query(ref, 5, 12)
    base = subsequence_dtw(cost_matrix(query, ref))
    for pad in (3, 7):
        pad_events, _ = random_reference(np.random.default_rng(pad), pad)
        shifted_events = pad_events + events
        shifted = midi_bootleg(make_events(
            [set(e.pitches) for e in shifted_events]))
        got = subsequence_dtw(cost_matrix(query, shifted))
        assert got[0] == base[0] + 3 * pad
        assert got[1] == base[1] + 3 * pad


# --- time mapping ---------------------------------------------------------------

def test_map_to_time_extends_to_next_onset():
    events = make_events([{60}, {62}, {64}])
    ref = midi_bootleg(events)
    t0, t1, e1, e2 = map_to_time(0, 5, ref.event_index, events)
    assert (e1, e2) == (0, 1)
    assert (t0, t1) == (0.0, 1.0)


def test_map_to_time_whole_reference():
    events = make_events([{60}, {62}, {64}])
    ref = midi_bootleg(events)
    t0, t1, e1, e2 = map_to_time(0, 8, ref.event_index, events)
    assert (e1, e2) == (0, 2)
    assert (t0, t1) == (0.0, 1.0)


def test_map_to_time_single_event_not_last():
    events = make_events([{60}, {62}, {64}])
    ref = midi_bootleg(events)
    t0, t1, _, _ = map_to_time(3, 4, ref.event_index, events)
    assert (t0, t1) == (0.5, 1.0)


def test_map_to_time_extension_flag_off():
    events = make_events([{60}, {62}, {64}])
    ref = midi_bootleg(events)
    t0, t1, _, _ = map_to_time(3, 4, ref.event_index, events,
                               extend_to_next_onset=False)
    assert (t0, t1) == (0.5, 0.5)


def test_map_to_time_filler_only_is_degenerate():
    events = make_events([{60}, {62}])
    ref = midi_bootleg(events)
    with pytest.raises(AlignmentError, match="degenerate"):
        matched_event_range(2, 2, ref.event_index)


# --- end-to-end align ------------------------------------------------------------

def test_align_full_self_match():
    rng = np.random.default_rng(23)
    events, ref = random_reference(rng, 12)
    result = align(ref, ref, events)
    assert (result.event_start, result.event_end) == (0, 11)
    assert result.interval == (events[0].time, events[-1].time)
    assert result.ref_start == 0


def test_align_excerpt_iou_one():
    rng = np.random.default_rng(29)
    events, ref = random_reference(rng, 40)
    query = excerpt_query(ref, 10, 30)
    result = align(query, ref, events)
    assert (result.event_start, result.event_end) == (10, 30)
    assert result.interval == (events[10].time, events[31].time)


def test_align_reports_stage_timings():
    rng = np.random.default_rng(31)
    events, ref = random_reference(rng, 10)
    result = align(ref, ref, events)
    assert set(result.stage_timings) == {"cost_matrix", "dtw", "map_time"}
    payload = result.to_json_dict()
    assert {"refStartCol", "refEndCol", "tStart", "tEnd", "totalCost",
            "stageTimings"} <= set(payload)


def test_align_deterministic():
    rng = np.random.default_rng(37)
    events, ref = random_reference(rng, 25)
    query = excerpt_query(ref, 3, 20)
    a = align(query, ref, events)
    b = align(query, ref, events)
    assert a == b  # stage_timings excluded from comparison
    assert a.path == b.path


def test_align_noisy_excerpt_high_iou():
    cfg = Config()
    rng = np.random.default_rng(41)
    good = 0
    for trial in range(30):
        events, ref = random_reference(rng, 60)
        e1 = int(rng.integers(0, 30))
        e2 = e1 + int(rng.integers(10, 25))
        query = excerpt_query(ref, e1, e2)
        masks = list(query.masks)
        for col in range(len(masks)):
            flips = rng.random(62) < 0.05
            mask = masks[col]
            for row in np.nonzero(flips)[0]:
                mask ^= 1 << int(row)
            masks[col] = mask
        noisy = BootlegScore(masks, query.counts, query.event_index)
        result = align(noisy, ref, events, cfg)
        inter = max(0, min(result.event_end, e2) - max(result.event_start, e1) + 1)
        union = max(result.event_end, e2) - min(result.event_start, e1) + 1
        if inter / union >= 0.9:
            good += 1
    assert good >= 28
