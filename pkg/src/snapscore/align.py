"""Subsequence alignment of a query bootleg score against a reference.

The column cost is the negative count of overlapping rows, normalized by
the larger of the two columns' note counts, so a dense chord and a single
note are penalized on the same scale.  Subsequence DTW then finds the
cheapest monotone path that consumes the whole query and any contiguous
stretch of the reference (free start and end on the reference side).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .bootleg import NUM_ROWS, BootlegScore
from .config import Config
from .midi import NoteEvent

# allowed steps as (dq, dr); weights multiply the cost of the cell stepped
# into.  (2, 1) charges double for collapsing two query columns onto one
# reference column, discouraging query collapse.
STEP_MATCH = (1, 1)
STEP_SKIP_REF = (1, 2)
STEP_DOUBLE_QUERY = (2, 1)


class AlignmentError(ValueError):
    """Raised when no meaningful alignment exists."""


@dataclass
class AlignmentResult:
    ref_start: int
    ref_end: int
    path: tuple[tuple[int, int], ...]
    total_cost: float
    interval: tuple[float, float]
    event_start: int
    event_end: int
    stage_timings: dict[str, float] = field(default_factory=dict, compare=False)

    def to_json_dict(self) -> dict:
        return {
            "refStartCol": self.ref_start,
            "refEndCol": self.ref_end,
            "tStart": self.interval[0],
            "tEnd": self.interval[1],
            "totalCost": self.total_cost,
            "eventStart": self.event_start,
            "eventEnd": self.event_end,
            "stageTimings": self.stage_timings,
        }


def column_cost(q_mask: int, r_mask: int, q_count: int, r_count: int) -> float:
    """Negative overlap normalized by max(counts); 0 when both counts are 0."""
    norm = max(q_count, r_count)
    if norm == 0:
        return 0.0
    return -(q_mask & r_mask).bit_count() / norm


def cost_matrix(query: BootlegScore, reference: BootlegScore) -> np.ndarray:
    """Pairwise column costs, shape (Q, R), all values in [-62, 0]."""
    q = query.to_matrix().astype(np.float64)
    r = reference.to_matrix().astype(np.float64)
    overlap = q.T @ r
    norm = np.maximum.outer(np.asarray(query.counts, dtype=np.float64),
                            np.asarray(reference.counts, dtype=np.float64))
    out = np.zeros_like(overlap)
    np.divide(-overlap, norm, out=out, where=norm > 0)
    return out


def subsequence_dtw(costs: np.ndarray,
                    weights: tuple[float, float, float] = (1.0, 1.0, 2.0)
                    ) -> tuple[int, int, tuple[tuple[int, int], ...], float]:
    """Match all query rows of ``costs`` to a reference subsequence.

    ``weights`` are for steps (1,1), (1,2), (2,1).  The start is free on
    row 0 and the end is the cheapest column of the last row (smallest
    column on ties).  Backtrace prefers (1,1) over (2,1) over (1,2) on
    exact cost ties.  Returns (ref_start, ref_end, path, total_cost); the
    path visits every query index.
    """
    costs = np.asarray(costs, dtype=np.float64)
    if costs.ndim != 2:
        raise ValueError("cost matrix must be 2-D")
    nq, nr = costs.shape
    if nq == 0 or nr == 0:
        raise ValueError("empty cost matrix")
    if nq > nr:
        raise AlignmentError("query longer than reference")
    w11, w12, w21 = weights

    dist = np.full((nq, nr), np.inf)
    step = np.zeros((nq, nr), dtype=np.uint8)
    dist[0] = costs[0]
    inf = np.array([np.inf])
    for q in range(1, nq):
        row_cost = costs[q]
        c1 = np.concatenate([inf, dist[q - 1][:-1]]) + w11 * row_cost
        c2 = np.concatenate([inf, inf, dist[q - 1][:-2]]) + w12 * row_cost
        if q >= 2:
            c3 = np.concatenate([inf, dist[q - 2][:-1]]) + w21 * row_cost
        else:
            c3 = np.full(nr, np.inf)
        best = np.minimum(np.minimum(c1, c2), c3)
        step[q] = np.where(c1 == best, 1, np.where(c3 == best, 3, 2))
        dist[q] = best

    r = int(np.argmin(dist[nq - 1]))
    total = float(dist[nq - 1, r])
    if not np.isfinite(total):
        raise AlignmentError("no admissible alignment path")

    q = nq - 1
    path = [(q, r)]
    while q > 0:
        s = step[q][r]
        if s == 1:
            q, r = q - 1, r - 1
        elif s == 2:
            q, r = q - 1, r - 2
        else:
            path.append((q - 1, r))
            q, r = q - 2, r - 1
        path.append((q, r))
    path.reverse()
    return path[0][1], path[-1][1], tuple(path), total


def matched_event_range(ref_start: int, ref_end: int,
                        event_index: list[int | None]) -> tuple[int, int]:
    """First/last source event index inside the matched column range."""
    first = next((ev for ev in event_index[ref_start:ref_end + 1]
                  if ev is not None), None)
    last = next((ev for ev in reversed(event_index[ref_start:ref_end + 1])
                 if ev is not None), None)
    if first is None or last is None:
        raise AlignmentError("degenerate match: only filler columns matched")
    return first, last


def map_to_time(ref_start: int, ref_end: int, event_index: list[int | None],
                events: list[NoteEvent], extend_to_next_onset: bool = True
                ) -> tuple[float, float, int, int]:
    """MIDI time interval covered by the matched reference columns.

    The end extends to the next event's onset (a matched event sounds until
    the following one) unless ``extend_to_next_onset`` is off or the match
    already reaches the last event.
    """
    first, last = matched_event_range(ref_start, ref_end, event_index)
    t_start = events[first].time
    if extend_to_next_onset and last + 1 < len(events):
        t_end = events[last + 1].time
    else:
        t_end = events[last].time
    return t_start, t_end, first, last


def align(query: BootlegScore, reference: BootlegScore,
          events: list[NoteEvent], cfg: Config | None = None) -> AlignmentResult:
    """Cost matrix -> subsequence DTW -> time mapping, with stage timings."""
    cfg = cfg or Config()
    if query.num_rows != NUM_ROWS or reference.num_rows != NUM_ROWS:
        raise ValueError("both scores must have 62 rows")

    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    costs = cost_matrix(query, reference)
    timings["cost_matrix"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    weights = (cfg.dtw_weight_match, cfg.dtw_weight_skip_ref,
               cfg.dtw_weight_double_query)
    ref_start, ref_end, path, total = subsequence_dtw(costs, weights)
    timings["dtw"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    t_start, t_end, first, last = map_to_time(
        ref_start, ref_end, reference.event_index, events,
        cfg.extend_to_next_onset)
    timings["map_time"] = time.perf_counter() - t0

    return AlignmentResult(
        ref_start=ref_start,
        ref_end=ref_end,
        path=path,
        total_cost=total,
        interval=(t_start, t_end),
        event_start=first,
        event_end=last,
        stage_timings=timings,
    )
