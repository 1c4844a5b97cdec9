"""Temporal-overlap precision/recall/F evaluation plus a random baseline.

Ground truth is measure-level: a per-score measure map gives downbeat
timestamps, and each query annotation names the fully captured measure
range (plus optional extra intervals for passages that repeat verbatim
elsewhere in the piece; the best-overlapping interval is scored).
"""

from __future__ import annotations

import json
import os
import random
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .align import AlignmentError, align
from .bootleg import BootlegScore, midi_bootleg
from .config import Config
from .imgio import load_image
from .midi import MidiParseError, NoteEvent, cluster_onsets, parse_midi
from .sheet import PipelineError, process_image

WORKERS_ENV_VAR = "SNAPSCORE_WORKERS"


@dataclass(frozen=True)
class MeasureMap:
    """Downbeat timestamps of measures 1..N plus the end-of-piece time."""

    downbeats: tuple[float, ...]
    end_time: float

    def __post_init__(self) -> None:
        if not self.downbeats:
            raise ValueError("measure map needs at least one downbeat")
        for a, b in zip(self.downbeats, self.downbeats[1:]):
            if b <= a:
                raise ValueError("downbeat times must be strictly increasing")
        if self.end_time <= self.downbeats[-1]:
            raise ValueError("end_time must exceed the last downbeat")

    @property
    def num_measures(self) -> int:
        return len(self.downbeats)

    def downbeat(self, measure: int) -> float:
        """Time of measure's downbeat; measure N+1 maps to the piece end."""
        if not 1 <= measure <= self.num_measures + 1:
            raise ValueError(f"measure {measure} out of range")
        if measure == self.num_measures + 1:
            return self.end_time
        return self.downbeats[measure - 1]

    def measure_interval(self, first: int, last: int) -> tuple[float, float]:
        if not 1 <= first <= last <= self.num_measures:
            raise ValueError(f"bad measure range [{first}, {last}]")
        return self.downbeat(first), self.downbeat(last + 1)

    def to_dict(self) -> dict:
        return {"downbeats": list(self.downbeats), "endTime": self.end_time}

    @classmethod
    def from_dict(cls, data: dict) -> "MeasureMap":
        if "endTime" not in data:
            raise ValueError("measure map must carry endTime")
        return cls(tuple(float(t) for t in data["downbeats"]),
                   float(data["endTime"]))


@dataclass(frozen=True)
class QueryAnnotation:
    image_id: str
    score_id: str
    measure_range: tuple[int, int]
    extra_intervals: tuple[tuple[float, float], ...] = ()
    split: str | None = None  # optional "train"/"test" tag

    def acceptable_intervals(self, mm: MeasureMap) -> list[tuple[float, float]]:
        intervals = [mm.measure_interval(*self.measure_range)]
        intervals.extend(self.extra_intervals)
        for s, e in intervals:
            if not s < e:
                raise ValueError(f"empty truth interval ({s}, {e})")
        return intervals

    @classmethod
    def from_dict(cls, data: dict) -> "QueryAnnotation":
        first, last = data["measures"]
        return cls(
            image_id=data["imageId"],
            score_id=data["scoreId"],
            measure_range=(int(first), int(last)),
            extra_intervals=tuple((float(s), float(e))
                                  for s, e in data.get("extraIntervals", [])),
            split=data.get("split"),
        )


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f_measure: float

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall,
                "fMeasure": self.f_measure}


def _f_measure(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def interval_metrics(hyp: tuple[float, float],
                     truth_set) -> tuple[Metrics, float, tuple[float, float]]:
    """Score one hypothesis against the best-overlapping truth interval.

    Returns (metrics, overlap seconds, chosen truth).  A zero-duration
    hypothesis (the error convention) scores 0 across the board.
    """
    truths = list(truth_set)
    if not truths:
        raise ValueError("empty truth set")
    if hyp[1] < hyp[0]:
        raise ValueError("hypothesis interval reversed")

    def overlap_with(truth):
        return max(0.0, min(hyp[1], truth[1]) - max(hyp[0], truth[0]))

    best = max(truths, key=overlap_with)
    overlap = overlap_with(best)
    hyp_len = hyp[1] - hyp[0]
    truth_len = best[1] - best[0]
    p = overlap / hyp_len if hyp_len > 0 else 0.0
    r = overlap / truth_len
    return Metrics(p, r, _f_measure(p, r)), overlap, best


def aggregate(per_query) -> tuple[Metrics, Metrics]:
    """(micro, macro) metrics from (hyp_dur, truth_dur, overlap) triples."""
    rows = list(per_query)
    if not rows:
        raise ValueError("nothing to aggregate")
    hyp_total = sum(h for h, _, _ in rows)
    truth_total = sum(t for _, t, _ in rows)
    ov_total = sum(o for _, _, o in rows)
    micro_p = ov_total / hyp_total if hyp_total > 0 else 0.0
    micro_r = ov_total / truth_total if truth_total > 0 else 0.0
    micro = Metrics(micro_p, micro_r, _f_measure(micro_p, micro_r))

    ps = [o / h if h > 0 else 0.0 for h, _, o in rows]
    rs = [o / t if t > 0 else 0.0 for _, t, o in rows]
    fs = [_f_measure(p, r) for p, r in zip(ps, rs)]
    macro = Metrics(sum(ps) / len(ps), sum(rs) / len(rs), sum(fs) / len(fs))
    return micro, macro


def random_baseline(mm: MeasureMap, n_measures: int,
                    seed: int) -> tuple[float, float]:
    """Seeded uniform guess of an n-measure window inside the piece.

    The window [downbeat(m), downbeat(m + n_measures)] stays within the
    mapped downbeats, so valid starts are 1 .. num_measures - n_measures.
    """
    if n_measures < 1:
        raise ValueError("n_measures must be >= 1")
    last_start = mm.num_measures - n_measures
    if last_start < 1:
        raise ValueError("piece too short for the baseline window")
    m = random.Random(seed).randint(1, last_start)
    return mm.downbeats[m - 1], mm.downbeats[m - 1 + n_measures]


# ---------------------------------------------------------------------------
# Dataset-level evaluation


@dataclass
class _ScoreData:
    bootleg: BootlegScore
    events: list[NoteEvent]
    measure_map: MeasureMap


def load_annotations(path: Path) -> list[QueryAnnotation]:
    data = json.loads(Path(path).read_text())
    queries = data["queries"] if isinstance(data, dict) else data
    return [QueryAnnotation.from_dict(q) for q in queries]


def _query_seed(base_seed: int, image_id: str) -> int:
    return base_seed ^ zlib.crc32(image_id.encode())


def _run_query(args) -> dict:
    ann, image_path, score_data, cfg = args
    hyp = (0.0, 0.0)
    error = None
    timings: dict[str, float] = {}
    try:
        raster = load_image(image_path)
        result = process_image(raster, cfg)
        timings.update(result.timings)
        alignment = align(result.score, score_data.bootleg,
                          score_data.events, cfg)
        timings.update(alignment.stage_timings)
        hyp = alignment.interval
    except (PipelineError, AlignmentError, MidiParseError, ValueError,
            OSError) as exc:
        error = str(exc)
    return _score_query(ann, hyp, score_data.measure_map, error, timings)


def _score_query(ann: QueryAnnotation, hyp: tuple[float, float],
                 mm: MeasureMap, error: str | None,
                 timings: dict[str, float]) -> dict:
    truths = ann.acceptable_intervals(mm)
    metrics, overlap, best = interval_metrics(hyp, truths)
    return {
        "imageId": ann.image_id,
        "scoreId": ann.score_id,
        "hypothesis": list(hyp),
        "truth": [list(t) for t in truths],
        "matchedTruth": list(best),
        "precision": metrics.precision,
        "recall": metrics.recall,
        "fMeasure": metrics.f_measure,
        "hypDuration": hyp[1] - hyp[0],
        "truthDuration": best[1] - best[0],
        "overlap": overlap,
        "error": error,
        "timings": timings,
    }


def evaluate_dataset(annotations_path, midi_dir, image_dir,
                     cfg: Config | None = None, baseline: bool = False,
                     workers: int | None = None,
                     split: str | None = None) -> dict:
    """Run the full pipeline on every annotated image and aggregate P/R/F.

    Per-query pipeline errors become zero-duration hypotheses rather than
    aborting the run.  A random informed-guessing baseline row is added
    when ``baseline`` is set.  ``split`` restricts the run to queries
    carrying that tag.  Deterministic given config + seed.
    """
    cfg = cfg or Config()
    midi_dir = Path(midi_dir)
    image_dir = Path(image_dir)
    annotations = load_annotations(annotations_path)
    if split is not None:
        annotations = [a for a in annotations if a.split == split]
    if not annotations:
        raise ValueError("no queries in annotations file"
                         + (f" with split {split!r}" if split else ""))

    scores: dict[str, _ScoreData] = {}
    missing: list[str] = []
    for ann in annotations:
        if ann.score_id in scores:
            continue
        midi_path = midi_dir / f"{ann.score_id}.mid"
        mm_path = midi_dir / f"{ann.score_id}.measures.json"
        try:
            events = cluster_onsets(parse_midi(midi_path.read_bytes()),
                                    cfg.onset_cluster_tol)
            mm = MeasureMap.from_dict(json.loads(mm_path.read_text()))
        except (OSError, MidiParseError, ValueError) as exc:
            missing.append(f"{ann.score_id}: {exc}")
            continue
        scores[ann.score_id] = _ScoreData(midi_bootleg(events), events, mm)

    jobs = []
    skipped_rows = []
    for ann in sorted(annotations, key=lambda a: a.image_id):
        if ann.score_id not in scores:
            skipped_rows.append({
                "imageId": ann.image_id, "scoreId": ann.score_id,
                "hypothesis": [0.0, 0.0], "truth": [], "matchedTruth": None,
                "precision": 0.0, "recall": 0.0, "fMeasure": 0.0,
                "hypDuration": 0.0, "truthDuration": 0.0, "overlap": 0.0,
                "error": "reference MIDI or measure map unavailable",
                "timings": {},
            })
            continue
        jobs.append((ann, image_dir / ann.image_id, scores[ann.score_id], cfg))

    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV_VAR, "1"))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_query, jobs))
    else:
        rows = [_run_query(job) for job in jobs]
    rows.extend(skipped_rows)
    rows.sort(key=lambda r: r["imageId"])

    report = {
        "configHash": cfg.config_hash,
        "numQueries": len(rows),
        "missingFiles": missing,
        "queries": rows,
        "aggregate": _aggregate_rows(rows),
        "failures": [r["imageId"] for r in rows if r["overlap"] == 0.0],
        "stageTimings": _timing_stats(rows),
    }
    if baseline:
        report["baseline"] = _run_baseline(annotations, scores, cfg)
    return report


def _aggregate_rows(rows) -> dict:
    triples = [(r["hypDuration"], r["truthDuration"], r["overlap"])
               for r in rows]
    micro, macro = aggregate(triples)
    return {"micro": micro.to_dict(), "macro": macro.to_dict()}


def _timing_stats(rows) -> dict:
    totals: dict[str, float] = {}
    counts: dict[str, int] = {}
    for r in rows:
        for stage, t in r["timings"].items():
            totals[stage] = totals.get(stage, 0.0) + t
            counts[stage] = counts.get(stage, 0) + 1
    return {stage: {"total": totals[stage],
                    "mean": totals[stage] / counts[stage]}
            for stage in sorted(totals)}


def _run_baseline(annotations, scores, cfg: Config) -> dict:
    rows = []
    for ann in sorted(annotations, key=lambda a: a.image_id):
        if ann.score_id not in scores:
            continue
        mm = scores[ann.score_id].measure_map
        try:
            hyp = random_baseline(mm, cfg.baseline_n_measures,
                                  _query_seed(cfg.seed, ann.image_id))
            error = None
        except ValueError as exc:
            hyp = (0.0, 0.0)
            error = str(exc)
        rows.append(_score_query(ann, hyp, mm, error, {}))
    return {
        "nMeasures": cfg.baseline_n_measures,
        "queries": rows,
        "aggregate": _aggregate_rows(rows),
    }
