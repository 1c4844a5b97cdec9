"""Synthetic test data: SMF byte streams and rendered sheet-music pages.

The renderer draws the handful of shapes the pipeline cares about (staves,
filled elliptical noteheads, stems, beams, bar lines, ledger lines) plus a
mild illumination gradient, and reports exact ground truth for every
notehead it draws.  It exists for the test suite and demo scripts; nothing
in the retrieval pipeline depends on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import imageops as ops
from .bootleg import BASS_TOP_LINE_ROW, TREBLE_TOP_LINE_ROW, pitch_to_rows
from .midi import NoteEvent, cluster_onsets, parse_midi

# ---------------------------------------------------------------------------
# Standard MIDI File construction


def _vlq(value: int) -> bytes:
    if value < 0:
        raise ValueError("negative delta time")
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append(value & 0x7F | 0x80)
        value >>= 7
    return bytes(reversed(out))


def _track_chunk(events: list[tuple[int, bytes]]) -> bytes:
    """Assemble (absolute tick, event bytes) into an MTrk chunk."""
    events = sorted(events, key=lambda e: e[0])
    body = bytearray()
    prev = 0
    for tick, payload in events:
        body += _vlq(tick - prev)
        body += payload
        prev = tick
    body += _vlq(0) + bytes([0xFF, 0x2F, 0x00])
    return b"MTrk" + len(body).to_bytes(4, "big") + bytes(body)


def build_smf(notes, division: int = 480, tempo_changes=(),
              note_duration: int = 240, velocity: int = 64,
              fmt: int = 1) -> bytes:
    """A format-0/1 SMF with the given (tick, pitch) note onsets.

    ``tempo_changes`` is a list of (tick, microseconds per quarter note);
    format 1 puts them in a dedicated first track.
    """
    note_events: list[tuple[int, bytes]] = []
    for tick, pitch in notes:
        note_events.append((tick, bytes([0x90, pitch, velocity])))
        note_events.append((tick + note_duration, bytes([0x80, pitch, 0])))
    tempo_events = [(tick, bytes([0xFF, 0x51, 0x03]) + mpqn.to_bytes(3, "big"))
                    for tick, mpqn in tempo_changes]
    if fmt == 0:
        tracks = [_track_chunk(tempo_events + note_events)]
    elif fmt == 1:
        tracks = [_track_chunk(tempo_events), _track_chunk(note_events)]
    else:
        raise ValueError("fmt must be 0 or 1")
    header = b"MThd" + (6).to_bytes(4, "big") + fmt.to_bytes(2, "big") \
        + len(tracks).to_bytes(2, "big") + division.to_bytes(2, "big")
    return header + b"".join(tracks)


# ---------------------------------------------------------------------------
# Piece generation

_NATURAL_PC = (0, 2, 4, 5, 7, 9, 11)  # C D E F G A B
_SHARPENABLE_LETTERS = (0, 1, 3, 4, 5)  # C D F G A keep their row when sharpened


def row_to_natural_pitch(row: int) -> int:
    octave, letter = divmod(row, 7)
    return 12 * (octave + 1) + _NATURAL_PC[letter]


def preferred_row(pitch: int) -> int | None:
    """The row a typical engraving would use: natural, else sharp spelling."""
    octave = pitch // 12 - 1
    pc = pitch % 12
    if pc in _NATURAL_PC:
        return 7 * octave + _NATURAL_PC.index(pc)
    return 7 * octave + _NATURAL_PC.index(pc - 1)  # sharp of the letter below


def generate_piece(rng: np.random.Generator, n_measures: int,
                   events_per_measure: int = 4,
                   ticks_per_event: int = 480) -> list[tuple[int, int]]:
    """Random (tick, pitch) list shaped like simple two-hand piano music.

    Pitches random-walk over rows 16-42 so everything renders near the two
    staves; a third of the events are chords of stacked thirds/fourths.
    """
    notes: list[tuple[int, int]] = []
    treble_row = 33
    bass_row = 21
    for e in range(n_measures * events_per_measure):
        tick = e * ticks_per_event
        treble_row = int(np.clip(treble_row + rng.integers(-2, 3), 29, 42))
        bass_row = int(np.clip(bass_row + rng.integers(-2, 3), 16, 27))
        rows = [treble_row]
        draw = rng.random()
        if draw < 0.35:
            rows.append(bass_row)
        if draw < 0.20:
            rows.append(min(44, treble_row + int(rng.integers(2, 4))))
        for row in rows:
            pitch = row_to_natural_pitch(row)
            letter = row % 7
            if letter in _SHARPENABLE_LETTERS and rng.random() < 0.15:
                pitch += 1
            notes.append((tick, pitch))
    return notes


# ---------------------------------------------------------------------------
# Page rendering


@dataclass(frozen=True)
class PageLayout:
    spacing: int = 16               # px between adjacent staff lines
    line_thickness: int = 2
    n_systems: int = 2
    measures_per_system: int = 2
    events_per_measure: int = 4
    width: int = 1000
    margin_x: int = 60
    margin_top: int = 70
    margin_bottom: int = 50
    inter_staff_gap: int = 6        # spacings between treble bottom, bass top
    system_gap: int = 7             # spacings between systems
    notehead_rx: float = 0.72       # semi-axes in spacings
    notehead_ry: float = 0.58
    stem_spacings: float = 3.2
    barline_width: int = 3

    @property
    def events_per_system(self) -> int:
        return self.measures_per_system * self.events_per_measure

    @property
    def grand_staff_height(self) -> int:
        return (8 + self.inter_staff_gap) * self.spacing

    @property
    def system_pitch(self) -> int:
        return self.grand_staff_height + self.system_gap * self.spacing

    @property
    def height(self) -> int:
        return (self.margin_top + self.n_systems * self.system_pitch
                - self.system_gap * self.spacing + self.margin_bottom)

    @property
    def beam_thickness(self) -> int:
        return int(np.clip(round(0.4 * self.spacing), 6, 10))


@dataclass(frozen=True)
class NoteheadTruth:
    x: float
    y: float
    row: int
    event_index: int     # global event index in the piece
    system_index: int


@dataclass
class RenderedPage:
    image: np.ndarray                       # [0, 1], 1 = paper
    layout: PageLayout
    noteheads: list[NoteheadTruth]
    system_y_ranges: list[tuple[int, int]]  # bar line extents per system
    first_measure: int                      # 1-based, inclusive
    last_measure: int
    first_event: int                        # global event indices, inclusive
    last_event: int
    hollow: bool = False


def _fill_rect(img: np.ndarray, r0: float, r1: float, c0: float, c1: float
               ) -> None:
    h, w = img.shape
    r0i, r1i = max(0, int(round(r0))), min(h, int(round(r1)))
    c0i, c1i = max(0, int(round(c0))), min(w, int(round(c1)))
    if r0i < r1i and c0i < c1i:
        img[r0i:r1i, c0i:c1i] = 0.0


def _fill_ellipse(img: np.ndarray, cy: float, cx: float, ry: float, rx: float,
                  hollow: bool = False) -> None:
    h, w = img.shape
    r0 = max(0, int(math.floor(cy - ry)))
    r1 = min(h, int(math.ceil(cy + ry)) + 1)
    c0 = max(0, int(math.floor(cx - rx)))
    c1 = min(w, int(math.ceil(cx + rx)) + 1)
    if r0 >= r1 or c0 >= c1:
        return
    yy, xx = np.mgrid[r0:r1, c0:c1]
    d = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2
    mask = d <= 1.0
    if hollow:
        inner = ((yy - cy) / (ry * 0.55)) ** 2 + ((xx - cx) / (rx * 0.62)) ** 2
        mask &= inner > 1.0
    patch = img[r0:r1, c0:c1]
    patch[mask] = 0.0


def render_page(events: list[NoteEvent], layout: PageLayout,
                first_measure: int = 1, seed: int = 0,
                lighting: bool = True, hollow: bool = False,
                shear: float = 0.0) -> RenderedPage:
    """Draw ``n_systems * measures_per_system`` measures starting at
    ``first_measure`` (1-based) on a white page.

    Every event is one engraving slot; its pitches become filled noteheads
    at their preferred-spelling rows.  Ground truth is returned for each
    drawn notehead along with the bar-line extent of each system.
    ``shear`` tilts the page like a camera held at an angle: content at
    column x shifts down by shear * x pixels (truth is shifted to match).
    """
    lay = layout
    rng = np.random.default_rng(seed)
    img = np.ones((lay.height, lay.width))
    s = lay.spacing
    content_w = lay.width - 2 * lay.margin_x
    slot_dx = content_w / lay.events_per_system

    truth: list[NoteheadTruth] = []
    system_ranges: list[tuple[int, int]] = []
    epm = lay.events_per_measure
    first_event = (first_measure - 1) * epm

    for sys_i in range(lay.n_systems):
        treble_top = lay.margin_top + sys_i * lay.system_pitch
        bass_top = treble_top + (4 + lay.inter_staff_gap) * s
        bottom = bass_top + 4 * s + lay.line_thickness
        system_ranges.append((treble_top, bottom - 1))

        for staff_top in (treble_top, bass_top):
            for line in range(5):
                y = staff_top + line * s
                _fill_rect(img, y, y + lay.line_thickness,
                           lay.margin_x - 0.5 * s, lay.width - lay.margin_x + 0.5 * s)
        for m in range(lay.measures_per_system + 1):
            x = lay.margin_x + m * epm * slot_dx
            _fill_rect(img, treble_top, bottom, x - lay.barline_width / 2,
                       x + lay.barline_width / 2)

        for m in range(lay.measures_per_system):
            measure_idx = first_measure + sys_i * lay.measures_per_system + m
            beamed = rng.random() < 0.35
            measure_heads: list[tuple[float, float]] = []
            for k in range(epm):
                ev_global = (measure_idx - 1) * epm + k
                if ev_global >= len(events):
                    continue
                slot = m * epm + k
                x = lay.margin_x + (slot + 0.5) * slot_dx
                drawn = _draw_event(img, events[ev_global], x, treble_top,
                                    bass_top, lay, hollow)
                for (nx, ny, row) in drawn:
                    truth.append(NoteheadTruth(nx, ny, row, ev_global, sys_i))
                measure_heads.extend((nx, ny) for nx, ny, _ in drawn)
            if beamed and len({p[0] for p in measure_heads}) >= 2 and not hollow:
                _draw_beam(img, measure_heads, treble_top, lay)

    if shear:
        img, truth, system_ranges = _apply_shear(img, truth, system_ranges,
                                                 lay, shear)
    img = ops.box_blur(img, 1)  # soften hard edges a little
    if lighting:
        img = _apply_lighting(img, rng)
    noise = rng.normal(0.0, 0.008, img.shape)
    img = np.clip(img + noise, 0.0, 1.0)

    n_measures_shown = lay.n_systems * lay.measures_per_system
    last_measure = first_measure + n_measures_shown - 1
    return RenderedPage(
        image=img,
        layout=lay,
        noteheads=truth,
        system_y_ranges=system_ranges,
        first_measure=first_measure,
        last_measure=last_measure,
        first_event=first_event,
        last_event=min(last_measure * epm, len(events)) - 1,
        hollow=hollow,
    )


def _draw_event(img, event: NoteEvent, x: float, treble_top: float,
                bass_top: float, lay: PageLayout, hollow: bool
                ) -> list[tuple[float, float, int]]:
    s = lay.spacing
    drawn: list[tuple[float, float, int]] = []
    by_staff: dict[str, list[tuple[float, int, int]]] = {"upper": [], "lower": []}
    for pitch in sorted(event.pitches):
        row = preferred_row(pitch)
        if row is None or row not in pitch_to_rows(pitch):
            continue
        if row >= 28:
            staff, top_y, top_row = "upper", treble_top, TREBLE_TOP_LINE_ROW
        else:
            staff, top_y, top_row = "lower", bass_top, BASS_TOP_LINE_ROW
        pos = top_row - row
        y = top_y + pos * s / 2.0 + lay.line_thickness / 2.0
        _fill_ellipse(img, y, x, lay.notehead_ry * s, lay.notehead_rx * s,
                      hollow=hollow)
        _draw_ledger_lines(img, x, pos, top_y, lay)
        drawn.append((x, y, row))
        by_staff[staff].append((y, pos, row))

    for staff, heads in by_staff.items():
        if not heads or hollow:
            continue
        ys = [h[0] for h in heads]
        mean_pos = sum(h[1] for h in heads) / len(heads)
        stem_up = mean_pos >= 4
        if stem_up:
            sx = x + lay.notehead_rx * s - 2
            _fill_rect(img, min(ys) - lay.stem_spacings * s, max(ys), sx, sx + 2)
        else:
            sx = x - lay.notehead_rx * s
            _fill_rect(img, min(ys), max(ys) + lay.stem_spacings * s, sx, sx + 2)
    return drawn


def _draw_ledger_lines(img, x: float, pos: int, staff_top_y: float,
                       lay: PageLayout) -> None:
    s = lay.spacing
    half_len = 1.1 * lay.notehead_rx * s
    ledger_positions = []
    if pos <= -2:
        ledger_positions = range(-2, pos - 1, -2)
    elif pos >= 10:
        ledger_positions = range(10, pos + 1, 2)
    for lp in ledger_positions:
        y = staff_top_y + lp * s / 2.0
        _fill_rect(img, y, y + lay.line_thickness, x - half_len, x + half_len)


def _draw_beam(img, heads: list[tuple[float, float]], treble_top: float,
               lay: PageLayout) -> None:
    # beam sits at the stem tips, beyond the outermost notehead of the run
    s = lay.spacing
    xs = [p[0] for p in heads]
    ys = [p[1] for p in heads]
    stem_up = (sum(ys) / len(ys)) >= treble_top + 2 * s
    if stem_up:
        y = min(ys) - lay.stem_spacings * s
    else:
        y = max(ys) + lay.stem_spacings * s - lay.beam_thickness
    _fill_rect(img, y, y + lay.beam_thickness,
               min(xs) - lay.notehead_rx * s, max(xs) + lay.notehead_rx * s)


def _apply_shear(img: np.ndarray, truth: list[NoteheadTruth],
                 system_ranges: list[tuple[int, int]], lay: PageLayout,
                 shear: float):
    h, w = img.shape
    shifts = np.round(shear * np.arange(w)).astype(int)
    rows = np.clip(np.arange(h)[:, None] - shifts[None, :], 0, h - 1)
    sheared = img[rows, np.arange(w)[None, :]]
    new_truth = [NoteheadTruth(t.x, t.y + shear * t.x, t.row, t.event_index,
                               t.system_index) for t in truth]
    lo = int(round(shear * lay.margin_x))
    hi = int(round(shear * (lay.width - lay.margin_x)))
    new_ranges = [(top + min(lo, hi), bottom + max(lo, hi))
                  for top, bottom in system_ranges]
    return sheared, new_truth, new_ranges


def _apply_lighting(img: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    h, w = img.shape
    gx = rng.uniform(-0.25, 0.25)
    gy = rng.uniform(-0.25, 0.25)
    floor = rng.uniform(0.72, 0.85)
    yy = np.linspace(0.0, 1.0, h)[:, None]
    xx = np.linspace(0.0, 1.0, w)[None, :]
    ramp = gx * xx + gy * yy
    ramp -= ramp.min()
    if ramp.max() > 0:
        ramp /= ramp.max()
    illum = 1.0 - (1.0 - floor) * ramp
    return img * illum


# ---------------------------------------------------------------------------
# Whole synthetic scores (MIDI + pages + ground-truth measure map)


@dataclass
class SyntheticScore:
    score_id: str
    smf: bytes
    events: list[NoteEvent]          # as parsed back from the SMF
    downbeats: list[float]
    end_time: float
    events_per_measure: int
    pages: list[RenderedPage] = field(default_factory=list)

    def measure_map_dict(self) -> dict:
        return {"downbeats": self.downbeats, "endTime": self.end_time}


def make_score(score_id: str, rng: np.random.Generator, n_measures: int = 12,
               events_per_measure: int = 4) -> SyntheticScore:
    notes = generate_piece(rng, n_measures, events_per_measure)
    smf = build_smf(notes)
    events = cluster_onsets(parse_midi(smf))
    seconds_per_event = 0.5
    downbeats = [m * events_per_measure * seconds_per_event
                 for m in range(n_measures)]
    end_time = n_measures * events_per_measure * seconds_per_event
    return SyntheticScore(
        score_id=score_id,
        smf=smf,
        events=events,
        downbeats=downbeats,
        end_time=end_time,
        events_per_measure=events_per_measure,
    )


def write_dataset(out_dir, n_scores: int = 10, pages_per_score: int = 1,
                  seed: int = 0, n_measures: int = 12,
                  spacings=(12, 14, 16, 18, 20, 22, 24)) -> dict:
    """A ready-to-evaluate dataset: MIDI files, measure maps, page images,
    annotations.  Returns the paths plus the in-memory scores/pages.
    """
    import json
    from pathlib import Path

    from .imgio import save_gray

    out_dir = Path(out_dir)
    midi_dir = out_dir / "midi"
    image_dir = out_dir / "images"
    midi_dir.mkdir(parents=True, exist_ok=True)
    image_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed)
    queries = []
    scores = []
    for i in range(n_scores):
        score_id = f"score{i:03d}"
        score = make_score(score_id, rng, n_measures=n_measures)
        (midi_dir / f"{score_id}.mid").write_bytes(score.smf)
        (midi_dir / f"{score_id}.measures.json").write_text(
            json.dumps(score.measure_map_dict()) + "\n")
        spacing = spacings[i % len(spacings)]
        lay = PageLayout(spacing=spacing,
                         n_systems=3 if spacing <= 14 else 2,
                         measures_per_system=2)
        shown = lay.n_systems * lay.measures_per_system
        for p in range(pages_per_score):
            first = int(rng.integers(1, n_measures - shown + 2))
            page = render_page(score.events, lay, first_measure=first,
                               seed=int(rng.integers(0, 2 ** 31)))
            image_id = f"{score_id}_p{p}.png"
            save_gray(image_dir / image_id, page.image)
            score.pages.append(page)
            queries.append({
                "imageId": image_id,
                "scoreId": score_id,
                "measures": [page.first_measure, page.last_measure],
            })
        scores.append(score)

    annotations = out_dir / "annotations.json"
    annotations.write_text(json.dumps({"queries": queries}, indent=2) + "\n")
    return {
        "annotations": annotations,
        "midi_dir": midi_dir,
        "image_dir": image_dir,
        "scores": scores,
    }
