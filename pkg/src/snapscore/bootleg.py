"""The bootleg score: a 62-row binary piano-notation grid.

Rows use one unified diatonic coordinate: row = 7 * octave + letter index
(C=0, D=1, ... B=6), so row 0 is C0 and row 61 is A8.  Staff lines land on
fixed rows: treble E4 G4 B4 D5 F5 = 30 32 34 36 38, bass G2 B2 D3 F3 A3 =
18 20 22 24 26.  Both the MIDI side and the image side project into this
one coordinate system, which is all the alignment needs.

Each note event occupies two identical columns followed by one all-zero
filler column, giving the aligner slack around noisy columns; a score with
N events is therefore 62 x 3N.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .midi import NoteEvent

NUM_ROWS = 62
TREBLE_LINE_ROWS = (30, 32, 34, 36, 38)  # E4 G4 B4 D5 F5
BASS_LINE_ROWS = (18, 20, 22, 24, 26)    # G2 B2 D3 F3 A3
TREBLE_TOP_LINE_ROW = 38                 # F5
BASS_TOP_LINE_ROW = 26                   # A3

# pitch class -> (letter index, octave offset) spellings, no double accidentals
_SPELLINGS: dict[int, tuple[tuple[int, int], ...]] = {
    0: ((0, 0), (6, -1)),   # C,  B sharp
    1: ((0, 0), (1, 0)),    # C sharp, D flat
    2: ((1, 0),),           # D
    3: ((1, 0), (2, 0)),    # D sharp, E flat
    4: ((2, 0), (3, 0)),    # E,  F flat
    5: ((3, 0), (2, 0)),    # F,  E sharp
    6: ((3, 0), (4, 0)),    # F sharp, G flat
    7: ((4, 0),),           # G
    8: ((4, 0), (5, 0)),    # G sharp, A flat
    9: ((5, 0),),           # A
    10: ((5, 0), (6, 0)),   # A sharp, B flat
    11: ((6, 0), (0, 1)),   # B,  C flat
}

_MASK_LIMIT = 1 << NUM_ROWS
FILLER_EVENT_SENTINEL = 0xFFFFFFFF
_MAGIC = b"BTLG"
_VERSION = 1
_COLUMN_STRUCT = struct.Struct("<QHI")


class BootlegFormatError(ValueError):
    """Raised for malformed serialized bootleg scores."""


def pitch_to_rows(pitch: int) -> set[int]:
    """All staff rows where a notehead for this MIDI pitch could appear.

    One row per enharmonic spelling; rows outside 0-61 are dropped, so the
    set is empty only for pitches beyond the notated range.
    """
    if not 0 <= pitch <= 127:
        raise ValueError(f"pitch {pitch} outside 0-127")
    octave = pitch // 12 - 1
    rows = set()
    for letter, octave_offset in _SPELLINGS[pitch % 12]:
        row = 7 * (octave + octave_offset) + letter
        if 0 <= row < NUM_ROWS:
            rows.add(row)
    return rows


def rows_to_mask(rows) -> int:
    mask = 0
    for row in rows:
        if not 0 <= row < NUM_ROWS:
            raise ValueError(f"row {row} outside 0-{NUM_ROWS - 1}")
        mask |= 1 << row
    return mask


def mask_to_rows(mask: int) -> list[int]:
    return [row for row in range(NUM_ROWS) if mask >> row & 1]


@dataclass
class BootlegScore:
    """Column masks plus per-column note counts and source event indices."""

    masks: list[int]
    counts: list[int]
    event_index: list[int | None]
    num_rows: int = field(default=NUM_ROWS, init=False, repr=False)

    def __post_init__(self) -> None:
        if not (len(self.masks) == len(self.counts) == len(self.event_index)):
            raise ValueError("masks, counts and event_index must align")
        for mask in self.masks:
            if not 0 <= mask < _MASK_LIMIT:
                raise ValueError("column mask has bits outside rows 0-61")

    @property
    def num_columns(self) -> int:
        return len(self.masks)

    def validate(self) -> "BootlegScore":
        """Check the filler/event column invariants (for produced scores)."""
        for i, (mask, count, ev) in enumerate(
                zip(self.masks, self.counts, self.event_index)):
            if ev is None:
                if mask != 0 or count != 0:
                    raise ValueError(f"filler column {i} must be empty")
            else:
                if mask == 0 or count < 1:
                    raise ValueError(f"event column {i} must have notes")
        return self

    def to_matrix(self) -> np.ndarray:
        """Dense (62, num_columns) bool matrix; row i = staff row i."""
        out = np.zeros((NUM_ROWS, self.num_columns), dtype=bool)
        for col, mask in enumerate(self.masks):
            while mask:
                low = mask & -mask
                out[low.bit_length() - 1, col] = True
                mask ^= low
        return out

    def to_debug_dict(self) -> dict:
        return {
            "numRows": NUM_ROWS,
            "numColumns": self.num_columns,
            "columns": [
                {"rows": mask_to_rows(mask), "count": count, "event": ev}
                for mask, count, ev in zip(self.masks, self.counts,
                                           self.event_index)
            ],
        }

    def to_debug_json(self) -> str:
        return json.dumps(self.to_debug_dict(), indent=2) + "\n"


def midi_bootleg(events: list[NoteEvent]) -> BootlegScore:
    """Project clustered MIDI note events into a bootleg score.

    Each event contributes [column, column, filler]; the column mask is the
    union of pitch_to_rows over the event's pitches and the count is the
    event's onset count.  Events whose pitches all fall outside the notated
    range contribute nothing.
    """
    if not events:
        raise ValueError("no events")
    masks: list[int] = []
    counts: list[int] = []
    index: list[int | None] = []
    for i, event in enumerate(events):
        rows: set[int] = set()
        for pitch in event.pitches:
            rows |= pitch_to_rows(pitch)
        if not rows:
            continue
        mask = rows_to_mask(rows)
        masks += [mask, mask, 0]
        counts += [event.onset_count, event.onset_count, 0]
        index += [i, i, None]
    return BootlegScore(masks, counts, index).validate()


def serialize(score: BootlegScore) -> bytes:
    """Binary BTLG format: magic, version, column count, then per-column
    (u64 mask, u16 count, u32 event index) little-endian records."""
    parts = [_MAGIC, bytes([_VERSION]),
             struct.pack("<I", score.num_columns)]
    for mask, count, ev in zip(score.masks, score.counts, score.event_index):
        if not 0 <= count < 0x10000:
            raise ValueError(f"count {count} does not fit in 16 bits")
        ev_field = FILLER_EVENT_SENTINEL if ev is None else ev
        if not 0 <= ev_field <= FILLER_EVENT_SENTINEL:
            raise ValueError(f"event index {ev} does not fit in 32 bits")
        parts.append(_COLUMN_STRUCT.pack(mask, count, ev_field))
    return b"".join(parts)


def deserialize(data: bytes) -> BootlegScore:
    if len(data) < 4 or data[:4] != _MAGIC:
        raise BootlegFormatError("bad magic: not a BTLG file")
    if len(data) < 9:
        raise BootlegFormatError("truncated BTLG header")
    version = data[4]
    if version != _VERSION:
        raise BootlegFormatError(f"unsupported BTLG version {version}")
    (ncols,) = struct.unpack_from("<I", data, 5)
    expected = 9 + ncols * _COLUMN_STRUCT.size
    if len(data) < expected:
        raise BootlegFormatError(
            f"truncated BTLG: need {expected} bytes, have {len(data)}")
    masks: list[int] = []
    counts: list[int] = []
    index: list[int | None] = []
    for i in range(ncols):
        mask, count, ev = _COLUMN_STRUCT.unpack_from(
            data, 9 + i * _COLUMN_STRUCT.size)
        if mask >= _MASK_LIMIT:
            raise BootlegFormatError(
                f"column {i}: reserved mask bits 62-63 set")
        masks.append(mask)
        counts.append(count)
        index.append(None if ev == FILLER_EVENT_SENTINEL else ev)
    return BootlegScore(masks, counts, index)
