"""Standard MIDI File ingestion: note onsets and simultaneity clustering.

Only onsets matter downstream, so the parser extracts Note-On events with
velocity > 0 (Note-Off and velocity-0 Note-On are ignored), applies the
tempo map to convert ticks to seconds, and discards everything else.
"""

from __future__ import annotations

from dataclasses import dataclass

DEFAULT_TEMPO_MPQN = 500_000  # 120 BPM


class MidiParseError(ValueError):
    """Raised for malformed or unsupported Standard MIDI Files."""


@dataclass(frozen=True)
class NoteOnset:
    time: float   # seconds, after tempo-map application
    pitch: int    # MIDI note number 0-127
    track: int


@dataclass(frozen=True)
class NoteEvent:
    """A group of simultaneous note onsets."""

    time: float                # time of the earliest onset in the group
    pitches: frozenset[int]
    onset_count: int


class _Reader:
    def __init__(self, data: bytes, offset: int, end: int, what: str):
        self.data = data
        self.pos = offset
        self.end = end
        self.what = what

    def remaining(self) -> int:
        return self.end - self.pos

    def bytes(self, n: int) -> bytes:
        if self.pos + n > self.end:
            raise MidiParseError(f"truncated {self.what}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.bytes(1)[0]

    def peek(self) -> int:
        if self.pos >= self.end:
            raise MidiParseError(f"truncated {self.what}")
        return self.data[self.pos]

    def varlen(self) -> int:
        value = 0
        for _ in range(4):
            b = self.u8()
            value = (value << 7) | (b & 0x7F)
            if not b & 0x80:
                return value
        raise MidiParseError(f"variable-length quantity too long in {self.what}")


def parse_midi(data: bytes) -> list[NoteOnset]:
    """Extract note onsets (seconds, pitch, track) from an SMF byte stream.

    Supports format 0 and 1 files with PPQN division.  The tempo map is
    built from Set-Tempo meta events in any track (default 120 BPM before
    the first one).  Onsets are sorted by (time, pitch).
    """
    if len(data) < 14 or data[0:4] != b"MThd":
        raise MidiParseError("MThd missing")
    header = _Reader(data, 4, len(data), "header")
    hlen = int.from_bytes(header.bytes(4), "big")
    if hlen < 6:
        raise MidiParseError("MThd chunk too short")
    body = _Reader(data, header.pos, header.pos + hlen, "header")
    fmt = int.from_bytes(body.bytes(2), "big")
    ntrks = int.from_bytes(body.bytes(2), "big")
    division = int.from_bytes(body.bytes(2), "big")
    if fmt not in (0, 1):
        raise MidiParseError(f"SMF format {fmt} unsupported (need 0 or 1)")
    if division & 0x8000:
        raise MidiParseError("SMPTE division unsupported")
    if division == 0:
        raise MidiParseError("zero ticks-per-quarter division")

    pos = header.pos + hlen
    raw_onsets: list[tuple[int, int, int]] = []  # (tick, pitch, track)
    tempos: list[tuple[int, int]] = []           # (tick, microsec per quarter)
    track_idx = 0
    while track_idx < ntrks and pos < len(data):
        if pos + 8 > len(data):
            raise MidiParseError("truncated chunk header")
        magic = data[pos:pos + 4]
        length = int.from_bytes(data[pos + 4:pos + 8], "big")
        if pos + 8 + length > len(data):
            raise MidiParseError("truncated track chunk")
        if magic != b"MTrk":
            pos += 8 + length  # alien chunk, skipped per the SMF spec
            continue
        _parse_track(data, pos + 8, pos + 8 + length, track_idx,
                     raw_onsets, tempos)
        pos += 8 + length
        track_idx += 1
    if track_idx < ntrks:
        raise MidiParseError(f"expected {ntrks} tracks, found {track_idx}")

    to_seconds = _TempoMap(tempos, division)
    onsets = [NoteOnset(to_seconds(tick), pitch, track)
              for tick, pitch, track in raw_onsets]
    onsets.sort(key=lambda o: (o.time, o.pitch))
    return onsets


def _parse_track(data: bytes, start: int, end: int, track: int,
                 onsets: list, tempos: list) -> None:
    r = _Reader(data, start, end, f"track {track}")
    tick = 0
    status = 0
    while r.remaining() > 0:
        tick += r.varlen()
        b = r.peek()
        if b >= 0x80:
            status = r.u8()
        elif status < 0x80:
            raise MidiParseError(f"running status without a prior status byte "
                                 f"in track {track}")
        if status == 0xFF:
            meta_type = r.u8()
            length = r.varlen()
            payload = r.bytes(length)
            if meta_type == 0x51 and length == 3:
                tempos.append((tick, int.from_bytes(payload, "big")))
            if meta_type == 0x2F:
                return
            status = 0  # meta events cancel running status
            continue
        if status in (0xF0, 0xF7):
            r.bytes(r.varlen())
            status = 0  # sysex cancels running status
            continue
        kind = status & 0xF0
        if kind in (0xC0, 0xD0):
            r.u8()
            continue
        if kind in (0x80, 0x90, 0xA0, 0xB0, 0xE0):
            d1 = r.u8()
            d2 = r.u8()
            if kind == 0x90 and d2 > 0:
                onsets.append((tick, d1, track))
            continue
        raise MidiParseError(f"unexpected status byte 0x{status:02X} "
                             f"in track {track}")


class _TempoMap:
    """Piecewise-linear tick -> seconds conversion."""

    def __init__(self, tempos: list[tuple[int, int]], division: int):
        self.division = division
        segments = [(0, 0.0, DEFAULT_TEMPO_MPQN)]
        for tick, mpqn in sorted(tempos, key=lambda t: t[0]):
            at_tick, at_time, cur = segments[-1]
            if tick == at_tick:
                segments[-1] = (tick, at_time, mpqn)
                continue
            time = at_time + (tick - at_tick) * cur / (division * 1e6)
            segments.append((tick, time, mpqn))
        self.segments = segments

    def __call__(self, tick: int) -> float:
        seg = self.segments[0]
        for cand in self.segments:
            if cand[0] > tick:
                break
            seg = cand
        at_tick, at_time, mpqn = seg
        return at_time + (tick - at_tick) * mpqn / (self.division * 1e6)


def cluster_onsets(onsets: list[NoteOnset], tol: float = 0.05) -> list[NoteEvent]:
    """Greedy anchored grouping of time-sorted onsets into note events.

    A group opens at the first unassigned onset t0 and absorbs every onset
    with time < t0 + tol; grouping is anchored, not transitive, so a fast
    run cannot chain into one giant event.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    events = []
    i = 0
    n = len(onsets)
    while i < n:
        t0 = onsets[i].time
        j = i
        while j < n and onsets[j].time < t0 + tol:
            j += 1
        events.append(NoteEvent(
            time=t0,
            pitches=frozenset(o.pitch for o in onsets[i:j]),
            onset_count=j - i,
        ))
        i = j
    return events
