"""Photo -> query bootleg score pipeline.

Five stages: preprocessing, notehead detection with test-time template
adaptation, a staff-line comb-filter feature tensor, bar-line detection
with music-line clustering, and the final bootleg projection.  Only filled
noteheads are detected; half and whole notes are out of scope by design.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import imageops as ops
from .bootleg import (BASS_TOP_LINE_ROW, NUM_ROWS, TREBLE_TOP_LINE_ROW,
                      BootlegScore, rows_to_mask)
from .config import Config
from .imageops import StructuringElement


class PipelineError(RuntimeError):
    """Raised when a stage cannot produce a usable result for this image."""


@dataclass(frozen=True)
class NoteheadDetection:
    bbox: tuple[int, int, int, int]   # (row_min, col_min, row_max, col_max)
    center: tuple[float, float]       # (x, y) pixels
    area: int                         # foreground pixels of the source region
    from_chord_split: bool = False


@dataclass
class NoteheadTemplate:
    """What a filled notehead looks like in this image, learned at test time."""

    height: int
    width: int
    area: int
    patch: np.ndarray


@dataclass
class StaffFeatureTensor:
    """Comb-filter responses, one slice per candidate staff-line spacing."""

    responses: np.ndarray             # (H, W, n_comb) float32
    spacings: tuple[int, ...]         # ascending, pixels between staff lines
    col_prefix: np.ndarray = field(repr=False, default=None)  # (H, W+1, n_comb)

    def __post_init__(self) -> None:
        if self.responses.shape[2] != len(self.spacings):
            raise ValueError("comb count must match spacings")
        if self.col_prefix is None:
            prefix = np.zeros((self.responses.shape[0],
                               self.responses.shape[1] + 1,
                               self.responses.shape[2]))
            np.cumsum(self.responses, axis=1, dtype=np.float64,
                      out=prefix[:, 1:, :])
            self.col_prefix = prefix


@dataclass(frozen=True)
class MusicLine:
    """One grand-staff system, delimited by its clustered bar lines."""

    y_top: int
    y_bottom: int
    barlines: tuple[tuple[int, int, int, int], ...]  # region bboxes


@dataclass(frozen=True)
class LocalStaffEstimate:
    top_line_y: float
    spacing: int
    comb_index: int
    score: float

    @property
    def middle_line_y(self) -> float:
        return self.top_line_y + 2 * self.spacing

    @property
    def bottom_line_y(self) -> float:
        return self.top_line_y + 4 * self.spacing


@dataclass(frozen=True)
class LabeledNotehead:
    detection: NoteheadDetection
    line_index: int
    staff: str            # "upper" or "lower"
    staff_position: int   # 0 = top staff line, +1 per half space downward
    row: int              # bootleg row
    local_spacing: int


@dataclass(frozen=True)
class QueryNoteEvent:
    rows: frozenset[int]
    count: int
    line_index: int
    x: float


@dataclass
class SheetPipelineResult:
    resized: np.ndarray          # grayscale after resize, before subtraction
    preprocessed: np.ndarray     # ink-is-high input to all detectors
    staff_isolated: np.ndarray   # horizontal opening after beam removal
    score: BootlegScore
    detections: list[NoteheadDetection]
    template: NoteheadTemplate
    estimates: list[LocalStaffEstimate]
    labeled: list[LabeledNotehead | None]   # aligned with detections
    lines: list[MusicLine]
    events: list[QueryNoteEvent]
    num_discarded: int
    timings: dict[str, float]


def preprocess(raster: np.ndarray, cfg: Config) -> tuple[np.ndarray, np.ndarray]:
    """Grayscale -> resize -> background subtraction.

    Returns (resized grayscale, preprocessed ink-is-high image); the resized
    image is kept for overlays since all pipeline coordinates live in it.
    """
    raster = np.asarray(raster)
    if raster.ndim == 3:
        gray = ops.to_grayscale(raster)
    elif raster.ndim == 2:
        gray = raster.astype(np.float64)
        if gray.size == 0:
            raise ValueError("empty image")
        if gray.max() > 1.0:
            gray = gray / 255.0
        gray = np.clip(gray, 0.0, 1.0)
    else:
        raise ValueError(f"expected 2-D or 3-D raster, got shape {raster.shape}")
    resized = ops.resize_max_dim(gray, cfg.max_dim)
    return resized, ops.background_subtract(resized, cfg.blur_half_width)


def detect_noteheads(img: np.ndarray, cfg: Config
                     ) -> tuple[list[NoteheadDetection], NoteheadTemplate]:
    """Find filled noteheads by template adaptation plus candidate filtering.

    A circular opening keeps only dense blobs, blob detection seeds a mean
    notehead template from the image itself, and connected components of
    the opened image are kept when their shape roughly matches the
    template.  Oversized components are treated as chord blocks and split
    with k-means into their estimated number of noteheads.
    """
    opened = ops.opening(img, StructuringElement.disc(cfg.notehead_se_radius))
    keypoints = ops.simple_blob_detect(
        opened, cfg.blob_min_area, cfg.blob_max_area,
        cfg.blob_num_thresholds, cfg.blob_min_dist)
    template = _adapt_template(opened, keypoints, cfg.crop_size)

    try:
        binary, _ = ops.otsu_binarize(opened)
    except ValueError as exc:
        raise PipelineError(f"template adaptation failed: {exc}") from exc
    regions, labels = ops.connected_components(binary)

    t_aspect = template.height / template.width
    detections: list[NoteheadDetection] = []
    for region_id, reg in enumerate(regions, start=1):
        aspect = reg.height / reg.width
        is_single = (
            cfg.cand_height_lo * template.height <= reg.height
            <= cfg.cand_height_hi * template.height
            and cfg.cand_width_lo * template.width <= reg.width
            <= cfg.cand_width_hi * template.width
            and cfg.cand_aspect_lo * t_aspect <= aspect
            <= cfg.cand_aspect_hi * t_aspect
            and cfg.cand_area_lo * template.area <= reg.pixel_count
            <= cfg.cand_area_hi * template.area
        )
        if is_single:
            detections.append(NoteheadDetection(
                bbox=reg.bbox,
                center=(reg.centroid[1], reg.centroid[0]),
                area=reg.pixel_count,
            ))
        elif reg.pixel_count >= cfg.chord_area_min * template.area:
            detections.extend(_split_chord_block(
                labels, region_id, reg, template, img.shape))
    return detections, template


def _adapt_template(opened: np.ndarray, keypoints, crop_size: int
                    ) -> NoteheadTemplate:
    half = crop_size // 2
    h, w = opened.shape
    crops = []
    for kp in keypoints:
        r = round(kp.center[0])
        c = round(kp.center[1])
        if half <= r < h - half and half <= c < w - half:
            crops.append(opened[r - half:r + half + 1, c - half:c + half + 1])
    if not crops:
        raise PipelineError("template adaptation failed: no usable blob "
                            "keypoints")
    patch = np.mean(crops, axis=0)
    try:
        fg, _ = ops.otsu_binarize(patch)
    except ValueError as exc:
        raise PipelineError(f"template adaptation failed: {exc}") from exc
    rows = np.flatnonzero(fg.any(axis=1))
    cols = np.flatnonzero(fg.any(axis=0))
    if len(rows) == 0:
        raise PipelineError("template adaptation failed: empty template")
    return NoteheadTemplate(
        height=int(rows[-1] - rows[0] + 1),
        width=int(cols[-1] - cols[0] + 1),
        area=int(fg.sum()),
        patch=patch,
    )


def _split_chord_block(labels: np.ndarray, region_id: int, reg: ops.Region,
                       template: NoteheadTemplate, shape: tuple[int, int]
                       ) -> list[NoteheadDetection]:
    k = round(reg.pixel_count / template.area)
    pix_rows, pix_cols = np.nonzero(labels == region_id)
    k = max(2, min(k, len(pix_rows)))
    centers = ops.kmeans_2d(np.column_stack([pix_cols, pix_rows]), k)
    h, w = shape
    out = []
    for x, y in centers:
        half_h = template.height // 2
        half_w = template.width // 2
        r, c = round(y), round(x)
        out.append(NoteheadDetection(
            bbox=(max(0, r - half_h), max(0, c - half_w),
                  min(h - 1, r + half_h), min(w - 1, c + half_w)),
            center=(x, y),
            area=template.area,
            from_chord_split=True,
        ))
    return out


def comb_filter(spacing: int, impulse_height: int = 2) -> np.ndarray:
    """One-column comb kernel with five bands one staff spacing apart.

    Height is 4*spacing + impulse_height; band i occupies rows [i*spacing,
    i*spacing + impulse_height) with weight 1/(5*impulse_height), so a
    perfectly matching unit-intensity staff yields a response of 1.0 with
    the peak on the middle line.
    """
    if spacing < 2:
        raise ValueError("spacing must be >= 2")
    height = 4 * spacing + impulse_height
    kernel = np.zeros((height, 1))
    weight = 1.0 / (5 * impulse_height)
    for band in range(5):
        kernel[band * spacing:band * spacing + impulse_height, 0] = weight
    return kernel


def _pad_kernel_odd(kernel: np.ndarray) -> np.ndarray:
    # convolve2d needs odd dims; appending a zero row keeps the anchor
    # inside the middle band
    if kernel.shape[0] % 2 == 0:
        kernel = np.vstack([kernel, np.zeros((1, kernel.shape[1]))])
    return kernel


def remove_beams(horiz: np.ndarray, thickness_thresh: int) -> np.ndarray:
    """Zero out foreground pixels in vertical runs thicker than staff lines."""
    try:
        binary, _ = ops.otsu_binarize(horiz)
    except ValueError:
        return horiz.copy()  # blank image: nothing to remove
    run_len = _vertical_run_lengths(binary)
    return np.where(binary & (run_len > thickness_thresh), 0.0, horiz)


def _vertical_run_lengths(binary: np.ndarray) -> np.ndarray:
    h, w = binary.shape
    rows = np.arange(h)[:, None]
    above = np.vstack([np.zeros((1, w), dtype=bool), binary[:-1]])
    below = np.vstack([binary[1:], np.zeros((1, w), dtype=bool)])
    starts = np.where(binary & ~above, rows, -1)
    start_row = np.maximum.accumulate(starts, axis=0)
    ends = np.where(binary & ~below, rows, h)
    end_row = np.flip(np.minimum.accumulate(np.flip(ends, axis=0), axis=0),
                      axis=0)
    return np.where(binary, end_row - start_row + 1, 0)


def staff_feature_tensor(img: np.ndarray, cfg: Config) -> tuple[StaffFeatureTensor,
                                                                np.ndarray]:
    """Comb-filter response volume over the staff-line-only image.

    A short, wide opening keeps only horizontal structure, beams are
    removed by their thickness, and each candidate spacing's comb filter is
    convolved over the result.  Returns the tensor and the beam-free
    intermediate (for overlays).
    """
    horiz = ops.opening(img, StructuringElement.horizontal(cfg.horiz_se_width))
    cleaned = remove_beams(horiz, cfg.beam_thickness_thresh)
    spacings = cfg.comb_spacings
    h, w = img.shape
    responses = np.empty((h, w, len(spacings)), dtype=np.float32)
    for i, spacing in enumerate(spacings):
        kernel = _pad_kernel_odd(comb_filter(spacing, cfg.impulse_height))
        target = cleaned
        pad = 0
        if kernel.shape[0] > h:
            # image shorter than the comb: replicate rows, convolve, crop
            pad = kernel.shape[0] // 2 + 1
            target = np.pad(cleaned, ((pad, pad), (0, 0)), mode="edge")
        out = ops.convolve2d(target, kernel)
        responses[:, :, i] = out[pad:pad + h]
    return StaffFeatureTensor(responses, spacings), cleaned


def detect_barlines(img: np.ndarray, cfg: Config) -> list[MusicLine]:
    """Find bar lines and cluster them into lines of music (grand staves).

    Vertical opening keeps bar lines, note stems and border bands; border
    bands are dropped by width, stems by an Otsu split on heights (bar
    lines span a whole grand staff, stems do not).  Bar lines with any
    vertical overlap form one music line.
    """
    vert = ops.opening(img, StructuringElement.vertical(cfg.vert_se_height))
    try:
        binary, _ = ops.otsu_binarize(vert)
    except ValueError as exc:
        raise PipelineError(f"no music lines found: {exc}") from exc
    regions, _ = ops.connected_components(binary)
    candidates = [r for r in regions if r.width <= cfg.barline_max_width]
    if not candidates:
        raise PipelineError("no music lines found")

    heights = [r.height for r in candidates]
    if max(heights) <= 1.1 * min(heights):
        bars = candidates  # no stems present; everything is a bar line
    else:
        split = ops.otsu_split_values(heights)
        bars = [r for r in candidates if r.height >= split]
    if not bars:
        raise PipelineError("no music lines found")

    uf = ops._UnionFind(len(bars))
    for i in range(len(bars)):
        for j in range(i + 1, len(bars)):
            a, b = bars[i].bbox, bars[j].bbox
            if a[0] <= b[2] and b[0] <= a[2]:
                uf.union(i, j)
    clusters: dict[int, list[ops.Region]] = {}
    for i, bar in enumerate(bars):
        clusters.setdefault(uf.find(i), []).append(bar)

    lines = []
    for members in clusters.values():
        lines.append(MusicLine(
            y_top=min(m.bbox[0] for m in members),
            y_bottom=max(m.bbox[2] for m in members),
            barlines=tuple(sorted((m.bbox for m in members),
                                  key=lambda b: (b[1], b[0]))),
        ))
    lines.sort(key=lambda line: line.y_top)
    return lines


def estimate_local_staff(tensor: StaffFeatureTensor,
                         detection: NoteheadDetection,
                         cfg: Config) -> LocalStaffEstimate:
    """Pick the (row, spacing) maximizing summed comb response near a notehead.

    The context window spans +-4 max spacings vertically and
    +-context_half_width horizontally, clamped to the image.  Responses are
    summed across the window's columns; the argmax row is the staff's
    middle line and the argmax comb gives the spacing.  Each comb may only
    claim rows within 5 of its own spacings of the notehead (a notehead
    belongs to a staff it could plausibly sit on; without this, the other
    staff of the same grand staff ties the response at small spacings and
    steals the estimate).  Ties prefer the smaller comb, then smaller row.
    """
    h, w, _ = tensor.responses.shape
    x, y = detection.center
    yi, xi = round(y), round(x)
    half_h = 4 * max(tensor.spacings)
    r0, r1 = max(0, yi - half_h), min(h, yi + half_h + 1)
    c0, c1 = max(0, xi - cfg.context_half_width), \
        min(w, xi + cfg.context_half_width + 1)
    sums = tensor.col_prefix[r0:r1, c1, :] - tensor.col_prefix[r0:r1, c0, :]
    row_dist = np.abs(np.arange(r0, r1) - y)[:, None]
    allowed = row_dist <= 5.0 * np.asarray(tensor.spacings)[None, :]
    sums = np.where(allowed, sums, -np.inf)
    by_comb = sums.T  # (n_comb, rows): flat argmax prefers small comb, row
    flat = int(np.argmax(by_comb))
    comb_index, row_local = divmod(flat, by_comb.shape[1])
    middle_y = r0 + row_local
    spacing = tensor.spacings[comb_index]
    return LocalStaffEstimate(
        top_line_y=float(middle_y - 2 * spacing),
        spacing=spacing,
        comb_index=comb_index,
        score=float(by_comb[comb_index, row_local]),
    )


def label_notehead(detection: NoteheadDetection, est: LocalStaffEstimate,
                   lines: list[MusicLine]) -> LabeledNotehead | None:
    """Quantize a notehead onto its staff and map it to a bootleg row.

    Returns None (a discard) when the estimated staff's middle line falls
    outside every detected music line, which happens for staves cut off at
    the image border, or when the quantized position leaves the 62 rows.
    """
    staff_position = int(np.floor(
        2.0 * (detection.center[1] - est.top_line_y) / est.spacing + 0.5))
    middle_y = est.middle_line_y
    line_index = next((i for i, line in enumerate(lines)
                       if line.y_top <= middle_y <= line.y_bottom), None)
    if line_index is None:
        return None
    line = lines[line_index]
    upper = middle_y <= (line.y_top + line.y_bottom) / 2.0
    top_row = TREBLE_TOP_LINE_ROW if upper else BASS_TOP_LINE_ROW
    row = top_row - staff_position
    if not 0 <= row < NUM_ROWS:
        return None
    return LabeledNotehead(
        detection=detection,
        line_index=line_index,
        staff="upper" if upper else "lower",
        staff_position=staff_position,
        row=row,
        local_spacing=est.spacing,
    )


def group_simultaneous(labeled: list[LabeledNotehead],
                       cfg: Config) -> list[QueryNoteEvent]:
    """Collapse labeled noteheads into left-to-right simultaneous events.

    Lines are processed top to bottom; within a line both staves are
    interleaved by x and grouped with an anchored window of
    simultaneity_tol local staff spacings.
    """
    events: list[QueryNoteEvent] = []
    for line_index in sorted({n.line_index for n in labeled}):
        members = sorted(
            (n for n in labeled if n.line_index == line_index),
            key=lambda n: (n.detection.center[0], n.detection.center[1], n.row))
        i = 0
        while i < len(members):
            anchor = members[i]
            limit = anchor.detection.center[0] + \
                cfg.simultaneity_tol * anchor.local_spacing
            j = i
            while j < len(members) and members[j].detection.center[0] < limit:
                j += 1
            group = members[i:j]
            events.append(QueryNoteEvent(
                rows=frozenset(n.row for n in group),
                count=len(group),
                line_index=line_index,
                x=anchor.detection.center[0],
            ))
            i = j
    return events


def query_bootleg(events: list[QueryNoteEvent]) -> BootlegScore:
    """Project query note events with the same [col, col, filler] convention."""
    if not events:
        raise PipelineError("no notes detected")
    masks: list[int] = []
    counts: list[int] = []
    index: list[int | None] = []
    for i, event in enumerate(events):
        mask = rows_to_mask(event.rows)
        masks += [mask, mask, 0]
        counts += [event.count, event.count, 0]
        index += [i, i, None]
    return BootlegScore(masks, counts, index).validate()


def process_image(raster: np.ndarray, cfg: Config | None = None
                  ) -> SheetPipelineResult:
    """Run the full photo -> bootleg pipeline with per-stage timings."""
    cfg = cfg or Config()
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    resized, pre = preprocess(raster, cfg)
    timings["preprocess"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    detections, template = detect_noteheads(pre, cfg)
    timings["notehead_detection"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    tensor, staff_isolated = staff_feature_tensor(pre, cfg)
    timings["staff_features"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    lines = detect_barlines(pre, cfg)
    timings["barline_detection"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    estimates = [estimate_local_staff(tensor, det, cfg) for det in detections]
    labeled = [label_notehead(det, est, lines)
               for det, est in zip(detections, estimates)]
    kept = [n for n in labeled if n is not None]
    events = group_simultaneous(kept, cfg)
    score = query_bootleg(events)
    timings["bootleg_projection"] = time.perf_counter() - t0

    return SheetPipelineResult(
        resized=resized,
        preprocessed=pre,
        staff_isolated=staff_isolated,
        score=score,
        detections=detections,
        template=template,
        estimates=estimates,
        labeled=labeled,
        lines=lines,
        events=events,
        num_discarded=len(labeled) - len(kept),
        timings=timings,
    )
