"""Image decode/encode and debug overlay rendering (application boundary).

The pipeline itself only sees raw float arrays; this module owns all PIL
usage.  Overlays are drawn on the resized (<= max_dim) grayscale page so
their coordinates match pipeline space.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .sheet import SheetPipelineResult

OVERLAY_LAYERS = ("noteheads", "chords", "beams", "barlines", "lines", "staves")


def load_image(path) -> np.ndarray:
    """Decode PNG/JPEG into an RGB (H, W, 3) float array in [0, 1]."""
    with Image.open(path) as im:
        rgb = im.convert("RGB")
        return np.asarray(rgb, dtype=np.float64) / 255.0


def save_gray(path, img: np.ndarray) -> None:
    """Write a [0, 1] grayscale array as an 8-bit PNG."""
    data = np.clip(np.asarray(img) * 255.0, 0, 255).astype(np.uint8)
    Image.fromarray(data, mode="L").save(path)


def _base_canvas(result: SheetPipelineResult) -> Image.Image:
    gray = np.clip(result.resized * 255.0, 0, 255).astype(np.uint8)
    return Image.fromarray(gray, mode="L").convert("RGB")


def render_overlay(result: SheetPipelineResult, layer: str) -> Image.Image:
    """One annotated copy of the page for the requested layer."""
    if layer == "beams":
        # intermediate image, shown in page polarity (ink dark)
        inverted = 1.0 - result.staff_isolated
        data = np.clip(inverted * 255.0, 0, 255).astype(np.uint8)
        return Image.fromarray(data, mode="L").convert("RGB")

    canvas = _base_canvas(result)
    draw = ImageDraw.Draw(canvas)
    if layer == "noteheads":
        for det in result.detections:
            r0, c0, r1, c1 = det.bbox
            draw.rectangle([c0, r0, c1, r1], outline=(0, 170, 0), width=2)
    elif layer == "chords":
        for det in result.detections:
            if det.from_chord_split:
                x, y = det.center
                draw.line([x - 4, y, x + 4, y], fill=(255, 0, 255), width=2)
                draw.line([x, y - 4, x, y + 4], fill=(255, 0, 255), width=2)
    elif layer == "barlines":
        for line in result.lines:
            for r0, c0, r1, c1 in line.barlines:
                draw.rectangle([c0, r0, c1, r1], outline=(220, 120, 0), width=2)
    elif layer == "lines":
        for i, line in enumerate(result.lines):
            color = (0, 120, 255) if i % 2 == 0 else (0, 200, 200)
            draw.rectangle([0, line.y_top, canvas.width - 1, line.y_bottom],
                           outline=color, width=2)
    elif layer == "staves":
        # yellow = notehead, red = predicted top staff line, blue = bottom
        for det, est in zip(result.detections, result.estimates):
            x = det.center[0]
            _dot(draw, x, det.center[1], (230, 200, 0))
            _dot(draw, x, est.top_line_y, (255, 0, 0))
            _dot(draw, x, est.bottom_line_y, (0, 0, 255))
    else:
        raise ValueError(f"unknown overlay layer {layer!r}; "
                         f"expected one of {', '.join(OVERLAY_LAYERS)}")
    return canvas


def _dot(draw: ImageDraw.ImageDraw, x: float, y: float, color) -> None:
    draw.ellipse([x - 2.5, y - 2.5, x + 2.5, y + 2.5], fill=color)


def write_overlays(result: SheetPipelineResult, out_dir, stem: str,
                   layers=OVERLAY_LAYERS) -> list[Path]:
    """One PNG per requested layer; returns the written paths."""
    if not layers:
        raise ValueError("at least one overlay layer required")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for layer in layers:
        path = out_dir / f"{stem}_{layer}.png"
        render_overlay(result, layer).save(path)
        written.append(path)
    return written
