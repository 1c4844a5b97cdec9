"""Classical vision primitives on plain numpy arrays.

Conventions used by every function in this module:

* A grayscale image is a 2-D float64 array with values in [0, 1].  Raw page
  images use 0 = black ink, 1 = white paper; after ``background_subtract``
  the polarity flips to ink = high, and all morphology below is written for
  that ink-is-foreground polarity (erode = neighborhood min, dilate =
  neighborhood max).
* A binary image is a 2-D bool array, True = foreground.
* Indices are (row, col).  Borders are handled by edge replication.
* Everything is deterministic: no RNG, no threading, no hidden state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

GRAY_LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class StructuringElement:
    """Flat structuring element given by its (row, col) neighborhood offsets."""

    name: str
    offsets: tuple[tuple[int, int], ...]

    @classmethod
    def disc(cls, radius: int) -> "StructuringElement":
        if radius < 1:
            raise ValueError("disc radius must be >= 1")
        offs = [(dr, dc)
                for dr in range(-radius, radius + 1)
                for dc in range(-radius, radius + 1)
                if dr * dr + dc * dc <= radius * radius]
        return cls(f"disc(r={radius})", tuple(offs))

    @classmethod
    def horizontal(cls, width: int) -> "StructuringElement":
        if width < 1:
            raise ValueError("width must be >= 1")
        offs = [(0, dc) for dc in range(-((width - 1) // 2), width // 2 + 1)]
        return cls(f"horizontal(1x{width})", tuple(offs))

    @classmethod
    def vertical(cls, height: int) -> "StructuringElement":
        if height < 1:
            raise ValueError("height must be >= 1")
        offs = [(dr, 0) for dr in range(-((height - 1) // 2), height // 2 + 1)]
        return cls(f"vertical({height}x1)", tuple(offs))


@dataclass(frozen=True)
class Region:
    """One connected component of a binary image."""

    pixel_count: int
    bbox: tuple[int, int, int, int]  # (row_min, col_min, row_max, col_max) inclusive
    centroid: tuple[float, float]    # (row, col)

    @property
    def height(self) -> int:
        return self.bbox[2] - self.bbox[0] + 1

    @property
    def width(self) -> int:
        return self.bbox[3] - self.bbox[1] + 1


@dataclass(frozen=True)
class BlobKeypoint:
    center: tuple[float, float]  # (row, col)
    diameter: float


def to_grayscale(rgb: np.ndarray) -> np.ndarray:
    """Rec.601 luma of a (H, W, 3) raster; accepts [0, 255] or [0, 1] input."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) raster, got shape {rgb.shape}")
    if rgb.shape[0] == 0 or rgb.shape[1] == 0:
        raise ValueError("empty image")
    if rgb.max(initial=0.0) > 1.0:
        rgb = rgb / 255.0
    wr, wg, wb = GRAY_LUMA_WEIGHTS
    return np.clip(wr * rgb[:, :, 0] + wg * rgb[:, :, 1] + wb * rgb[:, :, 2],
                   0.0, 1.0)


def resize_max_dim(img: np.ndarray, max_dim: int = 1000) -> np.ndarray:
    """Bilinear downscale so that max(h, w) == max_dim; never upscales."""
    if max_dim < 1:
        raise ValueError("max_dim must be >= 1")
    h, w = img.shape
    if max(h, w) <= max_dim:
        return img
    scale = max_dim / max(h, w)
    if h >= w:
        new_h, new_w = max_dim, max(1, round(w * scale))
    else:
        new_h, new_w = max(1, round(h * scale)), max_dim
    return _bilinear_resize(img, new_h, new_w)


def _bilinear_resize(img: np.ndarray, new_h: int, new_w: int) -> np.ndarray:
    h, w = img.shape
    # pixel-center sampling: dst center (i + .5) maps to src (i + .5) * scale
    src_r = np.clip((np.arange(new_h) + 0.5) * (h / new_h) - 0.5, 0, h - 1)
    src_c = np.clip((np.arange(new_w) + 0.5) * (w / new_w) - 0.5, 0, w - 1)
    r0 = np.floor(src_r).astype(np.intp)
    c0 = np.floor(src_c).astype(np.intp)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = (src_r - r0)[:, None]
    fc = (src_c - c0)[None, :]
    top = img[np.ix_(r0, c0)] * (1 - fc) + img[np.ix_(r0, c1)] * fc
    bot = img[np.ix_(r1, c0)] * (1 - fc) + img[np.ix_(r1, c1)] * fc
    return top * (1 - fr) + bot * fr


def box_blur(img: np.ndarray, half_width: int) -> np.ndarray:
    """Separable box filter of side 2*half_width + 1, edge-replicated."""
    if half_width < 1:
        raise ValueError("half_width must be >= 1")
    out = _box_blur_axis(img, half_width, axis=0)
    return _box_blur_axis(out, half_width, axis=1)


def _box_blur_axis(img: np.ndarray, hw: int, axis: int) -> np.ndarray:
    n = img.shape[axis]
    pad = [(0, 0), (0, 0)]
    pad[axis] = (hw, hw)
    padded = np.pad(img, pad, mode="edge")
    csum = np.cumsum(padded, axis=axis, dtype=np.float64)
    zeros_shape = list(csum.shape)
    zeros_shape[axis] = 1
    csum = np.concatenate([np.zeros(zeros_shape), csum], axis=axis)
    win = 2 * hw + 1
    hi = _take_range(csum, win, win + n, axis)
    lo = _take_range(csum, 0, n, axis)
    return (hi - lo) / win


def _take_range(arr: np.ndarray, start: int, stop: int, axis: int) -> np.ndarray:
    sl = [slice(None), slice(None)]
    sl[axis] = slice(start, stop)
    return arr[tuple(sl)]


def background_subtract(img: np.ndarray, blur_half_width: int) -> np.ndarray:
    """Remove smooth background lighting; output polarity is ink = high.

    blur(img) - img is large where the page is locally much darker than its
    surroundings (ink) and ~0 on paper, whatever the illumination gradient.
    The result is renormalized to [0, 1] by its max (all-zero stays all-zero).
    """
    diff = np.clip(box_blur(img, blur_half_width) - img, 0.0, 1.0)
    peak = diff.max(initial=0.0)
    if peak <= 1e-9:  # cumsum residue on flat images, not signal
        return np.zeros_like(img)
    return diff / peak


def _morph(img: np.ndarray, se: StructuringElement, dilate_mode: bool) -> np.ndarray:
    h, w = img.shape
    rpad = max(abs(dr) for dr, _ in se.offsets)
    cpad = max(abs(dc) for _, dc in se.offsets)
    padded = np.pad(img, ((rpad, rpad), (cpad, cpad)), mode="edge")
    out = None
    for dr, dc in se.offsets:
        if dilate_mode:
            dr, dc = -dr, -dc  # dilation uses the reflected element
        view = padded[rpad + dr:rpad + dr + h, cpad + dc:cpad + dc + w]
        if out is None:
            out = view.copy()
        elif dilate_mode:
            np.maximum(out, view, out=out)
        else:
            np.minimum(out, view, out=out)
    return out


def erode(img: np.ndarray, se: StructuringElement) -> np.ndarray:
    """Neighborhood minimum (shrinks ink-is-high foreground)."""
    return _morph(img, se, dilate_mode=False)


def dilate(img: np.ndarray, se: StructuringElement) -> np.ndarray:
    """Neighborhood maximum (grows ink-is-high foreground)."""
    return _morph(img, se, dilate_mode=True)


def opening(img: np.ndarray, se: StructuringElement) -> np.ndarray:
    """Erosion followed by dilation; removes structures thinner than ``se``."""
    return dilate(erode(img, se), se)


def otsu_threshold(histogram) -> int:
    """Threshold index t maximizing inter-class variance of a histogram.

    Classes are bins < t and bins >= t.  Comparisons are done in exact
    integer arithmetic, so ties are broken by the smallest t with no
    floating-point ambiguity.  Raises on histograms with < 2 nonempty bins.
    """
    counts = [int(c) for c in histogram]
    if any(c < 0 for c in counts):
        raise ValueError("histogram counts must be non-negative")
    if sum(1 for c in counts if c > 0) < 2:
        raise ValueError("degenerate histogram: need >= 2 nonempty bins")
    total_w = sum(counts)
    total_s = sum(i * c for i, c in enumerate(counts))
    # inter-class variance at t is (S0*w1 - S1*w0)^2 / (w0*w1*W^2); compare
    # cross-multiplied numerators to stay in integers
    best_t = -1
    best_num = -1
    best_den = 1
    w0 = 0
    s0 = 0
    for t in range(1, len(counts)):
        w0 += counts[t - 1]
        s0 += (t - 1) * counts[t - 1]
        w1 = total_w - w0
        if w0 == 0 or w1 == 0:
            continue
        s1 = total_s - s0
        num = (s0 * w1 - s1 * w0) ** 2
        den = w0 * w1
        if num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    return best_t


def otsu_binarize(img: np.ndarray, nbins: int = 256) -> tuple[np.ndarray, float]:
    """Otsu-binarize a [0, 1] image; returns (foreground mask, threshold).

    Foreground is where the value is >= the threshold (ink-is-high polarity).
    A constant image raises via ``otsu_threshold``.
    """
    bins = np.minimum((img * nbins).astype(np.int64), nbins - 1)
    hist = np.bincount(bins.ravel(), minlength=nbins)
    t = otsu_threshold(hist)
    thresh = t / nbins
    return bins >= t, thresh


def otsu_split_values(values) -> float:
    """Otsu threshold over a 1-D collection of non-negative integer values.

    Returns a value v such that {x < v} and {x >= v} are the two classes.
    """
    vals = [int(v) for v in values]
    lo, hi = min(vals), max(vals)
    if lo == hi:
        raise ValueError("degenerate histogram: all values equal")
    hist = [0] * (hi - lo + 1)
    for v in vals:
        hist[v - lo] += 1
    return float(lo + otsu_threshold(hist))


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        p = self.parent
        root = a
        while p[root] != root:
            root = p[root]
        while p[a] != root:
            p[a], a = root, p[a]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def connected_components(img: np.ndarray, connectivity: int = 8
                         ) -> tuple[list[Region], np.ndarray]:
    """Label connected foreground regions of a bool image.

    Returns (regions ordered by (row_min, col_min), label map) where the
    label map holds 1-based region ids matching the returned list (0 =
    background).  Row runs are merged with union-find, so cost scales with
    the number of runs rather than pixels.
    """
    if connectivity not in (4, 8):
        raise ValueError("connectivity must be 4 or 8")
    img = np.asarray(img, dtype=bool)
    h, w = img.shape
    labels = np.zeros((h, w), dtype=np.int32)

    # (row, col_start, col_end) inclusive runs, row by row
    runs: list[tuple[int, int, int]] = []
    row_first_run: list[int] = []
    for r in range(h):
        row_first_run.append(len(runs))
        line = img[r]
        if not line.any():
            continue
        padded = np.empty(w + 2, dtype=bool)
        padded[0] = padded[-1] = False
        padded[1:-1] = line
        edges = np.flatnonzero(padded[1:] != padded[:-1])
        for i in range(0, len(edges), 2):
            runs.append((r, int(edges[i]), int(edges[i + 1]) - 1))
    row_first_run.append(len(runs))

    uf = _UnionFind(len(runs))
    reach = 0 if connectivity == 4 else 1
    for r in range(1, h):
        lo, hi = row_first_run[r], row_first_run[r + 1]
        plo, phi = row_first_run[r - 1], row_first_run[r]
        p = plo
        for i in range(lo, hi):
            _, cs, ce = runs[i]
            while p < phi and runs[p][2] < cs - reach:
                p += 1
            q = p
            while q < phi and runs[q][1] <= ce + reach:
                uf.union(i, q)
                q += 1
            if q > p:
                q -= 1  # last overlapping run may also touch the next run
            p = q

    # aggregate per root in first-appearance order
    order: dict[int, int] = {}
    stats: list[list] = []  # [count, row_min, col_min, row_max, col_max, sum_r, sum_c]
    for i, (r, cs, ce) in enumerate(runs):
        root = uf.find(i)
        idx = order.get(root)
        n = ce - cs + 1
        if idx is None:
            order[root] = len(stats)
            stats.append([n, r, cs, r, ce, r * n, (cs + ce) * n / 2.0])
        else:
            st = stats[idx]
            st[0] += n
            st[1] = min(st[1], r)
            st[2] = min(st[2], cs)
            st[3] = max(st[3], r)
            st[4] = max(st[4], ce)
            st[5] += r * n
            st[6] += (cs + ce) * n / 2.0
        labels[r, cs:ce + 1] = order[root] + 1

    ranked = sorted(range(len(stats)),
                    key=lambda i: (stats[i][1], stats[i][2]))
    remap = np.zeros(len(stats) + 1, dtype=np.int32)
    regions: list[Region] = []
    for new_id, old in enumerate(ranked):
        st = stats[old]
        remap[old + 1] = new_id + 1
        regions.append(Region(
            pixel_count=st[0],
            bbox=(st[1], st[2], st[3], st[4]),
            centroid=(st[5] / st[0], st[6] / st[0]),
        ))
    return regions, remap[labels]


def convolve2d(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Centered 2-D convolution (kernel flipped), same size, edge-replicated.

    Kernel dims must be odd and no larger than the image.  Zero kernel
    entries are skipped, so sparse kernels (comb filters) cost only their
    nonzero taps.
    """
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.ndim != 2:
        raise ValueError("kernel must be 2-D")
    kh, kw = kernel.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError("kernel dims must be odd")
    h, w = img.shape
    if kh > h or kw > w:
        raise ValueError("kernel larger than image")
    ih, jh = kh // 2, kw // 2
    padded = np.pad(img, ((ih, ih), (jh, jh)), mode="edge")
    out = np.zeros((h, w), dtype=np.float64)
    for i, j in zip(*np.nonzero(kernel)):
        out += kernel[i, j] * padded[2 * ih - i:2 * ih - i + h,
                                     2 * jh - j:2 * jh - j + w]
    return out


def simple_blob_detect(img: np.ndarray, min_area: float, max_area: float,
                       num_thresholds: int = 10,
                       min_dist: float = 10.0) -> list[BlobKeypoint]:
    """Multi-threshold blob detection for bright (ink-is-high) blobs.

    Binarizes at ``num_thresholds`` evenly spaced levels strictly inside the
    image's intensity range, keeps components with area in [min_area,
    max_area], then clusters detections across thresholds whose centers lie
    within ``min_dist`` of each other.  A blob must be seen at >= 2 distinct
    thresholds.  Returns merged centers and mean equivalent diameters,
    sorted by (row, col).
    """
    if min_area >= max_area:
        raise ValueError("min_area must be < max_area")
    if num_thresholds < 1:
        raise ValueError("num_thresholds must be >= 1")
    if img.size == 0:
        return []
    lo = float(img.min())
    hi = float(img.max())
    if hi <= lo:
        return []
    found: list[tuple[int, float, float, float]] = []  # (t_idx, row, col, diam)
    for k in range(num_thresholds):
        t = lo + (hi - lo) * (k + 1) / (num_thresholds + 1)
        regions, _ = connected_components(img >= t)
        for reg in regions:
            if min_area <= reg.pixel_count <= max_area:
                diam = math.sqrt(4.0 * reg.pixel_count / math.pi)
                found.append((k, reg.centroid[0], reg.centroid[1], diam))
    if not found:
        return []

    centers = np.array([(r, c) for _, r, c, _ in found])
    d2 = ((centers[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    uf = _UnionFind(len(found))
    for a, b in zip(*np.nonzero(d2 < min_dist * min_dist)):
        if a < b:
            uf.union(int(a), int(b))

    groups: dict[int, list[int]] = {}
    for i in range(len(found)):
        groups.setdefault(uf.find(i), []).append(i)

    keypoints = []
    for members in groups.values():
        if len({found[i][0] for i in members}) < 2:
            continue
        rows = [found[i][1] for i in members]
        cols = [found[i][2] for i in members]
        diams = [found[i][3] for i in members]
        keypoints.append(BlobKeypoint(
            center=(sum(rows) / len(rows), sum(cols) / len(cols)),
            diameter=sum(diams) / len(diams),
        ))
    keypoints.sort(key=lambda kp: kp.center)
    return keypoints


def kmeans_2d(points, k: int) -> list[tuple[float, float]]:
    """Deterministic Lloyd k-means over (x, y) points.

    Centers are seeded from quantile slices along the principal axis (no
    randomness), iterated to an assignment fixpoint (<= 100 rounds), and
    returned sorted by (y, x).
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be a list of (x, y) pairs")
    n = len(pts)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise ValueError(f"k={k} exceeds number of points ({n})")

    axis = _principal_axis(pts)
    proj = pts @ axis
    order = np.lexsort((pts[:, 1], pts[:, 0], proj))
    slices = np.array_split(order, k)
    centers = np.array([pts[s].mean(axis=0) for s in slices])

    assign = np.full(n, -1)
    for _ in range(100):
        d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = np.argmin(d2, axis=1)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(k):
            members = pts[assign == j]
            if len(members):
                centers[j] = members.mean(axis=0)
    return sorted(((float(x), float(y)) for x, y in centers),
                  key=lambda c: (c[1], c[0]))


def _principal_axis(pts: np.ndarray) -> np.ndarray:
    centered = pts - pts.mean(axis=0)
    cov = centered.T @ centered
    if not cov.any():
        return np.array([1.0, 0.0])
    theta = 0.5 * math.atan2(2.0 * cov[0, 1], cov[0, 0] - cov[1, 1])
    axis = np.array([math.cos(theta), math.sin(theta)])
    if axis[0] < 0 or (axis[0] == 0 and axis[1] < 0):
        axis = -axis
    return axis
