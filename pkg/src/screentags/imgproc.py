"""Screenshot pre-processing: grayscale, bilateral smoothing, Canny edges and
edge-guided local-mean binarization.

Images are numpy-backed.  Text is assumed dark on a light background; the
binarizer maps ink to 0 and everything else to 255.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np
from scipy import ndimage

from .errors import InvalidInputError

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class RasterImage:
    """8-bit image, shape (h, w) for one channel or (h, w, c) for c in {3, 4}."""

    data: np.ndarray
    source: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.dtype != np.uint8:
            raise InvalidInputError(f"expected 8-bit samples, got {data.dtype}")
        if data.ndim == 3 and data.shape[2] == 1:
            data = data[:, :, 0]
        if data.ndim not in (2, 3) or (data.ndim == 3 and data.shape[2] not in (3, 4)):
            raise InvalidInputError(f"unsupported image shape {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise InvalidInputError("image has a zero dimension")
        object.__setattr__(self, "data", data)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def channels(self):
        return 1 if self.data.ndim == 2 else self.data.shape[2]


@dataclass(frozen=True)
class BinaryImage:
    data: np.ndarray
    source: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.uint8)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise InvalidInputError(f"binary image must be 2-D and non-empty, got {data.shape}")
        if not np.isin(data, (0, 255)).all():
            raise InvalidInputError("binary image samples must be 0 or 255")
        object.__setattr__(self, "data", data)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]


@dataclass(frozen=True)
class PreprocessParams:
    bilateral_diameter: int = 9
    sigma_color: float = 75.0
    sigma_space: float = 75.0
    canny_low: float = 50.0
    canny_high: float = 150.0
    canny_sigma: float = 1.4
    neighborhood_radius: int = 7
    threshold_bias: float = 0.10
    tile_count: int = 4
    min_component_area: int = 4
    region_margin: int = 2

    def __post_init__(self):
        if not self.canny_low < self.canny_high:
            raise InvalidInputError("canny_low must be below canny_high")
        if self.tile_count < 1:
            raise InvalidInputError("tile_count must be >= 1")
        if self.neighborhood_radius < 1:
            raise InvalidInputError("neighborhood_radius must be >= 1")
        if self.bilateral_diameter < 1:
            raise InvalidInputError("bilateral_diameter must be >= 1")


class Component(NamedTuple):
    label: int
    x: int
    y: int
    width: int
    height: int
    pixel_count: int


def _require_gray(img):
    if not isinstance(img, RasterImage) or img.channels != 1:
        raise InvalidInputError("expected a single-channel RasterImage")


def load_image(path):
    """Read PNG/PPM/PGM (anything Pillow decodes) into a RasterImage."""
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as im:
            if im.mode not in ("L", "RGB", "RGBA"):
                im = im.convert("RGBA" if "A" in im.mode or "transparency" in im.info else "RGB")
            data = np.array(im, dtype=np.uint8)
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        raise InvalidInputError(f"cannot read image {path}: {exc}") from exc
    return RasterImage(data, source=str(path))


def save_pgm(img, path):
    """Write a single-channel image as binary PGM (P5)."""
    data = img.data
    if data.ndim != 2:
        raise InvalidInputError("PGM output needs a single-channel image")
    h, w = data.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(data, dtype=np.uint8).tobytes())


def to_grayscale(img):
    if img.channels == 1:
        return img
    rgb = img.data[:, :, :3].astype(np.float64)  # alpha dropped
    luma = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
    return RasterImage(np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8), source=img.source)


def bilateral_filter(gray, p=PreprocessParams()):
    """Edge-preserving smoothing over a circular window of diameter ``p.bilateral_diameter``."""
    _require_gray(gray)
    r = p.bilateral_diameter // 2
    src = gray.data.astype(np.float64)
    if r == 0:
        return gray
    h, w = src.shape
    padded = np.pad(src, r, mode="reflect") if min(h, w) > r else np.pad(src, r, mode="symmetric")
    num = np.zeros_like(src)
    den = np.zeros_like(src)
    color_k = -0.5 / (p.sigma_color ** 2)
    space_k = -0.5 / (p.sigma_space ** 2)
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            d2 = dy * dy + dx * dx
            if d2 > r * r:
                continue
            shifted = padded[r + dy : r + dy + h, r + dx : r + dx + w]
            wgt = np.exp(space_k * d2 + color_k * (shifted - src) ** 2)
            num += wgt * shifted
            den += wgt
    out = np.clip(np.floor(num / den + 0.5), 0, 255).astype(np.uint8)
    return RasterImage(out, source=gray.source)


def _gradients(gray, sigma):
    smooth = ndimage.gaussian_filter(gray.data.astype(np.float64), sigma, mode="reflect")
    gx = ndimage.sobel(smooth, axis=1, mode="reflect")
    gy = ndimage.sobel(smooth, axis=0, mode="reflect")
    return gx, gy, np.hypot(gx, gy)


def _shift(a, dy, dx):
    """out[y, x] = a[y + dy, x + dx], zero outside."""
    out = np.zeros_like(a)
    h, w = a.shape
    ys, yd = (slice(dy, h), slice(0, h - dy)) if dy >= 0 else (slice(0, h + dy), slice(-dy, h))
    xs, xd = (slice(dx, w), slice(0, w - dx)) if dx >= 0 else (slice(0, w + dx), slice(-dx, w))
    out[yd, xd] = a[ys, xs]
    return out


def _non_max_suppression(gx, gy, mag):
    angle = np.rad2deg(np.arctan2(gy, gx)) % 180.0
    sector = np.zeros(mag.shape, dtype=np.int8)  # 0: horizontal gradient
    sector[(angle >= 22.5) & (angle < 67.5)] = 1
    sector[(angle >= 67.5) & (angle < 112.5)] = 2
    sector[(angle >= 112.5) & (angle < 157.5)] = 3
    # (before, after) neighbour offsets along the gradient for each sector
    offsets = {0: ((0, -1), (0, 1)), 1: ((-1, -1), (1, 1)), 2: ((-1, 0), (1, 0)), 3: ((-1, 1), (1, -1))}
    keep = np.zeros(mag.shape, dtype=bool)
    for s, (before, after) in offsets.items():
        # strict on one side, inclusive on the other: plateaus of two keep exactly one pixel
        ok = (mag > _shift(mag, *before)) & (mag >= _shift(mag, *after))
        keep |= (sector == s) & ok
    return np.where(keep, mag, 0.0)


def canny_edges(gray, low=50.0, high=150.0, sigma=1.4):
    _require_gray(gray)
    if not low < high:
        raise InvalidInputError(f"canny thresholds need low < high (got {low}, {high})")
    gx, gy, mag = _gradients(gray, sigma)
    thin = _non_max_suppression(gx, gy, mag)
    candidates = thin >= low
    labels, n = ndimage.label(candidates, structure=_EIGHT)
    if n == 0:
        return BinaryImage(np.zeros(mag.shape, dtype=np.uint8), source=gray.source)
    strong = np.zeros(n + 1, dtype=bool)
    strong[np.unique(labels[thin >= high])] = True
    strong[0] = False
    return BinaryImage(np.where(strong[labels], 255, 0).astype(np.uint8), source=gray.source)


def label_foreground(mask):
    """8-connected labeling of a boolean mask; returns (labels, components)."""
    labels, n = ndimage.label(mask, structure=_EIGHT)
    if n == 0:
        return labels, []
    counts = np.bincount(labels.ravel(), minlength=n + 1)
    comps = []
    for i, sl in enumerate(ndimage.find_objects(labels), start=1):
        ys, xs = sl
        comps.append(Component(i, xs.start, ys.start, xs.stop - xs.start, ys.stop - ys.start, int(counts[i])))
    return labels, comps


def connected_components(bin_img):
    """Components of the 255-valued pixels, labels dense from 1 in raster order."""
    return label_foreground(bin_img.data == 255)[1]


def contour_mask(mask):
    """Boundary pixels of a mask: set pixels with at least one 4-neighbour unset."""
    return mask & ~ndimage.binary_erosion(mask, border_value=0)


def candidate_regions(gray, p=PreprocessParams()):
    """Mask of pixels worth classifying: dilated boxes around edge-contour components."""
    edges = canny_edges(gray, p.canny_low, p.canny_high, p.canny_sigma)
    _, comps = label_foreground(contour_mask(edges.data == 255))
    mask = np.zeros(edges.data.shape, dtype=bool)
    m = p.region_margin
    for c in comps:
        if c.pixel_count < p.min_component_area:
            continue
        mask[max(0, c.y - m) : c.y + c.height + m, max(0, c.x - m) : c.x + c.width + m] = True
    return mask


def _classify_band(gray, mask, start, stop, radius, bias):
    h, w = gray.shape
    lo, hi = max(0, start - radius), min(h, stop + radius)
    slab = gray[lo:hi].astype(np.int64)
    integral = np.zeros((slab.shape[0] + 1, w + 1), dtype=np.int64)
    integral[1:, 1:] = slab.cumsum(0).cumsum(1)

    rows = np.arange(start, stop)
    y0 = np.maximum(rows - radius, 0) - lo
    y1 = np.minimum(rows + radius + 1, h) - lo
    cols = np.arange(w)
    x0 = np.maximum(cols - radius, 0)
    x1 = np.minimum(cols + radius + 1, w)
    sums = (
        integral[y1][:, x1] - integral[y0][:, x1] - integral[y1][:, x0] + integral[y0][:, x0]
    )
    counts = np.outer(y1 - y0, x1 - x0)
    mean = sums / counts
    band = gray[start:stop]
    black = (band < mean * (1.0 - bias)) & mask[start:stop]
    return np.where(black, 0, 255).astype(np.uint8)


def binarize(gray, p=PreprocessParams()):
    """Edge-guided local-mean thresholding; identical output for any tile_count."""
    _require_gray(gray)
    mask = candidate_regions(gray, p)
    data = gray.data
    h = data.shape[0]
    bounds = np.linspace(0, h, min(p.tile_count, h) + 1).round().astype(int)
    bands = [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    radius, bias = p.neighborhood_radius, p.threshold_bias
    if len(bands) == 1:
        parts = [_classify_band(data, mask, 0, h, radius, bias)]
    else:
        with ThreadPoolExecutor(max_workers=len(bands)) as pool:
            parts = list(pool.map(lambda ab: _classify_band(data, mask, ab[0], ab[1], radius, bias), bands))
    return BinaryImage(np.vstack(parts), source=gray.source)


class Preprocessed(NamedTuple):
    gray: RasterImage
    filtered: RasterImage
    binary: BinaryImage


def preprocess(img, p=PreprocessParams()):
    """Full chain: drop alpha + grayscale, bilateral filter, binarize.  No deskew."""
    gray = to_grayscale(img)
    filtered = bilateral_filter(gray, p)
    return Preprocessed(gray, filtered, binarize(filtered, p))
