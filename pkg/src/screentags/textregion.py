"""Text-line localization on binary images and Unicode-range script routing."""

import enum
import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Protocol

import numpy as np

from .errors import ConfigError
from .imgproc import label_foreground


@dataclass(frozen=True)
class TextBox:
    x: int
    y: int
    width: int
    height: int
    component_count: int = 1

    @property
    def right(self):
        return self.x + self.width

    @property
    def bottom(self):
        return self.y + self.height

    @property
    def area(self):
        return self.width * self.height

    def within(self, width, height):
        return (
            self.x >= 0 and self.y >= 0 and self.width >= 1 and self.height >= 1
            and self.right <= width and self.bottom <= height
        )

    def contains(self, other):
        return (
            self.x <= other.x and self.y <= other.y
            and other.right <= self.right and other.bottom <= self.bottom
        )

    def intersection_area(self, other):
        w = min(self.right, other.right) - max(self.x, other.x)
        h = min(self.bottom, other.bottom) - max(self.y, other.y)
        return max(w, 0) * max(h, 0)

    def union(self, other):
        x, y = min(self.x, other.x), min(self.y, other.y)
        return TextBox(
            x, y,
            max(self.right, other.right) - x,
            max(self.bottom, other.bottom) - y,
            self.component_count + other.component_count,
        )


class ScriptLabel(enum.Enum):
    LATIN = "Latin"
    HANGUL = "Hangul"
    CHINESE = "Chinese"
    ARABIC = "Arabic"
    DEVANAGARI = "Devanagari"
    BENGALI = "Bengali"
    TELUGU = "Telugu"
    TAMIL = "Tamil"
    GUJARATI = "Gujarati"
    KANNADA = "Kannada"
    MALAYALAM = "Malayalam"
    UNKNOWN = "Unknown"


_RANGES = [
    (0x0041, 0x024F, ScriptLabel.LATIN),
    (0x1E00, 0x1EFF, ScriptLabel.LATIN),
    (0x0600, 0x06FF, ScriptLabel.ARABIC),
    (0x0750, 0x077F, ScriptLabel.ARABIC),
    (0x08A0, 0x08FF, ScriptLabel.ARABIC),
    (0xFB50, 0xFDFF, ScriptLabel.ARABIC),
    (0xFE70, 0xFEFF, ScriptLabel.ARABIC),
    (0x0900, 0x097F, ScriptLabel.DEVANAGARI),
    (0xA8E0, 0xA8FF, ScriptLabel.DEVANAGARI),
    (0x0980, 0x09FF, ScriptLabel.BENGALI),
    (0x0A80, 0x0AFF, ScriptLabel.GUJARATI),
    (0x0B80, 0x0BFF, ScriptLabel.TAMIL),
    (0x0C00, 0x0C7F, ScriptLabel.TELUGU),
    (0x0C80, 0x0CFF, ScriptLabel.KANNADA),
    (0x0D00, 0x0D7F, ScriptLabel.MALAYALAM),
    (0x1100, 0x11FF, ScriptLabel.HANGUL),
    (0x3130, 0x318F, ScriptLabel.HANGUL),
    (0xAC00, 0xD7AF, ScriptLabel.HANGUL),
    (0x3400, 0x4DBF, ScriptLabel.CHINESE),
    (0x4E00, 0x9FFF, ScriptLabel.CHINESE),
    (0xF900, 0xFAFF, ScriptLabel.CHINESE),
]
_ORDER = {s: i for i, s in enumerate(ScriptLabel)}


def char_script(ch):
    """Script of one character, or None for neutral characters."""
    if not unicodedata.category(ch)[0] in "LM":
        return None
    cp = ord(ch)
    for lo, hi, script in _RANGES:
        if lo <= cp <= hi:
            return script
    return None


def identify_script(text):
    """Majority script over script-bearing characters; ties go to the earlier label."""
    counts = Counter(s for s in map(char_script, text) if s is not None)
    if not counts:
        return ScriptLabel.UNKNOWN
    return min(counts, key=lambda s: (-counts[s], _ORDER[s]))


class ScriptClassifier(Protocol):
    """Image-based script identification for a text region (pluggable)."""

    def classify(self, img, box: TextBox) -> ScriptLabel: ...


@dataclass(frozen=True)
class EngineRouting:
    latin: str = "latin-ocr"
    nonlatin: str = "nonlatin-ocr"
    default: Optional[str] = "latin-ocr"


def route_engine(script, cfg):
    if not cfg.default:
        raise ConfigError("engine routing has no default engine")
    if script is ScriptLabel.LATIN:
        return cfg.latin
    if script is ScriptLabel.UNKNOWN:
        return cfg.default
    return cfg.nonlatin


def _clusters(comps, max_gap, height_ratio):
    n = len(comps)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    x = np.array([c.x for c in comps])
    y = np.array([c.y for c in comps])
    r = x + np.array([c.width for c in comps])
    h = np.array([c.height for c in comps])
    b = y + h
    for i in range(n):
        j = np.arange(i + 1, n)
        overlap = np.minimum(b[i], b[j]) - np.maximum(y[i], y[j])
        ratio = np.maximum(h[i], h[j]) / np.minimum(h[i], h[j])
        gap = np.maximum(x[i], x[j]) - np.minimum(r[i], r[j])
        for k in j[(overlap > 0) & (ratio <= height_ratio) & (gap <= max_gap)]:
            ri, rk = find(i), find(int(k))
            if ri != rk:
                parent[max(ri, rk)] = min(ri, rk)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(comps[i])
    return list(groups.values())


def _merge_overlapping(boxes):
    boxes = list(boxes)
    merged = True
    while merged:
        merged = False
        for i in range(len(boxes)):
            for j in range(i + 1, len(boxes)):
                a, b = boxes[i], boxes[j]
                if a.intersection_area(b) * 2 > min(a.area, b.area):
                    boxes[i] = a.union(b)
                    del boxes[j]
                    merged = True
                    break
            if merged:
                break
    return boxes


def locate_text_lines(bin_img, max_gap=None, height_ratio=2.5, min_pixels=2, max_height_fraction=0.8):
    """Group dark connected components into horizontal text-line boxes.

    ``max_gap`` defaults to 1.5x the median component height.  Boxes come back
    sorted top-to-bottom, then left-to-right.
    """
    _, comps = label_foreground(bin_img.data == 0)
    limit = max_height_fraction * bin_img.height
    comps = [c for c in comps if c.pixel_count >= min_pixels and (c.height <= limit or bin_img.height < 4)]
    if not comps:
        return []
    if max_gap is None:
        max_gap = 1.5 * float(np.median([c.height for c in comps]))
    boxes = []
    for group in _clusters(comps, max_gap, height_ratio):
        box = None
        for c in group:
            cb = TextBox(c.x, c.y, c.width, c.height)
            box = cb if box is None else box.union(cb)
        boxes.append(box)
    boxes = _merge_overlapping(boxes)
    return sorted(boxes, key=lambda bx: (bx.y, bx.x, bx.height, bx.width))
