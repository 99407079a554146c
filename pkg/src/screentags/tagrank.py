"""Tag scoring and ranking.

A tag's score adds one term per candidate that produced it:

* scene candidate:    prob
* OCR candidate:      0.8 * prob
* related candidate:  parent.prob * exp(-prob)

where a related candidate's parent is the scene/OCR tag it was expanded from.
"""

import enum
import math
from dataclasses import dataclass
from typing import Optional, Tuple

from .errors import InvalidInputError

OCR_WEIGHT = 0.8


class TagSource(str, enum.Enum):
    SCENE = "scene"
    OCR = "ocr"
    RELATED = "related"


_SOURCE_ORDER = {TagSource.SCENE: 0, TagSource.OCR: 1, TagSource.RELATED: 2}


def normalize_tag(name):
    return " ".join(name.split()).lower()


@dataclass(frozen=True)
class TagCandidate:
    name: str
    source: TagSource
    prob: float
    parent: Optional["TagCandidate"] = None

    def __post_init__(self):
        object.__setattr__(self, "name", normalize_tag(self.name))
        object.__setattr__(self, "source", TagSource(self.source))
        if not self.name:
            raise InvalidInputError("tag name is empty")
        if not 0.0 <= self.prob <= 1.0:
            raise InvalidInputError(f"tag probability {self.prob} outside [0, 1]")
        if self.source is TagSource.RELATED:
            if self.parent is None:
                raise InvalidInputError(f"related tag {self.name!r} has no parent")
            if self.parent.source is TagSource.RELATED:
                raise InvalidInputError("a related tag's parent must be a scene or OCR tag")


@dataclass(frozen=True)
class RankedTag:
    name: str
    score: float
    contributions: Tuple[Tuple[str, float], ...]


def contribution(c):
    if c.source is TagSource.SCENE:
        return c.prob
    if c.source is TagSource.OCR:
        return OCR_WEIGHT * c.prob
    return c.parent.prob * math.exp(-c.prob)


def tag_score(candidates):
    if not candidates:
        raise InvalidInputError("no candidates to score")
    names = {c.name for c in candidates}
    if len(names) != 1:
        raise InvalidInputError(f"candidates carry different names: {sorted(names)}")
    terms = sorted(((c.source, contribution(c)) for c in candidates), key=lambda sv: (_SOURCE_ORDER[sv[0]], sv[1]))
    contributions = tuple((s.value, v) for s, v in terms)
    return RankedTag(names.pop(), math.fsum(v for _, v in contributions), contributions)


def rank_tags(candidates):
    """Group by normalized name, score each group, sort by score then name."""
    groups = {}
    for c in candidates:
        groups.setdefault(c.name, []).append(c)
    ranked = [tag_score(group) for group in groups.values()]
    return sorted(ranked, key=lambda t: (-t.score, t.name))
