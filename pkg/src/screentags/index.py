"""Inverted tag index with JSON persistence, and tag-coverage evaluation."""

import datetime as dt
import enum
import json
import os
import tempfile
import threading
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, NamedTuple, Tuple

from .errors import FormatError, InvalidInputError
from .tagrank import RankedTag, normalize_tag

INDEX_VERSION = 1
PREFIX_WEIGHT = 0.5


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    path: str
    tags: Tuple[RankedTag, ...]
    ingested_at: str = field(default_factory=lambda: dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"))

    def __post_init__(self):
        object.__setattr__(self, "tags", tuple(sorted(self.tags, key=lambda t: (-t.score, t.name))))

    def to_json(self):
        return {
            "image_id": self.image_id,
            "path": self.path,
            "ingested_at": self.ingested_at,
            "tags": [
                {"name": t.name, "score": t.score, "contributions": [list(c) for c in t.contributions]}
                for t in self.tags
            ],
        }

    @classmethod
    def from_json(cls, obj):
        tags = tuple(
            RankedTag(t["name"], float(t["score"]), tuple((str(s), float(v)) for s, v in t["contributions"]))
            for t in obj["tags"]
        )
        return cls(str(obj["image_id"]), str(obj["path"]), tags, str(obj["ingested_at"]))


class TagIndex:
    """Postings map tag -> {image_id: score}.  One writer at a time; readers
    see either the old or the new postings of an image, never a mix."""

    def __init__(self):
        self.records: Dict[str, ImageRecord] = {}
        self.postings: Dict[str, Dict[str, float]] = {}
        self._lock = threading.RLock()

    def __len__(self):
        return len(self.records)

    def __contains__(self, image_id):
        return image_id in self.records

    def index_image(self, rec):
        if not rec.image_id:
            raise InvalidInputError("image_id must be non-empty")
        with self._lock:
            postings = {tag: dict(ids) for tag, ids in self.postings.items()}
            old = self.records.get(rec.image_id)
            if old is not None:
                for t in old.tags:
                    postings[t.name].pop(rec.image_id, None)
                    if not postings[t.name]:
                        del postings[t.name]
            for t in rec.tags:
                postings.setdefault(t.name, {})[rec.image_id] = t.score
            records = dict(self.records)
            records[rec.image_id] = rec
            self.records, self.postings = records, postings
        return self

    def search(self, query, k=10):
        """Rank images by summed tag score over query terms; a term that only
        prefixes a tag counts at half weight."""
        if k < 1:
            raise InvalidInputError("k must be >= 1")
        postings = self.postings
        scores = Counter()
        for term in dict.fromkeys(query.lower().split()):
            best = {}
            for tag, ids in postings.items():
                if tag == term:
                    weight = 1.0
                elif tag.startswith(term):
                    weight = PREFIX_WEIGHT
                else:
                    continue
                for image_id, s in ids.items():
                    best[image_id] = max(best.get(image_id, 0.0), weight * s)
            for image_id, s in best.items():
                scores[image_id] += s
        ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
        return ranked[:k]

    def to_json(self):
        with self._lock:
            return {
                "version": INDEX_VERSION,
                "records": [self.records[i].to_json() for i in sorted(self.records)],
                "postings": {tag: dict(sorted(ids.items())) for tag, ids in sorted(self.postings.items())},
            }

    def persist(self, path):
        """Atomic write: temp file in the target directory, then rename."""
        path = Path(path)
        payload = json.dumps(self.to_json(), ensure_ascii=False, indent=1)
        fd, tmp = tempfile.mkstemp(prefix=path.name + ".", dir=path.parent or ".")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(payload)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @classmethod
    def from_json(cls, obj):
        if not isinstance(obj, dict) or "version" not in obj:
            raise FormatError("index file has no version field")
        if obj["version"] != INDEX_VERSION:
            raise FormatError(f"index version {obj['version']} not supported (expected {INDEX_VERSION})")
        idx = cls()
        try:
            for rec in obj["records"]:
                idx.index_image(ImageRecord.from_json(rec))
            stored = {tag: {i: float(s) for i, s in ids.items()} for tag, ids in obj["postings"].items()}
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise FormatError(f"malformed index file: {exc!r}") from exc
        if stored != idx.postings:
            raise FormatError("postings do not match records")
        return idx

    @classmethod
    def load(cls, path):
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise FormatError(f"corrupt index file {path}: {exc}") from exc
        return cls.from_json(obj)


def load_or_create(path):
    return TagIndex.load(path) if Path(path).exists() else TagIndex()


# -- coverage -----------------------------------------------------------------

class Verdict(str, enum.Enum):
    PASS = "Pass"
    PARTIALLY_PASS = "PartiallyPass"
    FAIL = "Fail"


class CoverageVerdict(NamedTuple):
    coverage: float
    verdict: Verdict


def verdict_for(coverage):
    # strict thresholds: exactly 75 is a partial pass, exactly 25 a fail
    if coverage > 75.0:
        return Verdict.PASS
    if coverage > 25.0:
        return Verdict.PARTIALLY_PASS
    return Verdict.FAIL


def tag_coverage(generated, ground_truth):
    truth = {normalize_tag(t) for t in ground_truth if normalize_tag(t)}
    if not truth:
        raise InvalidInputError("ground truth tag list is empty")
    got = {normalize_tag(t) for t in generated}
    coverage = 100.0 * len(got & truth) / len(truth)
    return CoverageVerdict(coverage, verdict_for(coverage))


def read_ground_truth(path):
    """``image_id<TAB>tag1,tag2,...`` per line."""
    truth = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        image_id, sep, tags = line.partition("\t")
        if not sep:
            raise FormatError(f"ground truth line {n}: expected image_id<TAB>tags")
        truth[image_id.strip()] = [t for t in (s.strip() for s in tags.split(",")) if t]
    return truth


def evaluate_coverage(generated, ground_truth):
    """Per-image verdicts plus counts; ``generated`` maps image_id -> tag names.
    Images missing from ``generated`` count as producing no tags."""
    per_image = {i: tag_coverage(generated.get(i, []), truth) for i, truth in sorted(ground_truth.items())}
    counts = Counter(v.verdict for v in per_image.values())
    return per_image, {v: counts.get(v, 0) for v in Verdict}


def generated_tags(idx):
    return {i: [t.name for t in rec.tags] for i, rec in idx.records.items()}


def format_coverage_table(counts):
    total = sum(counts.values())
    rows = [("Pass", "> 75%", Verdict.PASS), ("Partially Pass", "> 25%", Verdict.PARTIALLY_PASS), ("Fail", "<= 25%", Verdict.FAIL)]
    lines = [f"{'':<16}{'Tag Coverage':>14}{'Count':>8}"]
    lines += [f"{label:<16}{band:>14}{counts.get(v, 0):>8}" for label, band, v in rows]
    lines.append(f"{'Total':<16}{'':>14}{total:>8}")
    return "\n".join(lines)
