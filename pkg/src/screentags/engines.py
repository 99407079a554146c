"""OCR result model, engine/classifier interfaces and fixture implementations.

Fixture sidecars live next to the image: ``shot.png`` is recognized from
``shot.ocr.txt`` (blocks separated by blank lines, one line per text line) and
classified from ``shot.scene.tsv`` (``label<TAB>prob`` per line).
"""

import logging
import re
import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Protocol

from .errors import EngineError, InvalidInputError
from .imgproc import save_pgm
from .textregion import TextBox

log = logging.getLogger(__name__)

MIN_GLYPH_PX = 16


@dataclass(frozen=True)
class OcrElement:
    text: str
    box: TextBox
    confidence: float = 1.0

    def __post_init__(self):
        if not self.text:
            raise InvalidInputError("OCR element text must be non-empty")
        if not 0.0 <= self.confidence <= 1.0:
            raise InvalidInputError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class OcrLine:
    elements: tuple
    box: TextBox


@dataclass(frozen=True)
class OcrBlock:
    lines: tuple
    box: TextBox


def flatten_text(doc):
    """Elements joined by spaces, lines by newlines, blocks by a blank line."""
    blocks = doc.blocks if isinstance(doc, OcrDocument) else doc
    return "\n\n".join(
        "\n".join(" ".join(e.text for e in line.elements) for line in block.lines) for block in blocks
    )


@dataclass(frozen=True)
class OcrDocument:
    blocks: tuple = ()
    full_text: str = field(default="")

    @classmethod
    def from_blocks(cls, blocks):
        blocks = tuple(blocks)
        return cls(blocks, flatten_text(blocks))

    def elements(self):
        for block in self.blocks:
            for line in block.lines:
                yield from line.elements

    @property
    def mean_confidence(self):
        confs = [e.confidence for e in self.elements()]
        return sum(confs) / len(confs) if confs else 0.0


@dataclass(frozen=True)
class SceneLabel:
    label: str
    prob: float

    def __post_init__(self):
        if not 0.0 <= self.prob <= 1.0:
            raise InvalidInputError(f"scene probability {self.prob} outside [0, 1]")


class OcrEngine(Protocol):
    engine_id: str

    def recognize(self, img, regions: List[TextBox]) -> OcrDocument: ...


class SceneClassifier(Protocol):
    classifier_id: str

    def classify(self, img) -> List[SceneLabel]: ...


_CONF_SUFFIX = re.compile(r"\t([01](?:\.\d+)?)$")


def parse_ocr_text(text, width, height, engine_id="fixture"):
    """Build an OcrDocument from plain text, laying lines out top to bottom.

    A line may end in ``<TAB>confidence``; otherwise confidence is 1.0.
    Element boxes are synthesized proportionally to character counts.
    """
    text = text.strip("\n")
    raw_blocks = [b for b in re.split(r"\n[ \t]*\n", text) if b.strip()] if text.strip() else []
    parsed = []
    for raw in raw_blocks:
        lines = []
        for raw_line in raw.split("\n"):
            conf = 1.0
            m = _CONF_SUFFIX.search(raw_line)
            if m:
                conf = float(m.group(1))
                raw_line = raw_line[: m.start()]
            words = raw_line.split()
            if words:
                lines.append((words, conf))
        if lines:
            parsed.append(lines)

    n_lines = sum(len(b) for b in parsed)
    if n_lines == 0:
        return OcrDocument.from_blocks(())
    line_h = max(1, height // n_lines)
    if line_h < MIN_GLYPH_PX:
        log.warning("%s: text lines ~%dpx tall, below the %dpx recommended glyph size", engine_id, line_h, MIN_GLYPH_PX)

    blocks = []
    row = 0
    for lines in parsed:
        ocr_lines = []
        for words, conf in lines:
            y = min(row * line_h, height - 1)
            h = max(1, min(line_h, height - y))
            unit = width / (sum(len(w) for w in words) + len(words) - 1)
            offset = 0
            elements = []
            for w in words:
                ex = min(int(offset * unit), width - 1)
                ew = max(1, min(int((offset + len(w)) * unit) - ex, width - ex))
                elements.append(OcrElement(w, TextBox(ex, y, ew, h), conf))
                offset += len(w) + 1
            lx = min(e.box.x for e in elements)
            lr = max(e.box.right for e in elements)
            ocr_lines.append(OcrLine(tuple(elements), TextBox(lx, y, lr - lx, h)))
            row += 1
        bx = min(l.box.x for l in ocr_lines)
        by = ocr_lines[0].box.y
        br = max(l.box.right for l in ocr_lines)
        bb = ocr_lines[-1].box.bottom
        blocks.append(OcrBlock(tuple(ocr_lines), TextBox(bx, by, br - bx, bb - by)))
    return OcrDocument.from_blocks(blocks)


def _sidecar(img, suffix, engine_id):
    if not img.source:
        raise EngineError(engine_id, "fixture engines need an image loaded from a file")
    src = Path(img.source)
    return src.with_name(src.stem + suffix)


class FixtureOcrEngine:
    """Deterministic OCR that echoes the ``<stem>.ocr.txt`` sidecar."""

    def __init__(self, engine_id="fixture-ocr"):
        self.engine_id = engine_id

    def recognize(self, img, regions=()):
        path = _sidecar(img, ".ocr.txt", self.engine_id)
        text = path.read_text(encoding="utf-8") if path.exists() else ""
        return parse_ocr_text(text, img.width, img.height, self.engine_id)


class ExternalOcrEngine:
    """Runs an OCR executable through a command template such as
    ``tesseract {image} stdout -l hin`` and parses its plain-text output."""

    def __init__(self, engine_id, command, timeout=60.0):
        self.engine_id = engine_id
        self.command = command
        self.timeout = timeout

    def recognize(self, img, regions=()):
        with tempfile.TemporaryDirectory() as tmp:
            image_path = Path(tmp) / "input.pgm"
            save_pgm(img, image_path)
            argv = [a.format(image=image_path) for a in shlex.split(self.command)]
            try:
                proc = subprocess.run(argv, capture_output=True, text=True, timeout=self.timeout)
            except (OSError, subprocess.TimeoutExpired) as exc:
                raise EngineError(self.engine_id, f"engine unavailable: {exc}") from exc
        if proc.returncode != 0:
            raise EngineError(self.engine_id, f"exit status {proc.returncode}: {proc.stderr.strip()[:200]}")
        return parse_ocr_text(proc.stdout, img.width, img.height, self.engine_id)


def recognize(engine, img, regions=()):
    """Run ``engine`` on ``img``; ``regions`` (empty = whole image) must lie inside it."""
    if engine is None:
        raise EngineError("none", "engine unavailable")
    for box in regions:
        if not box.within(img.width, img.height):
            raise InvalidInputError(f"region {box} outside {img.width}x{img.height} image")
    doc = engine.recognize(img, list(regions))
    for block in doc.blocks:
        if not block.box.within(img.width, img.height):
            raise EngineError(engine.engine_id, f"block box {block.box} outside image")
    return doc


class FixtureSceneClassifier:
    def __init__(self, classifier_id="fixture-scene"):
        self.classifier_id = classifier_id

    def classify(self, img):
        path = _sidecar(img, ".scene.tsv", self.classifier_id)
        if not path.exists():
            return []
        labels = []
        for line in path.read_text(encoding="utf-8").splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            label, _, prob = line.partition("\t")
            labels.append(SceneLabel(label.strip(), float(prob)))
        return labels


def classify_scene(classifier, img, top_k=5):
    if top_k < 1:
        raise InvalidInputError("top_k must be >= 1")
    if classifier is None:
        raise EngineError("none", "scene classifier unavailable")
    labels = classifier.classify(img)
    return sorted(labels, key=lambda s: (-s.prob, s.label))[:top_k]


def make_engine(engine_id, spec):
    """Engine from a config value: ``fixture`` or ``external: <command template>``."""
    kind, _, rest = spec.partition(":")
    kind = kind.strip().lower()
    if kind == "fixture":
        return FixtureOcrEngine(engine_id)
    if kind == "external":
        if not rest.strip():
            raise EngineError(engine_id, "external engine needs a command template")
        return ExternalOcrEngine(engine_id, rest.strip())
    raise EngineError(engine_id, f"unknown engine kind {kind!r}")
