"""Character n-gram language models (CLMs) and language detection.

Every word is padded with the boundary marker ``_`` on both sides so that
prefix and suffix n-grams carry their own statistics.  A model stores, for each
order n <= max_n and every context of n-1 characters seen in training, the
add-alpha smoothed conditional distribution

    P(c | ctx) = (C(ctx c) + alpha) / (C(ctx .) + alpha * |alphabet|)

as log10 values, where C(ctx .) counts n-grams starting with ``ctx``.  A word
is scored as the chain P(c1) P(c2|c1) P(c3|c1 c2) ... with the context capped
at max_n - 1 characters; a text is the sum over its words.
"""

import io
import math
import re
import struct
import zlib
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, List, NamedTuple

import numpy as np

from .errors import ConfigError, FormatError, InvalidInputError, NoSignalError

BOUNDARY = "_"
MAGIC = b"CLM1"
VERSION = 1
BUNDLED_LANGUAGES = ("en", "es", "it", "fr", "de")

# Log-probs live on a 2**-32 grid, so sums of them are exact (and independent
# of order) while the running total stays below 2**20 in magnitude.
GRID_BITS = 32

_WORD = re.compile(r"[^\W\d_]+")


def _snap(v):
    return np.ldexp(np.round(np.ldexp(v, GRID_BITS)), -GRID_BITS)


def normalize_words(text):
    """Lowercase and split on anything that is not a letter."""
    return _WORD.findall(text.lower())


def word_ngrams(word, n):
    if n < 1:
        raise InvalidInputError("n-gram order must be >= 1")
    if not word or any(ch.isspace() for ch in word):
        raise InvalidInputError(f"not a single word: {word!r}")
    padded = BOUNDARY + word + BOUNDARY
    return [padded[i : i + n] for i in range(len(padded) - n + 1)]


@dataclass
class CharLanguageModel:
    language: str
    max_n: int
    alphabet: str
    tables: List[Dict[str, np.ndarray]]
    alpha: float = 0.1
    _index: Dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.language or self.language != self.language.lower():
            raise InvalidInputError(f"language code must be non-empty lowercase: {self.language!r}")
        if BOUNDARY not in self.alphabet:
            raise InvalidInputError("alphabet must contain the boundary marker")
        self._index = {ch: i for i, ch in enumerate(self.alphabet)}

    @property
    def uniform_logprob(self):
        return float(_snap(-math.log10(len(self.alphabet))))

    def logprob(self, context, ch):
        """log10 P(ch | context) with the context already truncated."""
        i = self._index.get(ch)
        row = self.tables[len(context)].get(context)
        if i is None or row is None:
            return self.uniform_logprob
        return float(row[i])

    def char_logprobs(self, word):
        """Per-position chain terms for the padded word."""
        if not word:
            raise InvalidInputError("empty word")
        padded = BOUNDARY + word + BOUNDARY
        k = self.max_n - 1
        return [self.logprob(padded[max(0, i - k) : i], padded[i]) for i in range(len(padded))]

    def n_contexts(self):
        return [len(t) for t in self.tables]


def word_logprob(word, m):
    return math.fsum(m.char_logprobs(word))


class TextScore(NamedTuple):
    log_prob: float
    n_words: int

    @property
    def no_signal(self):
        return self.n_words == 0


def text_logprob(text, m):
    """Sum of word log-probabilities; words are whitespace-separated after normalization."""
    words = normalize_words(text)
    return TextScore(math.fsum(word_logprob(w, m) for w in words), len(words))


def build_clm(corpus, language, max_n=3, alpha=0.1, max_alphabet=40):
    """Count n-grams of orders 1..max_n over ``corpus`` (iterable of sentences).

    The alphabet is ``_`` plus the ``max_alphabet - 1`` most frequent letters;
    words containing any other letter are skipped.
    """
    if alpha <= 0:
        raise InvalidInputError("alpha must be positive")
    if max_n < 1:
        raise InvalidInputError("max_n must be >= 1")
    words = [w for sentence in corpus for w in normalize_words(sentence)]
    letters = Counter(ch for w in words for ch in w)
    keep = sorted(letters, key=lambda ch: (-letters[ch], ch))
    if max_alphabet is not None:
        keep = keep[: max_alphabet - 1]
    alphabet = BOUNDARY + "".join(sorted(keep))
    allowed = set(alphabet)
    words = [w for w in words if set(w) <= allowed]
    if not words:
        raise InvalidInputError(f"corpus for {language!r} is empty after normalization")

    size = len(alphabet)
    index = {ch: i for i, ch in enumerate(alphabet)}
    tables = []
    for n in range(1, max_n + 1):
        counts = {}
        for w in words:
            for gram in word_ngrams(w, n):
                row = counts.get(gram[:-1])
                if row is None:
                    row = counts[gram[:-1]] = np.zeros(size, dtype=np.int64)
                row[index[gram[-1]]] += 1
        table = {}
        for ctx in sorted(counts):
            row = counts[ctx]
            table[ctx] = _snap(np.log10((row + alpha) / (row.sum() + alpha * size)))
        tables.append(table)
    return CharLanguageModel(language.lower(), max_n, alphabet, tables, alpha)


class DetectionResult(NamedTuple):
    language: str
    log_prob: float
    per_language_scores: Dict[str, float]


def detect_language(text, models):
    """Pick the model with the highest text log-probability; ties -> smaller code."""
    if not models:
        raise ConfigError("no language models loaded")
    if not _WORD.search(text or ""):
        raise NoSignalError("text has no alphabetic content")
    scores = {m.language: text_logprob(text, m).log_prob for m in models}
    best = min(scores, key=lambda code: (-scores[code], code))
    return DetectionResult(best, scores[best], scores)


# -- serialization -----------------------------------------------------------

def serialize_clm(m):
    """Compact little-endian encoding with 8-bit affine-quantized log-probs."""
    if len(m.alphabet) > 255:
        raise InvalidInputError("alphabet too large for 8-bit context indices")
    out = io.BytesIO()
    lang = m.language.encode("utf-8")
    alpha = m.alphabet.encode("utf-8")
    out.write(MAGIC)
    out.write(struct.pack("<BB", VERSION, len(lang)))
    out.write(lang)
    out.write(struct.pack("<Bf", m.max_n, m.alpha))
    out.write(struct.pack("<H", len(alpha)))
    out.write(alpha)
    index = {ch: i for i, ch in enumerate(m.alphabet)}
    for n, table in enumerate(m.tables, start=1):
        contexts = sorted(table)
        values = np.stack([table[c] for c in contexts]) if contexts else np.zeros((0, len(m.alphabet)))
        lo = float(values.min()) if values.size else 0.0
        hi = float(values.max()) if values.size else 0.0
        scale = (hi - lo) / 255.0 if hi > lo else 1.0
        q = np.clip(np.rint((values - lo) / scale), 0, 255).astype(np.uint8)
        out.write(struct.pack("<Iff", len(contexts), scale, lo))
        for ctx, row in zip(contexts, q):
            out.write(bytes(index[ch] for ch in ctx))
            out.write(row.tobytes())
    body = out.getvalue()
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise FormatError(f"truncated model: needed {n} bytes", self.pos)
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def deserialize_clm(data):
    data = bytes(data)
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise FormatError("bad magic, not a CLM file", 0)
    version, lang_len = r.unpack("<BB")
    if version != VERSION:
        raise FormatError(f"unsupported CLM version {version} (expected {VERSION})", 4)
    if len(data) < 4:
        raise FormatError("truncated model", len(data))
    crc_pos = len(data) - 4
    (crc,) = struct.unpack("<I", data[crc_pos:]) if crc_pos >= r.pos else (None,)
    if crc is None or zlib.crc32(data[:crc_pos]) != crc:
        raise FormatError("checksum mismatch or truncated model", crc_pos)
    try:
        language = r.take(lang_len).decode("utf-8")
        max_n, alpha = r.unpack("<Bf")
        (alpha_len,) = r.unpack("<H")
        pos = r.pos
        alphabet = r.take(alpha_len).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"invalid UTF-8 in header: {exc}", r.pos) from exc
    if not alphabet or max_n < 1:
        raise FormatError("empty alphabet or order", pos)
    size = len(alphabet)
    tables = []
    for n in range(1, max_n + 1):
        pos = r.pos
        n_ctx, scale, offset = r.unpack("<Iff")
        table = {}
        for _ in range(n_ctx):
            ctx_idx = r.take(n - 1)
            if any(i >= size for i in ctx_idx):
                raise FormatError("context index outside alphabet", r.pos - (n - 1))
            row = np.frombuffer(r.take(size), dtype=np.uint8)
            table["".join(alphabet[i] for i in ctx_idx)] = _snap(offset + scale * row.astype(np.float64))
        tables.append(table)
    if r.pos != crc_pos:
        raise FormatError("trailing bytes after tables", r.pos)
    try:
        return CharLanguageModel(language, max_n, alphabet, tables, float(alpha))
    except InvalidInputError as exc:
        raise FormatError(str(exc), 0) from exc


def save_clm(m, path):
    Path(path).write_bytes(serialize_clm(m))


def load_clm(path):
    return deserialize_clm(Path(path).read_bytes())


def load_models(directory):
    directory = Path(directory)
    if not directory.is_dir():
        raise ConfigError(f"CLM directory not found: {directory}")
    models = [load_clm(p) for p in sorted(directory.glob("*.clm"))]
    if not models:
        raise ConfigError(f"no *.clm files in {directory}")
    return models


# -- bundled data and evaluation ----------------------------------------------

def _data_dir():
    return resources.files("screentags") / "data"


def bundled_corpus(language, split="train"):
    """Sentences from the bundled corpus; ``split`` is 'train' or 'test'."""
    path = _data_dir() / "corpora" / f"{language}.{split}.txt"
    return [s for s in path.read_text(encoding="utf-8").splitlines() if s.strip()]


def bundled_models_dir():
    return Path(str(_data_dir() / "clm"))


def confusion_matrix(models, labelled):
    """``labelled`` is an iterable of (language, sentence); returns (codes, matrix)."""
    codes = sorted(m.language for m in models)
    pos = {c: i for i, c in enumerate(codes)}
    matrix = np.zeros((len(codes), len(codes)), dtype=np.int64)
    for lang, sentence in labelled:
        matrix[pos[lang], pos[detect_language(sentence, models).language]] += 1
    return codes, matrix


def format_confusion_table(codes, matrix):
    width = max(7, *(len(c) for c in codes))
    head = " " * width + "".join(f"{c:>{width}}" for c in codes) + f"{'Accuracy':>10}"
    lines = [head]
    for i, c in enumerate(codes):
        row_total = matrix[i].sum()
        acc = 100.0 * matrix[i, i] / row_total if row_total else 0.0
        lines.append(f"{c:<{width}}" + "".join(f"{v:>{width}d}" for v in matrix[i]) + f"{acc:>10.1f}")
    overall = 100.0 * np.trace(matrix) / matrix.sum() if matrix.sum() else 0.0
    lines.append(f"{'Total':<{width}}" + " " * (width * len(codes)) + f"{overall:>10.1f}")
    return "\n".join(lines)
