"""Keyword extraction: linear-chain CRF Viterbi decoding and SCRDR PoS tagging.

Emission and transition scores come from a provider (a trained tagger, a
lattice fixture or the capitalization heuristic below); this module only
decodes.  Hindi-style resources use a Single Classification Ripple Down Rules
tree over lexicon-initialized tags.
"""

import re
import unicodedata
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, FrozenSet, List, NamedTuple, Optional, Tuple

import numpy as np

from .errors import ConfigError, InvalidInputError, ParseError


# -- Viterbi -----------------------------------------------------------------

@dataclass(frozen=True)
class LatticeScores:
    emissions: np.ndarray  # T x K
    transitions: np.ndarray  # K x K, [previous, current]

    def __post_init__(self):
        e = np.asarray(self.emissions, dtype=np.float64)
        t = np.asarray(self.transitions, dtype=np.float64)
        if e.ndim != 2 or e.shape[0] < 1 or e.shape[1] < 1:
            raise InvalidInputError(f"emissions must be a non-empty T x K matrix, got {e.shape}")
        if t.shape != (e.shape[1], e.shape[1]):
            raise InvalidInputError(f"transitions must be {e.shape[1]}x{e.shape[1]}, got {t.shape}")
        if not (np.isfinite(e).all() and np.isfinite(t).all()):
            raise InvalidInputError("lattice scores must be finite")
        object.__setattr__(self, "emissions", e)
        object.__setattr__(self, "transitions", t)

    @property
    def shape(self):
        return self.emissions.shape


def path_score(s, path):
    """Score of a label path, summed in the same order the decoder uses."""
    e, tr = s.emissions, s.transitions
    total = e[0, path[0]]
    for t in range(1, len(path)):
        total = (total + tr[path[t - 1], path[t]]) + e[t, path[t]]
    return float(total)


def viterbi_decode(s):
    """Best label path and its score; ties resolve to the smallest label index."""
    e, tr = s.emissions, s.transitions
    T, K = e.shape
    score = e[0].copy()
    back = np.zeros((T, K), dtype=np.int64)
    for t in range(1, T):
        cand = score[:, None] + tr  # [prev, cur]
        back[t] = np.argmax(cand, axis=0)  # first max = smallest index
        score = cand[back[t], np.arange(K)] + e[t]
    last = int(np.argmax(score))
    path = [last]
    for t in range(T - 1, 0, -1):
        path.append(int(back[t, path[-1]]))
    path.reverse()
    return path, float(score[last])


def read_lattice(source):
    """Parse ``T K`` then T emission rows and K transition rows of decimals."""
    text = Path(source).read_text(encoding="utf-8") if not isinstance(source, str) or "\n" not in source else source
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    try:
        T, K = int(rows[0][0]), int(rows[0][1])
        values = np.array([[float(v) for v in r] for r in rows[1 : 1 + T + K]], dtype=np.float64)
    except (IndexError, ValueError) as exc:
        raise ParseError(f"malformed lattice file: {exc}") from exc
    if values.shape != (T + K, K) or len(rows) != 1 + T + K:
        raise ParseError(f"lattice body does not match header {T}x{K}")
    return LatticeScores(values[:T], values[T:])


def write_lattice(s):
    T, K = s.shape
    lines = [f"{T} {K}"]
    lines += [" ".join(repr(float(v)) for v in row) for row in s.emissions]
    lines += [" ".join(repr(float(v)) for v in row) for row in s.transitions]
    return "\n".join(lines) + "\n"


def bio_spans(labels):
    """(start, stop, type) spans from BIO labels; a stray I- opens a new span."""
    spans = []
    cur = None
    for i, lab in enumerate(labels):
        prefix, _, kind = lab.partition("-")
        if prefix == "B" or (prefix == "I" and (cur is None or cur[2] != kind)):
            if cur:
                spans.append(tuple(cur))
            cur = [i, i + 1, kind]
        elif prefix == "I":
            cur[1] = i + 1
        else:
            if cur:
                spans.append(tuple(cur))
            cur = None
    if cur:
        spans.append(tuple(cur))
    return spans


class FixtureLatticeProvider:
    """Serves one precomputed lattice; token count must match its length."""

    def __init__(self, lattice, labels, confidence=1.0):
        self.lattice = lattice
        self.labels = list(labels)
        self.confidence = confidence
        if len(self.labels) != lattice.shape[1]:
            raise InvalidInputError("label count does not match lattice width")

    def score(self, tokens):
        if len(tokens) != self.lattice.shape[0]:
            raise InvalidInputError(f"lattice has {self.lattice.shape[0]} steps, text has {len(tokens)} tokens")
        return self.lattice, self.labels


class CapitalizationScorer:
    """Emission scores from orthography alone: capitalized, non-stopword tokens
    lean towards an entity label.  A stand-in for a trained tagger that still
    goes through the full CRF decode."""

    labels = ["O", "B-ENT", "I-ENT"]

    def __init__(self, stopwords=frozenset()):
        self.stopwords = stopwords
        tr = np.zeros((3, 3))
        tr[0, 2] = -1e4  # O -> I forbidden
        tr[1, 2] = tr[2, 2] = 0.5
        self.transitions = tr

    def score(self, tokens):
        e = np.zeros((len(tokens), 3))
        for t, tok in enumerate(tokens):
            capital = tok[:1].isupper() and any(ch.isalpha() for ch in tok)
            if capital and tok.lower() not in self.stopwords:
                e[t] = (0.0, 1.0, 1.0)
            else:
                e[t] = (1.0, -1.0, -1.0)
        return LatticeScores(e, self.transitions), self.labels


# -- SCRDR -------------------------------------------------------------------

@dataclass(frozen=True)
class Condition:
    attr: str  # "word" or "tag"
    offset: int
    value: str


@dataclass
class ScrdrNode:
    conditions: Tuple[Condition, ...]
    conclusion: Optional[str]  # None on the root: keep the lexicon tag
    except_child: Optional["ScrdrNode"] = None
    else_sibling: Optional["ScrdrNode"] = None
    line: int = 0

    def matches(self, words, tags, i):
        for c in self.conditions:
            j = i + c.offset
            seq = words if c.attr == "word" else tags
            if not 0 <= j < len(seq) or seq[j] != c.value:
                return False
        return True


@dataclass
class Lexicon:
    tags: Dict[str, str]
    default_tag: str = "NOUN"

    def tag(self, word):
        return self.tags.get(word, self.tags.get(word.lower(), self.default_tag))

    @classmethod
    def load(cls, source, default_tag="NOUN"):
        tags = {}
        text = Path(source).read_text(encoding="utf-8")
        for n, line in enumerate(text.splitlines(), start=1):
            if not line.strip() or line.startswith("#"):
                continue
            word, sep, tag = line.partition("\t")
            if not sep or not word or not tag.strip():
                raise ParseError("expected word<TAB>tag", n)
            if word == "__default__":
                default_tag = tag.strip()
            else:
                tags[word] = tag.strip()
        return cls(tags, default_tag)


_RULE = re.compile(r'^if\s+(.+?)\s+then\s+(\S+)\s*$')
_COND = re.compile(r'^(word|tag)@([+-]?\d+)\s*==\s*"(.*)"$')


def _indent_depth(raw, n):
    ws = raw[: len(raw) - len(raw.lstrip(" \t"))]
    if " " in ws and "\t" in ws:
        raise ParseError("mixed tabs and spaces in indentation", n)
    if "\t" in ws:
        return len(ws)
    if len(ws) % 4:
        raise ParseError("indentation must be tabs or multiples of 4 spaces", n)
    return len(ws) // 4


def parse_rules(text):
    """Parse the indented rule format into a tree rooted at an always-true node.

    The first non-comment line must be ``true``.  Each deeper line reads
    ``if <word|tag>@<offset> == "<value>" [and ...] then <TAG>``; a line
    indented one level under a rule is its exception, equal-depth lines are
    alternatives tried in order.
    """
    root = None
    stack = []  # stack[d] = last node seen at depth d
    for n, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        depth = _indent_depth(raw, n)
        body = raw.strip()
        if root is None:
            if depth != 0 or body != "true":
                raise ParseError("rule file must start with an unindented 'true' root", n)
            root = ScrdrNode((), None, line=n)
            stack = [root]
            continue
        if depth == 0:
            raise ParseError("only the root may be unindented", n)
        if depth > len(stack):
            raise ParseError("indentation jumps more than one level", n)
        m = _RULE.match(body)
        if not m:
            raise ParseError(f"cannot parse rule {body!r}", n)
        conds = []
        for part in re.split(r"\s+and\s+", m.group(1)):
            cm = _COND.match(part.strip())
            if not cm:
                raise ParseError(f"bad condition {part!r}", n)
            offset = int(cm.group(2))
            if not -2 <= offset <= 2:
                raise ParseError("condition offsets must lie in -2..+2", n)
            conds.append(Condition(cm.group(1), offset, cm.group(3)))
        node = ScrdrNode(tuple(conds), m.group(2), line=n)
        parent = stack[depth - 1]
        if depth < len(stack):
            stack[depth].else_sibling = node
            del stack[depth + 1 :]
            stack[depth] = node
        else:
            if parent.except_child is not None:  # pragma: no cover - guarded by stack logic
                raise ParseError("duplicate exception child", n)
            parent.except_child = node
            stack.append(node)
    if root is None:
        raise ParseError("empty rule file", 1)
    return root


def load_rules(path):
    return parse_rules(Path(path).read_text(encoding="utf-8"))


def scrdr_tag(tokens, tree, lex):
    """Tag every token with the conclusion of the last satisfied rule on its path.

    Conditions read the lexicon-initialized tags, so tokens are independent.
    """
    words = [t.lower() for t in tokens]
    initial = [lex.tag(t) for t in tokens]
    out = []
    for i in range(len(tokens)):
        tag = initial[i] if tree.conclusion is None else tree.conclusion
        node = tree.except_child
        while node is not None:
            if node.matches(words, initial, i):
                tag = node.conclusion
                node = node.except_child
            else:
                node = node.else_sibling
        out.append(tag)
    return out


# -- keyword extraction -------------------------------------------------------

class Keyword(NamedTuple):
    text: str
    label: str
    confidence: float
    span: Tuple[int, int]


@dataclass
class KeywordResources:
    stopwords: FrozenSet[str] = frozenset()
    lattice_provider: Optional[object] = None
    rules: Optional[ScrdrNode] = None
    lexicon: Optional[Lexicon] = None
    noun_tags: FrozenSet[str] = frozenset({"NOUN", "PROPN"})
    confidence: float = 1.0


def tokenize(text):
    """Whitespace tokens with leading/trailing punctuation and symbols removed."""
    out = []
    for raw in text.split():
        start, stop = 0, len(raw)
        while start < stop and unicodedata.category(raw[start])[0] in "PS":
            start += 1
        while stop > start and unicodedata.category(raw[stop - 1])[0] in "PS":
            stop -= 1
        if start < stop:
            out.append(raw[start:stop])
    return out


def _crf_spans(tokens, provider):
    lattice, labels = provider.score(tokens)
    path, _ = viterbi_decode(lattice)
    conf = getattr(provider, "confidence", 1.0)
    return [(a, b, kind, conf) for a, b, kind in bio_spans([labels[k] for k in path])]


def _noun_spans(tokens, res):
    tags = scrdr_tag(tokens, res.rules, res.lexicon)
    spans = []
    start = None
    for i, tag in enumerate(tags + [None]):
        is_noun = tag in res.noun_tags and tokens[i].lower() not in res.stopwords if tag else False
        if is_noun and start is None:
            start = i
        elif not is_noun and start is not None:
            kinds = set(tags[start:i])
            spans.append((start, i, "PROPN" if "PROPN" in kinds else "NOUN", res.confidence))
            start = None
    return spans


def extract_keywords(text, lang, res):
    if res is None or (res.lattice_provider is None and (res.rules is None or res.lexicon is None)):
        raise ConfigError(f"no keyword resources for language {lang!r}")
    tokens = tokenize(text)
    if not tokens:
        return []
    spans = _crf_spans(tokens, res.lattice_provider) if res.lattice_provider else _noun_spans(tokens, res)
    seen = set()
    out = []
    for a, b, label, conf in spans:
        words = [w for w in tokens[a:b]]
        if all(w.lower() in res.stopwords for w in words):
            continue
        phrase = " ".join(words)
        key = phrase.casefold()
        if key in seen:
            continue
        seen.add(key)
        out.append(Keyword(phrase, label, conf, (a, b)))
    return out


# -- bundled resources --------------------------------------------------------

def _data(*parts):
    return resources.files("screentags").joinpath("data", *parts)


def bundled_stopwords(lang):
    path = _data("stopwords", f"{lang}.txt")
    if not path.is_file():
        return frozenset()
    return frozenset(w.strip() for w in path.read_text(encoding="utf-8").splitlines() if w.strip())


def default_resources(lang):
    """Capitalization-driven CRF decode for Latin-script languages, SCRDR for Hindi."""
    stop = bundled_stopwords(lang)
    if lang in ("en", "es", "it", "fr", "de"):
        return KeywordResources(stopwords=stop, lattice_provider=CapitalizationScorer(stop))
    if lang == "hi":
        return KeywordResources(
            stopwords=stop,
            rules=parse_rules(_data("scrdr", "hi.rules").read_text(encoding="utf-8")),
            lexicon=Lexicon.load(str(_data("scrdr", "hi.lexicon.tsv"))),
        )
    raise ConfigError(f"no keyword resources for language {lang!r}")
