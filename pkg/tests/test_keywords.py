import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from screentags import keywords as kw
from screentags.errors import ConfigError, InvalidInputError, ParseError


def brute_force(s):
    """Exhaustive maximum over all K**T paths (first in lexicographic order on ties)."""
    T, K = s.shape
    best, best_path = -np.inf, None
    for path in itertools.product(range(K), repeat=T):
        total = s.emissions[0, path[0]]
        for t in range(1, T):
            total = (total + s.transitions[path[t - 1], path[t]]) + s.emissions[t, path[t]]
        if total > best:
            best, best_path = total, list(path)
    return best_path, best


def random_lattice(rng, T, K):
    return kw.LatticeScores(rng.normal(size=(T, K)), rng.normal(size=(K, K)))


def test_single_step():
    s = kw.LatticeScores([[0.1, 0.7, 0.7, -1.0]], np.zeros((4, 4)))
    assert kw.viterbi_decode(s) == ([1], 0.7)


def test_zero_transitions_rowwise_argmax():
    rng = np.random.default_rng(0)
    e = rng.normal(size=(6, 3))
    path, _ = kw.viterbi_decode(kw.LatticeScores(e, np.zeros((3, 3))))
    assert path == list(np.argmax(e, axis=1))


def test_random_5x4_brute_force():
    s = random_lattice(np.random.default_rng(42), 5, 4)
    path, score = kw.viterbi_decode(s)
    assert (path, score) == brute_force(s)


def test_brute_force_many():
    rng = np.random.default_rng(7)
    for _ in range(300):
        s = random_lattice(rng, int(rng.integers(1, 7)), int(rng.integers(1, 6)))
        path, score = kw.viterbi_decode(s)
        assert score == brute_force(s)[1]
        assert kw.path_score(s, path) == score


def test_ties_smallest_index():
    s = kw.LatticeScores(np.zeros((3, 3)), np.zeros((3, 3)))
    assert kw.viterbi_decode(s) == ([0, 0, 0], 0.0)


small = st.integers(1, 6).flatmap(
    lambda T: st.integers(1, 5).flatmap(
        lambda K: st.tuples(
            arrays(np.float64, (T, K), elements=st.floats(-50, 50)),
            arrays(np.float64, (K, K), elements=st.floats(-50, 50)),
            st.integers(0, T - 1),
            st.floats(-20, 20),
        )
    )
)


@settings(max_examples=80, deadline=None)
@given(small)
def test_emission_shift_property(args):
    e, tr, t, c = args
    s = kw.LatticeScores(e, tr)
    path, score = kw.viterbi_decode(s)
    e2 = e.copy()
    e2[t] += c
    s2 = kw.LatticeScores(e2, tr)
    path2, score2 = kw.viterbi_decode(s2)
    assert kw.path_score(s2, path2) == score2
    assert score2 == pytest.approx(score + c, abs=1e-9)
    # the old path is still optimal under the shifted lattice
    assert kw.path_score(s2, path) == pytest.approx(score2, abs=1e-9)


def test_lattice_validation():
    with pytest.raises(InvalidInputError):
        kw.LatticeScores(np.zeros((0, 3)), np.zeros((3, 3)))
    with pytest.raises(InvalidInputError):
        kw.LatticeScores(np.zeros((2, 3)), np.zeros((2, 2)))
    with pytest.raises(InvalidInputError):
        kw.LatticeScores([[np.nan]], [[0.0]])


def test_lattice_file_roundtrip(tmp_path):
    s = random_lattice(np.random.default_rng(1), 4, 3)
    path = tmp_path / "l.txt"
    path.write_text(kw.write_lattice(s))
    back = kw.read_lattice(path)
    assert np.array_equal(back.emissions, s.emissions) and np.array_equal(back.transitions, s.transitions)
    with pytest.raises(ParseError):
        kw.read_lattice("2 2\n1 2\n")


def test_bio_spans():
    assert kw.bio_spans(["O", "B-PER", "I-PER", "O", "I-LOC", "B-LOC"]) == [(1, 3, "PER"), (4, 5, "LOC"), (5, 6, "LOC")]


# -- SCRDR ----------------------------------------------------------------------

LEX = kw.Lexicon({"दिल्ली": "PROPN", "के": "ADP", "लिए": "ADP", "चलो": "VERB"}, "NOUN")


def test_root_only_tree_keeps_lexicon():
    tree = kw.parse_rules("true\n")
    assert kw.scrdr_tag(["दिल्ली", "के", "लिए"], tree, LEX) == ["PROPN", "ADP", "ADP"]


def test_next_word_rule_fires():
    tree = kw.parse_rules('true\n\tif word@+1 == "के" then NOUN\n')
    assert kw.scrdr_tag(["चलो", "के"], tree, LEX) == ["NOUN", "ADP"]


def test_unknown_word_default():
    assert kw.scrdr_tag(["अज्ञात"], kw.parse_rules("true\n"), LEX) == ["NOUN"]


def test_exception_and_else_chain():
    text = (
        "true\n"
        '    if word@+1 == "के" then NOUN\n'
        '        if tag@0 == "PROPN" then PROPN\n'
        '    if tag@0 == "VERB" then AUX\n'
    )
    tree = kw.parse_rules(text)
    assert kw.scrdr_tag(["दिल्ली", "के", "चलो"], tree, LEX) == ["PROPN", "ADP", "AUX"]
    assert tree.except_child.else_sibling.conclusion == "AUX"
    assert tree.except_child.except_child.conclusion == "PROPN"


@pytest.mark.parametrize(
    "text,line",
    [
        ("", 1),
        ('if word@0 == "x" then N\n', 1),
        ('true\n\tif word@3 == "x" then N\n', 2),
        ('true\n\tif word@0 = "x" then N\n', 2),
        ('true\n\t\t\tif word@0 == "x" then N\n', 2),
        ('true\n\tif word@0 == "x" then N\n  if tag@0 == "y" then M\n', 3),
    ],
)
def test_parse_errors_carry_line(text, line):
    with pytest.raises(ParseError) as err:
        kw.parse_rules(text)
    assert err.value.line == line


@given(st.lists(st.sampled_from(["दिल्ली", "के", "लिए", "चलो", "टिकट", "x"]), max_size=8))
def test_scrdr_length_and_locality(tokens):
    tree = kw.default_resources("hi").rules
    lex = kw.default_resources("hi").lexicon
    tags = kw.scrdr_tag(tokens, tree, lex)
    assert len(tags) == len(tokens)
    # tagging each token on its own window gives the same answer
    for i in range(len(tokens)):
        lo = max(0, i - 2)
        assert kw.scrdr_tag(tokens[lo : i + 3], tree, lex)[i - lo] == tags[i]


def test_bundled_hindi_rules():
    res = kw.default_resources("hi")
    tags = kw.scrdr_tag("दिल्ली के लिए उड़ान टिकट".split(), res.rules, res.lexicon)
    assert tags == ["PROPN", "ADP", "ADP", "NOUN", "NOUN"]


# -- extraction --------------------------------------------------------------------

PERSON_LABELS = ["O", "B-PERSON", "I-PERSON"]


def person_provider():
    e = np.array([[2.0, 0.0, -1.0], [0.0, 3.0, 0.0], [2.0, 0.0, -1.0]])
    tr = np.zeros((3, 3))
    tr[0, 2] = -100.0
    return kw.FixtureLatticeProvider(kw.LatticeScores(e, tr), PERSON_LABELS, confidence=0.9)


def test_fixture_lattice_person():
    res = kw.KeywordResources(stopwords=frozenset(), lattice_provider=person_provider())
    assert kw.extract_keywords("pay ravi tomorrow", "en", res) == [kw.Keyword("ravi", "PERSON", 0.9, (1, 2))]


def test_empty_and_stopwords():
    res = kw.default_resources("en")
    assert kw.extract_keywords("", "en", res) == []
    assert kw.extract_keywords("The Of And", "en", res) == []


def test_missing_resources():
    with pytest.raises(ConfigError, match="xx"):
        kw.extract_keywords("hello", "xx", kw.KeywordResources())


def test_capitalized_multiword_entity():
    got = kw.extract_keywords("Flight to New York, then New York again", "en", kw.default_resources("en"))
    assert [k.text for k in got] == ["Flight", "New York"]


@settings(max_examples=60)
@given(st.lists(st.sampled_from(["The", "the", "Paris", "paris", "Berlin", "and", "Of", "Tokyo", "go", "NEW"]), max_size=10))
def test_keywords_unique_and_stopword_free(words):
    res = kw.default_resources("en")
    out = kw.extract_keywords(" ".join(words), "en", res)
    keys = [k.text.casefold() for k in out]
    assert len(keys) == len(set(keys))
    for k in out:
        assert not all(w.lower() in res.stopwords for w in k.text.split())


def test_tokenize_strips_punctuation():
    assert kw.tokenize("“Hello,” (world)! ₹450") == ["Hello", "world", "450"]
