import math
import random
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from screentags import langdetect as ld
from screentags.errors import ConfigError, FormatError, InvalidInputError, NoSignalError


@pytest.fixture(scope="module")
def ab_model():
    return ld.build_clm(["ab"], "xx", max_n=3, alpha=0.1)


def test_whether_bigrams():
    assert ld.word_ngrams("whether", 2) == ["_w", "wh", "he", "et", "th", "he", "er", "r_"]


def test_whether_trigrams_sliding_window():
    assert ld.word_ngrams("whether", 3) == ["_wh", "whe", "het", "eth", "the", "her", "er_"]


def test_single_char_trigram():
    assert ld.word_ngrams("a", 3) == ["_a_"]


@pytest.mark.parametrize("word,n", [("", 2), ("a b", 2), ("ab", 0)])
def test_word_ngrams_errors(word, n):
    with pytest.raises(InvalidInputError):
        ld.word_ngrams(word, n)


def test_hand_counted_bigram():
    m = ld.build_clm(["ab ab"], "xx", max_n=2, alpha=0.1)
    assert m.alphabet == "_ab"
    expected = (2 + 0.1) / (2 + 0.1 * 3)
    assert expected == pytest.approx(0.913, abs=5e-4)
    assert 10 ** m.logprob("a", "b") == pytest.approx(expected, rel=1e-9)


def test_unseen_context_uniform(ab_model):
    assert ab_model.logprob("bb", "a") == pytest.approx(-math.log10(len(ab_model.alphabet)), abs=1e-9)
    assert ab_model.logprob("a", "z") == ab_model.uniform_logprob


def test_rows_normalized():
    m = ld.build_clm(ld.bundled_corpus("en")[:300], "en")
    for table in m.tables:
        for row in table.values():
            assert math.fsum(10.0 ** row) == pytest.approx(1.0, abs=1e-9)


def test_chain_prefers_seen_order(ab_model):
    assert ld.word_logprob("ab", ab_model) > ld.word_logprob("ba", ab_model)


def test_chain_terms_by_hand(ab_model):
    # "_ab_": P(_) P(a|_) P(b|_a) P(_|ab), alphabet {_, a, b}
    def p(count, total):
        return math.log10((count + 0.1) / (total + 0.3))

    unigram_total = 4  # _, a, b, _
    expected = p(2, unigram_total) + p(1, 1) + p(1, 1) + p(1, 1)
    assert ld.word_logprob("ab", ab_model) == pytest.approx(expected, abs=1e-9)


def test_identical_corpora_identical_scores():
    corpus = ld.bundled_corpus("fr")[:100]
    a, b = ld.build_clm(corpus, "fr"), ld.build_clm(list(corpus), "fr")
    for w in ("bonjour", "maison", "xyz"):
        assert ld.word_logprob(w, a) == ld.word_logprob(w, b)


def test_corpus_order_irrelevant():
    corpus = ld.bundled_corpus("it")[:200]
    shuffled = corpus[:]
    random.Random(1).shuffle(shuffled)
    a, b = ld.build_clm(corpus, "it"), ld.build_clm(shuffled, "it")
    assert a.alphabet == b.alphabet
    for ta, tb in zip(a.tables, b.tables):
        assert ta.keys() == tb.keys()
        assert all(np.array_equal(ta[k], tb[k]) for k in ta)


def test_build_errors():
    with pytest.raises(InvalidInputError):
        ld.build_clm(["123 ..."], "xx")
    with pytest.raises(InvalidInputError):
        ld.build_clm(["ab"], "xx", alpha=0)


words = st.text(alphabet="abcdefghijklmnopqrstuvwxyzéñ", min_size=1, max_size=12)


@settings(max_examples=60)
@given(words)
def test_word_logprob_nonpositive(w):
    m = _en()
    assert ld.word_logprob(w, m) <= 0


@settings(max_examples=60)
@given(words)
def test_chain_prefix_monotone(w):
    terms = _en().char_logprobs(w)
    prefix = np.cumsum(terms)
    assert all(b <= a for a, b in zip(prefix, prefix[1:]))


@settings(max_examples=60)
@given(st.lists(words, max_size=6), st.lists(words, max_size=6))
def test_text_additivity_exact(xs, ys):
    m = _en()
    x, y = " ".join(xs), " ".join(ys)
    assert ld.text_logprob(x + " " + y, m).log_prob == ld.text_logprob(x, m).log_prob + ld.text_logprob(y, m).log_prob


def test_text_examples(ab_model):
    assert ld.text_logprob("ab ab", ab_model).log_prob == 2 * ld.word_logprob("ab", ab_model)
    empty = ld.text_logprob("", ab_model)
    assert empty.no_signal and empty.log_prob == 0


_EN = []


def _en():
    if not _EN:
        _EN.append(ld.load_clm(ld.bundled_models_dir() / "en.clm"))
    return _EN[0]


def test_detect_english(bundled_models):
    sentence = ld.bundled_corpus("en", "test")[0]
    assert ld.detect_language(sentence, bundled_models).language == "en"


def test_detect_single_model(bundled_models):
    de = [m for m in bundled_models if m.language == "de"]
    assert ld.detect_language("the quick brown fox", de).language == "de"


def test_detect_tie_breaks_on_code():
    m = ld.build_clm(["abc"], "zz")
    twin = ld.build_clm(["abc"], "aa")
    r = ld.detect_language("cab", [m, twin])
    assert r.language == "aa"
    assert r.per_language_scores["aa"] == r.per_language_scores["zz"]


def test_detect_errors(bundled_models):
    with pytest.raises(ConfigError):
        ld.detect_language("hello", [])
    with pytest.raises(NoSignalError):
        ld.detect_language("123 !!", bundled_models)


class Shifted(ld.CharLanguageModel):
    shift = 0.0

    def logprob(self, context, ch):
        return super().logprob(context, ch) - self.shift


def test_common_per_char_shift_keeps_argmax(bundled_models):
    shifted = []
    for m in bundled_models:
        s = Shifted(m.language, m.max_n, m.alphabet, m.tables, m.alpha)
        s.shift = 0.37
        shifted.append(s)
    for lang in ld.BUNDLED_LANGUAGES:
        for sentence in ld.bundled_corpus(lang, "test")[:20]:
            assert ld.detect_language(sentence, shifted).language == ld.detect_language(sentence, bundled_models).language


def test_serialize_roundtrip_tolerance():
    m = ld.build_clm(ld.bundled_corpus("es"), "es")
    back = ld.deserialize_clm(ld.serialize_clm(m))
    assert (back.language, back.alphabet, back.max_n) == (m.language, m.alphabet, m.max_n)
    for w in ("estación", "hola", "qwz", "mañana"):
        a, b = m.char_logprobs(w), back.char_logprobs(w)
        assert max(abs(x - y) for x, y in zip(a, b)) <= 0.02


def test_serialized_size_budget(bundled_models):
    for m in bundled_models:
        assert m.max_n == 3 and len(m.alphabet) <= 40
        assert len(ld.serialize_clm(m)) <= 40 * 1024


def test_bad_magic():
    data = bytearray(ld.serialize_clm(ld.build_clm(["abc"], "xx")))
    data[0] ^= 0xFF
    with pytest.raises(FormatError) as err:
        ld.deserialize_clm(bytes(data))
    assert err.value.offset == 0


def test_bad_version():
    data = bytearray(ld.serialize_clm(ld.build_clm(["abc"], "xx")))
    data[4] = 9
    with pytest.raises(FormatError, match="version 9"):
        ld.deserialize_clm(bytes(data))


@pytest.mark.parametrize("cut", [3, 6, 12, 40, -1])
def test_truncated(cut):
    data = ld.serialize_clm(ld.build_clm(["abc abd"], "xx"))
    with pytest.raises(FormatError):
        ld.deserialize_clm(data[:cut])


@settings(max_examples=50)
@given(st.integers(5, 200), st.integers(0, 255))
def test_corrupted_byte_never_crashes(pos, value):
    data = bytearray(ld.serialize_clm(ld.build_clm(["abc abd bcd"], "xx")))
    pos %= len(data)
    if data[pos] == value:
        return
    data[pos] = value
    with pytest.raises(FormatError):
        ld.deserialize_clm(bytes(data))


def test_load_models_errors(tmp_path):
    with pytest.raises(ConfigError):
        ld.load_models(tmp_path / "missing")
    with pytest.raises(ConfigError):
        ld.load_models(tmp_path)


def test_confusion_table_format(bundled_models):
    labelled = [(lang, s) for lang in ld.BUNDLED_LANGUAGES for s in ld.bundled_corpus(lang, "test")[:5]]
    codes, matrix = ld.confusion_matrix(bundled_models, labelled)
    table = ld.format_confusion_table(codes, matrix)
    assert table.splitlines()[0].split() == codes + ["Accuracy"]
    assert matrix.sum() == len(labelled)
