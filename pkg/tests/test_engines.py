import logging

import numpy as np
import pytest
from hypothesis import given, strategies as st

from screentags.engines import (
    ExternalOcrEngine,
    FixtureOcrEngine,
    FixtureSceneClassifier,
    OcrBlock,
    OcrDocument,
    OcrElement,
    OcrLine,
    SceneLabel,
    classify_scene,
    flatten_text,
    make_engine,
    parse_ocr_text,
    recognize,
)
from screentags.errors import EngineError, InvalidInputError
from screentags.imgproc import RasterImage
from screentags.textregion import TextBox


@pytest.fixture
def shot(tmp_path):
    def make(ocr=None, scene=None, size=(60, 200)):
        path = tmp_path / "shot.png"
        if ocr is not None:
            (tmp_path / "shot.ocr.txt").write_text(ocr, encoding="utf-8")
        if scene is not None:
            (tmp_path / "shot.scene.tsv").write_text(scene, encoding="utf-8")
        return RasterImage(np.full(size, 255, dtype=np.uint8), source=str(path))

    return make


def test_fixture_echo(shot):
    doc = recognize(FixtureOcrEngine(), shot("Pay ₹450 to Ravi\n"))
    assert doc.full_text == "Pay ₹450 to Ravi"


def test_empty_sidecar(shot):
    doc = recognize(FixtureOcrEngine(), shot(""))
    assert doc.blocks == () and doc.full_text == ""


def test_two_paragraphs(shot):
    doc = recognize(FixtureOcrEngine(), shot("a b\nc\n\nd\ne f\n"))
    assert len(doc.blocks) == 2
    assert sum(len(b.lines) for b in doc.blocks) == 4
    assert doc.full_text == "a b\nc\n\nd\ne f"


def test_boxes_nested_and_in_bounds(shot):
    img = shot("alpha beta gamma\ndelta\n\nepsilon zeta\n", size=(90, 300))
    doc = recognize(FixtureOcrEngine(), img)
    for block in doc.blocks:
        assert block.box.within(300, 90)
        for line in block.lines:
            assert block.box.contains(line.box)
            for e in line.elements:
                assert line.box.contains(e.box)


def test_confidence_suffix(shot):
    doc = recognize(FixtureOcrEngine(), shot("hello world\t0.75\n"))
    assert doc.full_text == "hello world"
    assert doc.mean_confidence == pytest.approx(0.75)


def test_small_glyph_warning(shot, caplog):
    with caplog.at_level(logging.WARNING):
        recognize(FixtureOcrEngine(), shot("one\ntwo\nthree\nfour\nfive\n", size=(40, 100)))
    assert "16px" in caplog.text


def test_region_out_of_bounds(shot):
    with pytest.raises(InvalidInputError):
        recognize(FixtureOcrEngine(), shot(""), [TextBox(190, 0, 20, 10)])


def test_engine_unavailable(shot):
    with pytest.raises(EngineError) as err:
        recognize(ExternalOcrEngine("ext", "/nonexistent/ocr {image}"), shot())
    assert err.value.engine_id == "ext"
    with pytest.raises(EngineError):
        recognize(None, shot())


def test_external_engine_parses_stdout(shot):
    doc = recognize(make_engine("ext", "external: echo Bonjour Paris"), shot())
    assert doc.full_text == "Bonjour Paris"


def test_make_engine_kinds():
    assert isinstance(make_engine("x", "fixture"), FixtureOcrEngine)
    with pytest.raises(EngineError):
        make_engine("x", "bogus")
    with pytest.raises(EngineError):
        make_engine("x", "external:")


def test_flatten_examples():
    box = TextBox(0, 0, 1, 1)
    one = OcrBlock((OcrLine((OcrElement("hi", box),), box),), box)
    assert flatten_text(OcrDocument.from_blocks([one])) == "hi"
    assert flatten_text(OcrDocument.from_blocks([])) == ""
    a = OcrBlock((OcrLine((OcrElement("a", box),), box),), box)
    b = OcrBlock((OcrLine((OcrElement("b", box),), box),), box)
    assert flatten_text(OcrDocument.from_blocks([a, b])) == "a\n\nb"


def test_element_validation():
    with pytest.raises(InvalidInputError):
        OcrElement("", TextBox(0, 0, 1, 1))
    with pytest.raises(InvalidInputError):
        OcrElement("x", TextBox(0, 0, 1, 1), 1.5)


word = st.text(alphabet="abcdefghijklmnopqrstuvwxyzÄé0123456789.,", min_size=1, max_size=8)
line = st.lists(word, min_size=1, max_size=5).map(" ".join)
block = st.lists(line, min_size=1, max_size=3).map("\n".join)


@given(st.lists(block, max_size=4).map("\n\n".join), st.integers(1, 400), st.integers(1, 400))
def test_parse_flatten_roundtrip(text, w, h):
    doc = parse_ocr_text(text, w, h)
    assert doc.full_text == text
    assert flatten_text(doc) == text
    for b in doc.blocks:
        assert b.box.within(w, h)


def test_scene_top_k(shot):
    img = shot(scene="text\t0.6\nscreenshot\t0.8\n")
    assert classify_scene(FixtureSceneClassifier(), img, 1) == [SceneLabel("screenshot", 0.8)]
    assert [s.label for s in classify_scene(FixtureSceneClassifier(), img, 5)] == ["screenshot", "text"]


def test_scene_empty(shot):
    assert classify_scene(FixtureSceneClassifier(), shot(scene="")) == []


def test_scene_errors(shot):
    with pytest.raises(InvalidInputError):
        classify_scene(FixtureSceneClassifier(), shot(scene=""), 0)
    with pytest.raises(EngineError):
        classify_scene(None, shot(scene=""))


@given(
    st.lists(st.tuples(st.text(alphabet="abcxyz", min_size=1, max_size=5), st.floats(0, 1)), max_size=8),
    st.integers(1, 10),
)
def test_scene_sorted_truncated(rows, k):
    class Stub:
        def classify(self, img):
            return [SceneLabel(l, p) for l, p in rows]

    out = classify_scene(Stub(), None, k)
    assert len(out) == min(k, len(rows))
    assert [s.prob for s in out] == sorted((s.prob for s in out), reverse=True)
