import shutil

import pytest

from screentags import pipeline
from screentags.errors import ConfigError, InvalidInputError
from screentags.index import TagIndex

STAGES = ["load", "preprocess", "localize", "ocr", "langdetect", "keywords", "scene", "related", "rank", "index"]


@pytest.fixture
def cfg(data_dir):
    return pipeline.load_config(data_dir / "pipeline.ini")


def test_flight_example(cfg, data_dir):
    idx = TagIndex()
    report = pipeline.run_pipeline(data_dir / "screens" / "01_flight.png", cfg, index=idx)
    tags = {t.name: t for t in report.tags}
    assert {"tokyo", "document", "japan"} <= set(tags)
    assert {s for s, _ in tags["japan"].contributions} == {"related"}
    assert report.language == "en" and report.script == "Latin"
    assert [s.stage for s in report.stages] == STAGES
    assert all(s.ms >= 0 for s in report.stages)
    assert idx.search("tokyo")[0][0] == "01_flight"


def test_empty_sidecars(cfg, data_dir):
    report = pipeline.run_pipeline(data_dir / "misc" / "blank.png", cfg, index=TagIndex())
    assert report.tags == []
    assert [s.status for s in report.stages[1:]] == ["ran-empty"] * (len(STAGES) - 1)


def test_missing_clm_dir(tmp_path, data_dir):
    ini = tmp_path / "bad.ini"
    ini.write_text("[langdetect]\nmodels = nowhere\n[index]\npath = out.json\n")
    cfg = pipeline.load_config(ini)
    with pytest.raises(ConfigError):
        pipeline.run_pipeline(data_dir / "screens" / "01_flight.png", cfg)
    assert not (tmp_path / "out.json").exists()


def test_config_errors(tmp_path):
    ini = tmp_path / "c.ini"
    for body in ("[preprocess]\nbogus = 1\n", "[preprocess]\ncanny_low = 300\n", "[keywords]\nfoo = x\n"):
        ini.write_text(body)
        with pytest.raises(ConfigError):
            pipeline.load_config(ini)
    with pytest.raises(ConfigError):
        pipeline.load_config(tmp_path / "missing.ini")
    ini.write_text("[engines]\nlatin = ghost\n")
    with pytest.raises(ConfigError):
        pipeline.load_config(ini).validate()


def test_config_values(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text(
        "[preprocess]\ntile_count = 2\nthreshold_bias = 0.2\n"
        "[engines]\nscene = none\n"
        "[kg]\nk = 7\nboth_directions = yes\n"
        "[index]\npath = idx.json\n"
    )
    cfg = pipeline.load_config(ini)
    assert cfg.preprocess.tile_count == 2 and cfg.preprocess.threshold_bias == 0.2
    assert cfg.scene_classifier is None
    assert cfg.related_k == 7 and cfg.related_both_directions
    assert cfg.index_path == tmp_path / "idx.json"


def test_optional_stages_skip(data_dir):
    cfg = pipeline.PipelineConfig(scene_classifier=None)
    report = pipeline.run_pipeline(data_dir / "screens" / "01_flight.png", cfg)
    status = {s.stage: s.status for s in report.stages}
    assert status["scene"] == status["related"] == status["index"] == "skipped"
    assert {"flight", "tokyo"} <= {t.name for t in report.tags}


def test_unreadable_image(cfg, tmp_path):
    bad = tmp_path / "x.png"
    bad.write_bytes(b"junk")
    with pytest.raises(InvalidInputError):
        pipeline.run_pipeline(bad, cfg)


def test_hindi_rerouted(cfg, data_dir):
    report = pipeline.run_pipeline(data_dir / "screens" / "08_ticket_hi.png", cfg)
    ocr = next(s for s in report.stages if s.stage == "ocr")
    assert "nonlatin-ocr" in ocr.detail
    assert report.language == "hi"
    assert "दिल्ली" in {t.name for t in report.tags}


def test_debug_artifacts(cfg, data_dir, tmp_path):
    cfg.debug_dir = tmp_path / "dbg"
    pipeline.run_pipeline(data_dir / "screens" / "01_flight.png", cfg)
    names = sorted(p.name for p in cfg.debug_dir.iterdir())
    assert names == ["01_flight.binary.pgm", "01_flight.filtered.pgm", "01_flight.gray.pgm"]


def test_batch_three_and_corrupt(cfg, data_dir, tmp_path):
    for stem in ("01_flight", "02_pizza", "03_receipt"):
        for f in (data_dir / "screens").glob(stem + ".*"):
            shutil.copy(f, tmp_path)
    ok = pipeline.batch_run(tmp_path, cfg)
    assert (ok.ok, ok.failed, ok.exit_code) == (3, 0, 0)
    (tmp_path / "02_pizza.png").write_bytes(b"corrupt")
    part = pipeline.batch_run(tmp_path, cfg)
    assert (part.ok, part.failed) == (2, 1) and part.exit_code != 0
    assert "02_pizza" in part.failures


def test_batch_deterministic(cfg, data_dir):
    runs = [pipeline.batch_run(data_dir / "screens", cfg, workers=w) for w in (1, 1, 2)]
    dumps = [[r.to_jsonl(timings=False) for r in run.reports] for run in runs]
    assert dumps[0] == dumps[1] == dumps[2]


def test_batch_empty_dir(cfg, tmp_path):
    with pytest.raises(InvalidInputError):
        pipeline.batch_run(tmp_path, cfg)
