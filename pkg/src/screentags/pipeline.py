"""End-to-end tagging: pre-process, localize, OCR, language, keywords, scene
labels, related-tag expansion, ranking and indexing."""

import configparser
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import engines, imgproc, keywords, langdetect, textregion
from .errors import ConfigError, EntityNotFound, InvalidInputError, NoSignalError, ScreentagsError
from .index import ImageRecord, TagIndex
from .kgrelated import TripletModel, related_tags
from .tagrank import TagCandidate, TagSource, rank_tags

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".ppm", ".pgm", ".pnm", ".jpg", ".jpeg")

# language assumed for non-Latin scripts, which have no bundled CLMs
SCRIPT_LANGUAGE = {
    textregion.ScriptLabel.DEVANAGARI: "hi",
    textregion.ScriptLabel.HANGUL: "ko",
    textregion.ScriptLabel.CHINESE: "zh",
    textregion.ScriptLabel.ARABIC: "ar",
    textregion.ScriptLabel.BENGALI: "bn",
    textregion.ScriptLabel.TELUGU: "te",
    textregion.ScriptLabel.TAMIL: "ta",
    textregion.ScriptLabel.GUJARATI: "gu",
    textregion.ScriptLabel.KANNADA: "kn",
    textregion.ScriptLabel.MALAYALAM: "ml",
}


@dataclass
class PipelineConfig:
    preprocess: imgproc.PreprocessParams = field(default_factory=imgproc.PreprocessParams)
    routing: textregion.EngineRouting = field(default_factory=textregion.EngineRouting)
    engines: Dict[str, str] = field(default_factory=lambda: {"latin-ocr": "fixture", "nonlatin-ocr": "fixture"})
    scene_classifier: Optional[str] = "fixture"
    scene_top_k: int = 5
    clm_dir: Optional[Path] = None  # None: bundled models
    keyword_resources: Dict[str, dict] = field(default_factory=dict)
    kg_model: Optional[Path] = None
    related_k: int = 5
    related_min_score: float = 0.5
    related_both_directions: bool = False
    index_path: Optional[Path] = None
    debug_dir: Optional[Path] = None

    def validate(self):
        if self.clm_dir is not None and not Path(self.clm_dir).is_dir():
            raise ConfigError(f"CLM directory not found: {self.clm_dir}")
        if self.kg_model is not None and not Path(self.kg_model).is_file():
            raise ConfigError(f"knowledge-graph model not found: {self.kg_model}")
        if not self.routing.default:
            raise ConfigError("[engines] needs a default engine")
        for eid in {self.routing.latin, self.routing.nonlatin, self.routing.default}:
            if eid not in self.engines:
                raise ConfigError(f"engine {eid!r} is routed to but not defined in [engines]")
        for lang, paths in self.keyword_resources.items():
            for key, p in paths.items():
                if not Path(p).is_file():
                    raise ConfigError(f"[keywords] {key}_{lang}: file not found: {p}")
        if self.scene_top_k < 1 or self.related_k < 0:
            raise ConfigError("scene_top_k must be >= 1 and related k >= 0")
        return self


def _coerce(value, current):
    if isinstance(current, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(current, int):
        return int(value)
    if isinstance(current, float):
        return float(value)
    return value


def load_config(path=None, overrides=None):
    """Read an INI-style config; unknown keys are configuration errors."""
    cfg = PipelineConfig()
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    if path is not None:
        if not Path(path).is_file():
            raise ConfigError(f"config file not found: {path}")
        parser.read(path, encoding="utf-8")
    base = Path(path).resolve().parent if path else Path.cwd()

    def resolve(p):
        p = Path(p).expanduser()
        return p if p.is_absolute() else base / p

    if parser.has_section("preprocess"):
        known = {f.name: f for f in fields(imgproc.PreprocessParams)}
        kw = {}
        for key, value in parser["preprocess"].items():
            if key not in known:
                raise ConfigError(f"[preprocess] unknown key {key!r}")
            kw[key] = _coerce(value, getattr(cfg.preprocess, key))
        try:
            cfg.preprocess = replace(cfg.preprocess, **kw)
        except InvalidInputError as exc:
            raise ConfigError(f"[preprocess] {exc}") from exc

    if parser.has_section("engines"):
        sec = dict(parser["engines"])
        routing = {k: sec.pop(k) for k in ("latin", "nonlatin", "default") if k in sec}
        cfg.routing = replace(cfg.routing, **routing)
        if "scene" in sec:
            value = sec.pop("scene").strip()
            cfg.scene_classifier = None if value.lower() in ("none", "off", "") else value
        if "scene_top_k" in sec:
            cfg.scene_top_k = int(sec.pop("scene_top_k"))
        cfg.engines = {**cfg.engines, **sec}

    if parser.has_section("langdetect"):
        sec = parser["langdetect"]
        if "models" in sec:
            cfg.clm_dir = resolve(sec["models"])

    if parser.has_section("keywords"):
        for key, value in parser["keywords"].items():
            kind, _, lang = key.partition("_")
            if kind not in ("rules", "lexicon", "stopwords") or not lang:
                raise ConfigError(f"[keywords] unknown key {key!r}")
            cfg.keyword_resources.setdefault(lang, {})[kind] = str(resolve(value))

    if parser.has_section("kg"):
        sec = parser["kg"]
        if sec.get("model"):
            cfg.kg_model = resolve(sec["model"])
        cfg.related_k = int(sec.get("k", cfg.related_k))
        cfg.related_min_score = float(sec.get("min_score", cfg.related_min_score))
        cfg.related_both_directions = _coerce(sec.get("both_directions", "false"), False)

    if parser.has_section("index") and parser["index"].get("path"):
        cfg.index_path = resolve(parser["index"]["path"])

    for key, value in (overrides or {}).items():
        if value is not None:
            setattr(cfg, key, value)
    return cfg


@dataclass
class StageOutcome:
    stage: str
    status: str  # ok | ran-empty | skipped | failed
    detail: str = ""
    ms: float = 0.0


@dataclass
class TagReport:
    image_id: str
    path: str
    script: str
    language: Optional[str]
    tags: list
    stages: List[StageOutcome]

    def to_json(self, timings=True):
        stages = []
        for s in self.stages:
            d = {"stage": s.stage, "status": s.status, "detail": s.detail}
            if timings:
                d["ms"] = round(s.ms, 3)
            stages.append(d)
        return {
            "image_id": self.image_id,
            "path": self.path,
            "script": self.script,
            "language": self.language,
            "tags": [
                {"name": t.name, "score": round(t.score, 6), "sources": sorted({s for s, _ in t.contributions})}
                for t in self.tags
            ],
            "stages": stages,
        }

    def to_jsonl(self, timings=True):
        return json.dumps(self.to_json(timings), ensure_ascii=False, sort_keys=True)


class Pipeline:
    """Resources loaded once per config and reused across images."""

    def __init__(self, cfg):
        self.cfg = cfg.validate()
        self.models = langdetect.load_models(cfg.clm_dir or langdetect.bundled_models_dir())
        self.engines = {eid: engines.make_engine(eid, spec) for eid, spec in cfg.engines.items()}
        self.scene = engines.FixtureSceneClassifier() if cfg.scene_classifier == "fixture" else None
        if cfg.scene_classifier not in (None, "fixture"):
            raise ConfigError(f"unknown scene classifier {cfg.scene_classifier!r}")
        self.kg = TripletModel.load(cfg.kg_model) if cfg.kg_model else None
        self._keyword_cache = {}

    def keyword_resources(self, lang):
        if lang not in self._keyword_cache:
            paths = self.cfg.keyword_resources.get(lang)
            if paths:
                stop = paths.get("stopwords")
                stopwords = (
                    frozenset(Path(stop).read_text(encoding="utf-8").split()) if stop else keywords.bundled_stopwords(lang)
                )
                if "rules" in paths and "lexicon" in paths:
                    res = keywords.KeywordResources(
                        stopwords=stopwords,
                        rules=keywords.load_rules(paths["rules"]),
                        lexicon=keywords.Lexicon.load(paths["lexicon"]),
                    )
                else:
                    res = keywords.KeywordResources(
                        stopwords=stopwords, lattice_provider=keywords.CapitalizationScorer(stopwords)
                    )
            else:
                res = keywords.default_resources(lang)
            self._keyword_cache[lang] = res
        return self._keyword_cache[lang]

    def run(self, image_path, index=None):
        cfg = self.cfg
        image_path = Path(image_path)
        stages = []

        def stage(name):
            return _Stage(name, stages)

        with stage("load") as st:
            img = imgproc.load_image(image_path)
            st.detail = f"{img.width}x{img.height}x{img.channels}"

        with stage("preprocess") as st:
            pre = imgproc.preprocess(img, cfg.preprocess)
            st.empty = not (pre.binary.data == 0).any()
            if cfg.debug_dir:
                out = Path(cfg.debug_dir)
                out.mkdir(parents=True, exist_ok=True)
                for name, im in (("gray", pre.gray), ("filtered", pre.filtered), ("binary", pre.binary)):
                    imgproc.save_pgm(im, out / f"{image_path.stem}.{name}.pgm")

        with stage("localize") as st:
            boxes = textregion.locate_text_lines(pre.binary)
            st.detail = f"{len(boxes)} text lines"
            st.empty = not boxes

        with stage("ocr") as st:
            engine_id = textregion.route_engine(textregion.ScriptLabel.LATIN, cfg.routing)
            doc = engines.recognize(self.engines[engine_id], pre.binary, [])
            script = textregion.identify_script(doc.full_text)
            routed = textregion.route_engine(script, cfg.routing)
            if routed != engine_id:
                doc = engines.recognize(self.engines[routed], pre.binary, [])
                script = textregion.identify_script(doc.full_text)
                engine_id = routed
            st.detail = f"engine={engine_id} script={script.value}"
            st.empty = not doc.full_text.strip()

        language = None
        with stage("langdetect") as st:
            if not doc.full_text.strip():
                st.empty = True
            elif script is textregion.ScriptLabel.LATIN:
                try:
                    language = langdetect.detect_language(doc.full_text, self.models).language
                except NoSignalError:
                    st.empty = True
            else:
                language = SCRIPT_LANGUAGE.get(script)
                st.detail = "from script"
            if language:
                st.detail = (st.detail + f" {language}").strip()

        candidates = []
        with stage("keywords") as st:
            if language is None:
                st.empty = True
            else:
                try:
                    res = self.keyword_resources(language)
                except ConfigError as exc:
                    st.skip(str(exc))
                else:
                    kws = keywords.extract_keywords(doc.full_text, language, res)
                    candidates += [TagCandidate(k.text, TagSource.OCR, k.confidence) for k in kws]
                    st.detail = f"{len(kws)} keywords"
                    st.empty = not kws

        with stage("scene") as st:
            if self.scene is None:
                st.skip("no scene classifier configured")
            else:
                labels = engines.classify_scene(self.scene, img, cfg.scene_top_k)
                candidates += [TagCandidate(s.label, TagSource.SCENE, s.prob) for s in labels]
                st.detail = f"{len(labels)} labels"
                st.empty = not labels

        with stage("related") as st:
            if self.kg is None:
                st.skip("no knowledge-graph model configured")
            else:
                added = 0
                for parent in list(candidates):
                    try:
                        rel = related_tags(self.kg, None, parent.name, cfg.related_k, cfg.related_both_directions)
                    except EntityNotFound:
                        continue
                    for name, score in rel:
                        if score >= cfg.related_min_score:
                            candidates.append(TagCandidate(name, TagSource.RELATED, score, parent))
                            added += 1
                st.detail = f"{added} related tags"
                st.empty = added == 0

        with stage("rank") as st:
            tags = rank_tags(candidates)
            st.empty = not tags

        with stage("index") as st:
            if index is None:
                st.skip("no index configured")
            else:
                index.index_image(ImageRecord(image_path.stem, str(image_path), tuple(tags)))
                st.empty = not tags

        return TagReport(image_path.stem, str(image_path), script.value, language, tags, stages)


class _Stage:
    def __init__(self, name, sink):
        self.name = name
        self.sink = sink
        self.detail = ""
        self.empty = False
        self.skipped = False

    def skip(self, why):
        self.skipped = True
        self.detail = why

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        ms = (time.perf_counter() - self.t0) * 1000.0
        if exc_type is not None:
            self.sink.append(StageOutcome(self.name, "failed", str(exc), ms))
            return False
        status = "skipped" if self.skipped else "ran-empty" if self.empty else "ok"
        self.sink.append(StageOutcome(self.name, status, self.detail, ms))
        return False


def run_pipeline(image_path, cfg, index=None):
    """Tag one image.  If ``index`` is None and the config names an index
    file, the image is added to that file."""
    pipe = Pipeline(cfg)
    own_index = index is None and cfg.index_path is not None
    if own_index:
        from .index import load_or_create

        index = load_or_create(cfg.index_path)
    report = pipe.run(image_path, index)
    if own_index:
        index.persist(cfg.index_path)
    return report


@dataclass
class BatchSummary:
    reports: List[TagReport]
    failures: Dict[str, str]
    timing_ms: Dict[str, float]

    @property
    def ok(self):
        return len(self.reports)

    @property
    def failed(self):
        return len(self.failures)

    @property
    def exit_code(self):
        if not self.failures:
            return 0
        return 3 if self.reports else 1


def list_images(directory):
    directory = Path(directory)
    if not directory.is_dir():
        raise InvalidInputError(f"not a directory: {directory}")
    images = sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not images:
        raise InvalidInputError(f"no images in {directory}")
    return images


def batch_run(directory, cfg, index=None, workers=1):
    """Tag every image in ``directory``; per-image failures are collected, not raised.

    Images may be processed concurrently, but index inserts happen afterwards
    in file-name order on the calling thread.
    """
    images = list_images(directory)
    pipe = Pipeline(cfg)
    own_index = index is None and cfg.index_path is not None
    if own_index:
        from .index import load_or_create

        index = load_or_create(cfg.index_path)

    def one(path):
        t0 = time.perf_counter()
        try:
            return path, pipe.run(path, None), None, (time.perf_counter() - t0) * 1000.0
        except ScreentagsError as exc:
            return path, None, f"{type(exc).__name__}: {exc}", (time.perf_counter() - t0) * 1000.0

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, images))
    else:
        results = [one(p) for p in images]

    reports, failures, times = [], {}, []
    for path, report, error, ms in results:
        times.append(ms)
        if error:
            failures[path.stem] = error
            continue
        if index is not None:
            index.index_image(ImageRecord(report.image_id, report.path, tuple(report.tags)))
            report.stages[-1] = StageOutcome("index", "ok" if report.tags else "ran-empty", "", report.stages[-1].ms)
        reports.append(report)
    if own_index:
        index.persist(cfg.index_path)
    t = np.array(times)
    timing = {"p50": float(np.percentile(t, 50)), "p90": float(np.percentile(t, 90)), "max": float(t.max()), "total": float(t.sum())}
    return BatchSummary(reports, failures, timing)
