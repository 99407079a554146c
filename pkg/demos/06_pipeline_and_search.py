"""Tag a folder of screenshots, build the index, search it, and score coverage.

Run from the repository root: python3 demos/06_pipeline_and_search.py
"""

from pathlib import Path

from screentags import pipeline
from screentags.index import TagIndex, evaluate_coverage, format_coverage_table, generated_tags, read_ground_truth

DATA = Path(__file__).resolve().parents[1] / "tests" / "data"

# Fixture engines read OCR and scene sidecars next to each image.
cfg = pipeline.load_config(DATA / "pipeline.ini")

report = pipeline.run_pipeline(DATA / "screens" / "01_flight.png", cfg)
print(f"{report.image_id}: script {report.script}, language {report.language}")
for t in report.tags:
    print(f"  {t.name:<10} {t.score:.3f}  from {', '.join(s for s, _ in t.contributions)}")
for st in report.stages:
    print(f"  stage {st.stage:<10} {st.status}")

idx = TagIndex()
summary = pipeline.batch_run(DATA / "screens", cfg, index=idx)
print(f"batch: {summary.ok} ok, {summary.failed} failed, p50 {summary.timing_ms['p50']:.0f} ms/image")

for query in ("tokyo", "travel", "italy"):
    print(f"search {query!r}:", idx.search(query, k=3))

counts = evaluate_coverage(generated_tags(idx), read_ground_truth(DATA / "ground_truth.tsv"))[1]
print(format_coverage_table(counts))
