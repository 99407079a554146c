"""Command-line entry point: ``screentags <subcommand> ...``."""

import argparse
import json
import logging
import sys
from pathlib import Path


from . import index as idx_mod
from . import kgrelated, langdetect, numkernel, pipeline
from .errors import ConfigError, InvalidInputError, ScreentagsError

log = logging.getLogger("screentags")

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2, 3


def _config(args):
    overrides = {"debug_dir": Path(args.debug_artifacts) if args.debug_artifacts else None}
    if args.index:
        overrides["index_path"] = Path(args.index)
    return pipeline.load_config(args.config, overrides)


def _index_path(args, cfg=None):
    cfg = cfg or _config(args)
    if cfg.index_path is None:
        raise ConfigError("no index file: pass --index or set [index] path in the config")
    return cfg.index_path


def cmd_tag(args):
    cfg = _config(args)
    report = pipeline.run_pipeline(args.image, cfg)
    print(report.to_jsonl(timings=not args.no_timings))
    return EXIT_OK


def _print_batch(summary, args):
    for r in summary.reports:
        print(r.to_jsonl(timings=not args.no_timings))
    for image_id, err in sorted(summary.failures.items()):
        print(f"failed {image_id}: {err}", file=sys.stderr)
    t = summary.timing_ms
    print(
        f"{summary.ok} ok / {summary.failed} failed; ms per image p50={t['p50']:.1f} p90={t['p90']:.1f} max={t['max']:.1f}",
        file=sys.stderr,
    )
    return summary.exit_code


def cmd_batch(args):
    cfg = _config(args)
    return _print_batch(pipeline.batch_run(args.dir, cfg, workers=args.workers), args)


def cmd_index(args):
    cfg = _config(args)
    _index_path(args, cfg)
    summary = pipeline.batch_run(args.dir, cfg, workers=args.workers)
    print(f"indexed {summary.ok} images into {cfg.index_path}", file=sys.stderr)
    args.no_timings = True
    return _print_batch(summary, args) if args.verbose_reports else summary.exit_code


def cmd_search(args):
    index = idx_mod.TagIndex.load(_index_path(args))
    for image_id, score in index.search(args.query, args.k):
        print(f"{image_id}\t{score:.6f}")
    return EXIT_OK


def cmd_eval(args):
    index = idx_mod.TagIndex.load(_index_path(args))
    truth = idx_mod.read_ground_truth(args.ground_truth)
    per_image, counts = idx_mod.evaluate_coverage(idx_mod.generated_tags(index), truth)
    if args.per_image:
        for image_id, v in per_image.items():
            print(f"{image_id}\t{v.coverage:.2f}\t{v.verdict.value}")
        print()
    print(idx_mod.format_coverage_table(counts))
    return EXIT_OK


def cmd_build_clm(args):
    if args.bundled:
        out_dir = Path(args.out or langdetect.bundled_models_dir())
        out_dir.mkdir(parents=True, exist_ok=True)
        jobs = [(lang, langdetect.bundled_corpus(lang, "train"), out_dir / f"{lang}.clm") for lang in langdetect.BUNDLED_LANGUAGES]
    else:
        if not (args.corpus and args.lang and args.out):
            raise InvalidInputError("build-clm needs --corpus, --lang and --out (or --bundled)")
        src = Path(args.corpus)
        files = sorted(src.glob("*.txt")) if src.is_dir() else [src]
        if not files:
            raise InvalidInputError(f"no *.txt corpus files in {src}")
        corpus = [line for f in files for line in f.read_text(encoding="utf-8").splitlines()]
        jobs = [(args.lang, corpus, Path(args.out))]
    for lang, corpus, out in jobs:
        m = langdetect.build_clm(corpus, lang, max_n=args.max_n, alpha=args.alpha, max_alphabet=args.max_alphabet)
        langdetect.save_clm(m, out)
        print(f"{lang}\talphabet={len(m.alphabet)}\tcontexts={m.n_contexts()}\tbytes={out.stat().st_size}\t{out}")
    return EXIT_OK


def cmd_detect_lang(args):
    cfg = _config(args)
    models = langdetect.load_models(args.models or cfg.clm_dir or langdetect.bundled_models_dir())
    if args.held_out:
        labelled = [(m.language, s) for m in models for s in langdetect.bundled_corpus(m.language, "test")]
        codes, matrix = langdetect.confusion_matrix(models, labelled)
        print(langdetect.format_confusion_table(codes, matrix))
        return EXIT_OK
    if args.file:
        texts = Path(args.file).read_text(encoding="utf-8").splitlines()
    elif args.text or args.words:
        texts = [args.text or " ".join(args.words)]
    else:
        texts = sys.stdin.read().splitlines()
    for text in texts:
        if not text.strip():
            continue
        r = langdetect.detect_language(text, models)
        scores = {k: round(v, 4) for k, v in sorted(r.per_language_scores.items())}
        print(json.dumps({"text": text, "language": r.language, "log_prob": round(r.log_prob, 4), "scores": scores}, ensure_ascii=False))
    return EXIT_OK


def cmd_train_kg(args):
    g = kgrelated.load_and_collapse(args.triplets)
    res = kgrelated.train(g, dim=args.dim, n_filters=args.filters, lr=args.lr, epochs=args.epochs, seed=args.seed, batch_size=args.batch_size)
    res.model.save(args.out)
    for epoch in sorted({0, len(res.losses) - 1, *range(0, len(res.losses), max(1, len(res.losses) // 10))}):
        if 0 <= epoch < len(res.losses):
            print(f"epoch {epoch + 1:4d}  loss {res.losses[epoch]:.6f}")
    print(f"saved {len(g.entities)} entities, {len(g.triplets)} triplets -> {args.out}")
    return EXIT_OK


def _test_triplets(model, path):
    names = {n: i for i, n in enumerate(model.entity_names)}
    test = []
    for h, _rel, t in kgrelated.load_and_collapse(path).named_triplets():
        if h not in names or t not in names:
            log.warning("skipping test triplet with unknown entity: %s -> %s", h, t)
            continue
        test.append((names[h], 0, names[t]))
    return test


def cmd_eval_kg(args):
    if args.synthetic:
        g, _ = kgrelated.clustered_graph(seed=args.seed)
        train_g, test = kgrelated.split_graph(g, args.n_test, seed=args.seed)
        model = kgrelated.train(train_g, dim=args.dim, n_filters=args.filters, lr=args.lr, epochs=args.epochs, seed=args.seed).model
    else:
        if not (args.model and args.test):
            raise InvalidInputError("eval-kg needs --model and --test (or --synthetic)")
        model = kgrelated.TripletModel.load(args.model)
        test = _test_triplets(model, args.test)
    rep = kgrelated.link_prediction_eval(model, test)
    n = len(model.entity_names)
    print(f"{'protocol':<12}{rep.protocol}")
    print(f"{'ranks':<12}{rep.n_ranks}")
    print(f"{'mean rank':<12}{rep.mean_rank:.2f}  (random {(n + 1) / 2:.1f})")
    print(f"{'hits@10':<12}{rep.hits_at_10:.1f}%  (random {100.0 * min(10, n) / n:.1f}%)")
    return EXIT_OK


def cmd_related(args):
    cfg = _config(args)
    path = args.model or cfg.kg_model
    if path is None:
        raise ConfigError("no KG model: pass --model or set [kg] model in the config")
    model = kgrelated.TripletModel.load(path)
    entity = args.entity or args.entity_pos
    if not entity:
        raise InvalidInputError("related needs an entity name")
    for name, score in kgrelated.related_tags(model, None, entity, args.k, args.both_directions):
        print(f"{name}\t{score:.6f}")
    return EXIT_OK


def cmd_bench_kernel(args):
    rows = numkernel.bench_kernel(tuple(args.sizes), repeat=args.repeat, seed=args.seed)
    print(numkernel.format_bench_table(rows))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="screentags", description="Offline screenshot tagging engine")
    p.add_argument("--config", help="INI config file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--debug-artifacts", metavar="DIR", help="write intermediate images as PGM")
    p.add_argument("--index", metavar="FILE", help="index file (overrides [index] path)")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("tag", help="tag one image and print its report")
    s.add_argument("image")
    s.add_argument("--no-timings", action="store_true")
    s.set_defaults(func=cmd_tag)

    s = sub.add_parser("batch", help="tag every image in a directory")
    s.add_argument("dir")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--no-timings", action="store_true")
    s.set_defaults(func=cmd_batch)

    s = sub.add_parser("index", help="tag a directory and add it to the index")
    s.add_argument("--dir", required=True)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--verbose-reports", action="store_true", help="also print per-image reports")
    s.set_defaults(func=cmd_index)

    s = sub.add_parser("search", help="query the tag index")
    s.add_argument("query")
    s.add_argument("-k", type=int, default=10)
    s.set_defaults(func=cmd_search)

    s = sub.add_parser("eval", help="tag coverage against ground truth")
    s.add_argument("--ground-truth", required=True)
    s.add_argument("--per-image", action="store_true")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("build-clm", help="build a character n-gram language model")
    s.add_argument("--corpus", help="text file or directory of *.txt files, one sentence per line")
    s.add_argument("--lang")
    s.add_argument("--out")
    s.add_argument("--bundled", action="store_true", help="rebuild all bundled languages (--out is a directory)")
    s.add_argument("--max-n", type=int, default=3)
    s.add_argument("--alpha", type=float, default=0.1)
    s.add_argument("--max-alphabet", type=int, default=40)
    s.set_defaults(func=cmd_build_clm)

    s = sub.add_parser("detect-lang", help="detect the language of text")
    s.add_argument("words", nargs="*")
    s.add_argument("--text")
    s.add_argument("--file")
    s.add_argument("--models", help="directory of *.clm files")
    s.add_argument("--held-out", action="store_true", help="print the confusion matrix on the bundled held-out set")
    s.set_defaults(func=cmd_detect_lang)

    s = sub.add_parser("train-kg", help="train the related-tag scorer")
    s.add_argument("--seed", dest="sub_seed", type=int)
    s.add_argument("--triplets", "--graph", required=True, help="head<TAB>relation<TAB>tail file")
    s.add_argument("--out", required=True)
    s.add_argument("--dim", type=int, default=50)
    s.add_argument("--filters", type=int, default=32)
    s.add_argument("--lr", type=float, default=0.5)
    s.add_argument("--epochs", type=int, default=200)
    s.add_argument("--batch-size", type=int, default=16)
    s.set_defaults(func=cmd_train_kg)

    s = sub.add_parser("eval-kg", help="mean rank and hits@10")
    s.add_argument("--seed", dest="sub_seed", type=int)
    s.add_argument("--model")
    s.add_argument("--test")
    s.add_argument("--synthetic", action="store_true", help="generate, split, train and evaluate a clustered graph")
    s.add_argument("--n-test", type=int, default=20)
    s.add_argument("--dim", type=int, default=20)
    s.add_argument("--filters", type=int, default=8)
    s.add_argument("--lr", type=float, default=0.5)
    s.add_argument("--epochs", type=int, default=200)
    s.set_defaults(func=cmd_eval_kg)

    s = sub.add_parser("related", help="related tags for an entity")
    s.add_argument("entity_pos", nargs="?", metavar="ENTITY")
    s.add_argument("--entity")
    s.add_argument("--model")
    s.add_argument("-k", type=int, default=10)
    s.add_argument("--both-directions", action="store_true")
    s.set_defaults(func=cmd_related)

    s = sub.add_parser("bench-kernel", help="scalar vs SIMD dot product timings")
    s.add_argument("--seed", dest="sub_seed", type=int)
    s.add_argument("--sizes", type=int, nargs="+", default=[256, 4096, 65536])
    s.add_argument("--repeat", type=int, default=200)
    s.set_defaults(func=cmd_bench_kernel)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "sub_seed", None) is not None:
        args.seed = args.sub_seed
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ScreentagsError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
