"""Rebuild the bundled trigram CLMs from the bundled training corpora."""

from screentags import langdetect

for lang in langdetect.BUNDLED_LANGUAGES:
    m = langdetect.build_clm(langdetect.bundled_corpus(lang, "train"), lang)
    path = langdetect.bundled_models_dir() / f"{lang}.clm"
    langdetect.save_clm(m, path)
    print(f"{lang}: alphabet {len(m.alphabet)}, contexts {m.n_contexts()}, {path.stat().st_size} bytes")
