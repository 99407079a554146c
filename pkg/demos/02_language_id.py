"""Character n-gram language identification: build, serialize, detect.

Run from the repository root: python3 demos/02_language_id.py
"""

from screentags import langdetect

# Train a trigram model per language from the bundled corpora.
models = [langdetect.build_clm(langdetect.bundled_corpus(lang), lang, max_n=3) for lang in langdetect.BUNDLED_LANGUAGES]
for m in models:
    blob = langdetect.serialize_clm(m)
    print(f"{m.language}: alphabet {len(m.alphabet)}, serialized {len(blob)} bytes")

# Every word is padded with boundary markers, so prefixes and suffixes matter.
print("trigrams of 'the':", langdetect.word_ngrams("the", 3))

for text in ("Flight to Tokyo 9am", "Reserva confirmada en Madrid", "Die Datei konnte nicht gespeichert werden"):
    r = langdetect.detect_language(text, models)
    ranked = sorted(r.per_language_scores.items(), key=lambda kv: -kv[1])
    print(f"{text!r} -> {r.language}   runner-up {ranked[1][0]} ({ranked[0][1] - ranked[1][1]:.1f} nats behind)")

# Accuracy on the held-out sentences.
held_out = [(lang, s) for lang in langdetect.BUNDLED_LANGUAGES for s in langdetect.bundled_corpus(lang, "test")]
codes, matrix = langdetect.confusion_matrix(models, held_out)
print(langdetect.format_confusion_table(codes, matrix))
