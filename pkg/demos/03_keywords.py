"""Keyword extraction: Viterbi over a label lattice, and ripple-down rules for Hindi.

Run from the repository root: python3 demos/03_keywords.py
"""

import numpy as np

from screentags import keywords

# A two-label lattice decoded by dynamic programming.
labels = ("O", "B-KEY")
s = keywords.LatticeScores(np.array([[1.0, 0.2], [0.1, 2.0], [0.5, 0.4]]), np.array([[0.3, 0.0], [0.0, -1.0]]))
path, score = keywords.viterbi_decode(s)
print("best path:", [labels[k] for k in path], f"score {score:.2f}")

# Latin-script languages use capitalization-driven emissions with the same decoder.
for lang, text in (("en", "Your order: Pizza from Luigi will arrive"), ("de", "Treffen wir uns morgen in Berlin?")):
    res = keywords.default_resources(lang)
    print(lang, [k.text for k in keywords.extract_keywords(text, lang, res)])

# Hindi goes through a part-of-speech rule tree; nouns become keywords.
res = keywords.default_resources("hi")
tokens = keywords.tokenize("दिल्ली के लिए उड़ान टिकट")
print("hi tags:", list(zip(tokens, keywords.scrdr_tag(tokens, res.rules, res.lexicon))))
print("hi keywords:", [k.text for k in keywords.extract_keywords("दिल्ली के लिए उड़ान टिकट", "hi", res)])
