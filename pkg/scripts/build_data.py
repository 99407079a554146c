"""Regenerate the bundled text resources from upstream wheels.

Corpora are the human translations shipped in the gettext catalogs of Django,
Wagtail, django CMS (BSD-3-Clause), Sphinx (BSD-2-Clause) and django-allauth
(MIT); English uses the catalogs' source strings.
Stopword lists come from spaCy (MIT).

    pip download --no-deps -d wheels django==5.0 wagtail==8.0 django-cms==5.1.3 \
        sphinx==8.1.3 django-allauth==65.19.7 spacy==3.8.16
    python scripts/build_data.py wheels
"""

import hashlib
import html
import re
import sys
import zipfile
from pathlib import Path

LANGS = ("en", "es", "it", "fr", "de")
STOP_LANGS = ("en", "es", "it", "fr", "de", "hi")
DATA = Path(__file__).resolve().parents[1] / "src" / "screentags" / "data"
HELDOUT_FRACTION = 0.2
MIN_HELDOUT_CHARS = 40

PLACEHOLDER = re.compile(
    r"%\([^)]*\)[-#0 +]*\d*(?:\.\d+)?[sdifr]|%[sdifr]|\{\{.*?\}\}|\{[^}]*\}|<[^>]+>|https?://\S+|&[a-z]+;"
)


def po_entries(text):
    """Yield (msgid, msgstr) pairs, skipping fuzzy and plural-form extras."""
    for chunk in re.split(r"\n\s*\n", text):
        if "#, fuzzy" in chunk:
            continue
        fields = {}
        key = None
        for line in chunk.splitlines():
            m = re.match(r'(msgid|msgid_plural|msgstr|msgstr\[0\]|msgctxt)\s+"(.*)"\s*$', line)
            if m:
                key = m.group(1)
                fields[key] = m.group(2)
            elif line.startswith('"') and key:
                fields[key] += line.strip()[1:-1]
            elif line.startswith("msgstr["):
                key = None
        msgid = fields.get("msgid", "")
        msgstr = fields.get("msgstr", fields.get("msgstr[0]", ""))
        if msgid:
            yield unescape(msgid), unescape(msgstr)


def unescape(s):
    return s.replace('\\"', '"').replace("\\n", " ").replace("\\t", " ").replace("\\\\", "\\")


def clean(s):
    s = PLACEHOLDER.sub(" ", html.unescape(s))
    s = re.sub(r"\s+", " ", s).strip()
    words = re.findall(r"[^\W\d_]{2,}", s)
    return s if len(words) >= 3 else None


def collect(wheels):
    out = {lang: [] for lang in LANGS}
    for whl in wheels:
        z = zipfile.ZipFile(whl)
        for name in sorted(z.namelist()):
            m = re.search(r"/locale/([a-z]{2})(?:_[A-Z]{2})?/LC_MESSAGES/[^/]+\.po$", name)
            if not m or m.group(1) not in LANGS:
                continue
            lang = m.group(1)
            for msgid, msgstr in po_entries(z.read(name).decode("utf-8", "replace")):
                if lang == "de":
                    # source strings are English; take them once, from one catalog family
                    out["en"].append(msgid)
                if lang != "en" and msgstr and msgstr != msgid:
                    out[lang].append(msgstr)
    return out


def split(sentences):
    seen = set()
    train, heldout = [], []
    for s in sentences:
        s = clean(s)
        if s is None or s.lower() in seen:
            continue
        seen.add(s.lower())
        h = int(hashlib.sha1(s.encode()).hexdigest()[:8], 16) / 0xFFFFFFFF
        if len(s) >= MIN_HELDOUT_CHARS and h < HELDOUT_FRACTION:
            heldout.append(s)
        else:
            train.append(s)
    return train, heldout


def write_stopwords(spacy_wheel):
    z = zipfile.ZipFile(spacy_wheel)
    for lang in STOP_LANGS:
        ns = {}
        exec(z.read(f"spacy/lang/{lang}/stop_words.py").decode(), ns)
        words = sorted(w for w in ns["STOP_WORDS"] if "'" not in w and "’" not in w)
        (DATA / "stopwords" / f"{lang}.txt").write_text("\n".join(words) + "\n", encoding="utf-8")


def main(wheel_dir):
    wheel_dir = Path(wheel_dir)
    po_wheels = sorted(p for p in wheel_dir.glob("*.whl") if p.name.lower().startswith(("django", "wagtail", "sphinx")))
    for lang, sentences in collect(po_wheels).items():
        train, heldout = split(sentences)
        (DATA / "corpora" / f"{lang}.train.txt").write_text("\n".join(train) + "\n", encoding="utf-8")
        (DATA / "corpora" / f"{lang}.test.txt").write_text("\n".join(heldout) + "\n", encoding="utf-8")
        size = sum(len(s.encode()) + 1 for s in train)
        print(f"{lang}: train {len(train)} sentences / {size} bytes, held-out {len(heldout)}")
    spacy = next(wheel_dir.glob("spacy-*.whl"), None)
    if spacy is not None:
        write_stopwords(spacy)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "wheels")
