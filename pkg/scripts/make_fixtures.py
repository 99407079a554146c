"""Regenerate tests/data: synthetic screenshots with OCR/scene sidecars, a toy
knowledge graph plus its trained model, ground truth, and the coverage
mini-dataset."""

from pathlib import Path

from PIL import Image, ImageDraw, ImageFont

from screentags import kgrelated

ROOT = Path(__file__).resolve().parents[1] / "tests" / "data"

# stem -> (drawn text, OCR sidecar, scene sidecar rows)
SCREENS = {
    "01_flight": ("Flight to Tokyo 9am", "Flight to Tokyo 9am\n", [("document", 0.7)]),
    "02_pizza": (
        "Your order: Pizza from Luigi\nwill arrive in 30 minutes",
        "Your order: Pizza from Luigi\nwill arrive in 30 minutes\n",
        [("food", 0.9), ("menu", 0.4)],
    ),
    "03_receipt": ("RECEIPT\nTotal 42.50\nthank you", "Receipt\ntotal 42.50\nthank you\n", [("receipt", 0.8)]),
    "04_chat_de": ("Treffen wir uns morgen in Berlin?", "Treffen wir uns morgen in Berlin?\n", [("chat", 0.6)]),
    "05_booking_es": ("Reserva confirmada en Madrid", "Reserva confirmada en Madrid\n", [("ticket", 0.5)]),
    "06_welcome_fr": ("Bienvenue a Paris", "Bienvenue à Paris\n", [("travel", 0.6)]),
    "07_welcome_it": ("Benvenuti a Roma", "Benvenuti a Roma\n", [("travel", 0.55)]),
    "08_ticket_hi": ("Dilli ke liye udaan tikat", "दिल्ली के लिए उड़ान टिकट\n", [("ticket", 0.7)]),
    "09_code": ("def main():\n    return 0", "def main():\n    return 0\n", [("code", 0.8), ("screen", 0.3)]),
    "10_photo": ("", "", [("landscape", 0.9), ("sky", 0.6)]),
}

TOY_KG = [
    ("tokyo", "capital_of", "japan"),
    ("japan", "located_in", "asia"),
    ("pizza", "originates_from", "italy"),
    ("pizza", "is_a", "food"),
    ("roma", "capital_of", "italy"),
    ("berlin", "capital_of", "germany"),
    ("madrid", "capital_of", "spain"),
    ("paris", "capital_of", "france"),
    ("दिल्ली", "capital_of", "india"),
    ("receipt", "used_for", "shopping"),
    ("flight", "part_of", "travel"),
    ("landscape", "shows", "nature"),
]

GROUND_TRUTH = {
    "01_flight": "tokyo,document,japan,flight",
    "02_pizza": "pizza,food,italy,delivery,restaurant",
    "03_receipt": "receipt,shopping,invoice,payment",
    "04_chat_de": "berlin,chat,germany,message",
    "05_booking_es": "madrid,ticket,spain,hotel,booking",
    "06_welcome_fr": "paris,travel,france",
    "07_welcome_it": "roma,travel,italy,vacation",
    "08_ticket_hi": "दिल्ली,ticket,india",
    "09_code": "python,programming,terminal,code,editor",
    "10_photo": "landscape,sky,nature,mountain",
}

# coverage mini-dataset: generated vs truth, coverage noted per row
COVERAGE = [
    ("c01", "a,b,c", "a,b,c"),  # 100
    ("c02", "a,b,c,d", "a,b,c,d,e"),  # 80
    ("c03", "a,b,c", "a,b,c,d"),  # 75
    ("c04", "a", "a,b"),  # 50
    ("c05", "a,x", "a,b,c"),  # 33.3
    ("c06", "a,x,y", "a,b,c,d"),  # 25
    ("c07", "x,y", "a,b"),  # 0
    ("c08", "A , b", "a,b,c"),  # 66.7 after normalization
    ("c09", "a", "a,b,c,d,e"),  # 20
    ("c10", "a,b,c,d,e,f,g,h,i,j", "a,b,c,d,e,f,g,h,i,j,k,l,m"),  # 76.9
]


def draw_screen(text, path, size=(480, 200), header=True):
    img = Image.new("RGB", size, (245, 246, 250))
    d = ImageDraw.Draw(img)
    if header:
        d.rectangle([0, 0, size[0], 28], fill=(60, 90, 160))
    font = ImageFont.load_default(size=24)
    y = 48
    for line in text.splitlines():
        d.text((20, y), line, fill=(20, 20, 20), font=font)
        y += 36
    img.save(path)


def main():
    screens = ROOT / "screens"
    screens.mkdir(parents=True, exist_ok=True)
    for stem, (drawn, ocr, scene) in SCREENS.items():
        draw_screen(drawn, screens / f"{stem}.png")
        (screens / f"{stem}.ocr.txt").write_text(ocr, encoding="utf-8")
        (screens / f"{stem}.scene.tsv").write_text("".join(f"{l}\t{p}\n" for l, p in scene), encoding="utf-8")

    misc = ROOT / "misc"
    misc.mkdir(exist_ok=True)
    draw_screen("", misc / "blank.png", header=False)
    (misc / "blank.ocr.txt").write_text("", encoding="utf-8")
    (misc / "blank.scene.tsv").write_text("", encoding="utf-8")

    kg = ROOT / "kg"
    kg.mkdir(exist_ok=True)
    (kg / "toy.tsv").write_text("".join(f"{h}\t{r}\t{t}\n" for h, r, t in TOY_KG), encoding="utf-8")
    g = kgrelated.load_and_collapse(kg / "toy.tsv")
    res = kgrelated.train(g, dim=20, n_filters=8, lr=0.5, epochs=300, seed=0, batch_size=4)
    res.model.save(kg / "toy.model")
    print(f"toy KG: {len(g.entities)} entities, final loss {res.losses[-1]:.4f}")

    (ROOT / "ground_truth.tsv").write_text("".join(f"{k}\t{v}\n" for k, v in GROUND_TRUTH.items()), encoding="utf-8")
    cov = ROOT / "coverage"
    cov.mkdir(exist_ok=True)
    (cov / "generated.tsv").write_text("".join(f"{i}\t{g}\n" for i, g, _ in COVERAGE), encoding="utf-8")
    (cov / "truth.tsv").write_text("".join(f"{i}\t{t}\n" for i, _, t in COVERAGE), encoding="utf-8")

    (ROOT / "pipeline.ini").write_text(
        "[engines]\nlatin = latin-ocr\nnonlatin = nonlatin-ocr\ndefault = latin-ocr\n"
        "latin-ocr = fixture\nnonlatin-ocr = fixture\nscene = fixture\n\n"
        "[kg]\nmodel = kg/toy.model\nk = 3\nmin_score = 0.9\n",
        encoding="utf-8",
    )


if __name__ == "__main__":
    main()
