"""Walk one synthetic screenshot through preprocessing and text-line localization.

Run from the repository root: python3 demos/01_preprocess_and_localize.py
"""

from pathlib import Path

import numpy as np

from screentags import imgproc, textregion

SCREEN = Path(__file__).resolve().parents[1] / "tests" / "data" / "screens" / "02_pizza.png"

# Load the PNG.  Alpha is dropped and the image becomes an 8-bit gray raster.
img = imgproc.load_image(SCREEN)
print(f"loaded {SCREEN.name}: {img.width}x{img.height}")

# Edge-preserving smoothing, then local adaptive thresholding.
pre = imgproc.preprocess(img)
ink = int((pre.binary.data == 0).sum())
print(f"binary image: {ink} ink pixels, values {sorted(np.unique(pre.binary.data).tolist())}")

# The tile count only changes how work is split, never the pixels.
for tiles in (1, 4):
    out = imgproc.binarize(pre.filtered, imgproc.PreprocessParams(tile_count=tiles)).data
    print(f"tile_count={tiles}: identical={np.array_equal(out, pre.binary.data)}")

# Connected components are grouped into horizontal text lines.
boxes = textregion.locate_text_lines(pre.binary)
for b in boxes:
    print(f"  line box x={b.x} y={b.y} w={b.width} h={b.height} ({b.component_count} components)")

# Script identification decides which OCR engine handles the text.
for text in ("Pizza from Luigi", "दिल्ली के लिए"):
    print(f"{text!r} -> {textregion.identify_script(text).value}")
