"""Generates blocks.ttf, a tiny outline font used by the test suites.

Covers ASCII letters/digits, hiragana, katakana and the prolonged sound
mark. Every glyph is a square-advance frame with a code-point dependent
bar pattern, so rendered text has real anti-aliased edges.

    python3 make_test_font.py blocks.ttf
"""
import sys

from fontTools.fontBuilder import FontBuilder
from fontTools.pens.ttGlyphPen import TTGlyphPen

UPEM = 1000
ASCENT = 880
DESCENT = -120


def rect(pen, x0, y0, x1, y1, clockwise=True):
    pts = [(x0, y0), (x0, y1), (x1, y1), (x1, y0)]
    if not clockwise:
        pts.reverse()
    pen.moveTo(pts[0])
    for p in pts[1:]:
        pen.lineTo(p)
    pen.closePath()


def block_glyph(cp):
    pen = TTGlyphPen(None)
    rect(pen, 80, -40, 920, 800)
    rect(pen, 180, 60, 820, 700, clockwise=False)
    for bit in range(4):
        if cp >> bit & 1:
            y = 120 + bit * 140
            rect(pen, 260, y, 740, y + 70)
    return pen.glyph()


def empty_glyph():
    return TTGlyphPen(None).glyph()


def main(out):
    cps = list(range(0x30, 0x3A)) + list(range(0x41, 0x5B)) + list(range(0x61, 0x7B))
    cps += list(range(0x3041, 0x3097)) + list(range(0x30A1, 0x30FB)) + [0x30FC]
    names = [".notdef", "space"] + [f"uni{cp:04X}" for cp in cps]
    fb = FontBuilder(UPEM, isTTF=True)
    fb.setupGlyphOrder(names)
    cmap = {0x20: "space"}
    cmap.update({cp: f"uni{cp:04X}" for cp in cps})
    fb.setupCharacterMap(cmap)
    glyphs = {".notdef": block_glyph(0), "space": empty_glyph()}
    glyphs.update({f"uni{cp:04X}": block_glyph(cp) for cp in cps})
    fb.setupGlyf(glyphs)
    fb.setupHorizontalMetrics({n: (UPEM, 80 if n != "space" else 0) for n in names})
    fb.setupHorizontalHeader(ascent=ASCENT, descent=DESCENT)
    fb.setupNameTable({"familyName": "Blocks Test", "styleName": "Regular"})
    fb.setupOS2(sTypoAscender=ASCENT, sTypoDescender=DESCENT, usWinAscent=ASCENT,
                usWinDescent=-DESCENT)
    fb.setupPost()
    fb.save(out)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "blocks.ttf")
