"""Block-cell text rendering and its exact decoder.

Text is drawn onto a white raster as a grid of fixed-size cells inside a
solid ink frame.  Each cell encodes one character: the 15 bits of its code
point (so anything below U+8000) map to a 3x5 grid of 2x2-pixel ink blocks.
The decoder reads the frame to recover origin and scale, then samples block
centers, so the round trip survives integer upscaling, thresholding,
morphological closing with small kernels, the contour mask, and sharpening.

The pairing gives the pipeline a deterministic OCR adapter: a renderer and
a reader that are exact inverses, which lets end-to-end tests drive the
full imaging path losslessly.
"""

from __future__ import annotations

import numpy as np

SUB = 2  # ink block edge, px
GRID_W, GRID_H = 3, 5  # blocks per glyph
GLYPH_W, GLYPH_H = GRID_W * SUB, GRID_H * SUB
CELL_W, CELL_H = GLYPH_W + SUB, GLYPH_H + SUB  # one block of spacing
FRAME = SUB  # frame stripe thickness
PAD = SUB  # white padding inside the frame
MARGIN = SUB  # white margin outside the frame
MAX_CODEPOINT = (1 << (GRID_W * GRID_H)) - 1

INK = 0
BG = 255


class TextTooLarge(Exception):
    """Rendered document would exceed the maximum raster size."""


class UnsupportedGlyph(ValueError):
    """Character code point does not fit the 15-bit cell encoding."""


class GlyphDecodeError(Exception):
    """Raster does not carry a readable cell grid."""


def render_text(text: str, max_width: int = 4096, max_height: int = 8192) -> np.ndarray:
    """Draw text line by line into a cell grid, one glyph per cell."""
    lines = text.split("\n")
    cols = max(1, max(len(line) for line in lines))
    rows = len(lines)
    width = 2 * (MARGIN + FRAME + PAD) + cols * CELL_W
    height = 2 * (MARGIN + FRAME + PAD) + rows * CELL_H
    if width > max_width or height > max_height:
        raise TextTooLarge(f"raster {width}x{height} exceeds limit {max_width}x{max_height}")
    px = np.full((height, width), BG, dtype=np.uint8)
    f0 = MARGIN
    f1h = height - MARGIN
    f1w = width - MARGIN
    px[f0 : f0 + FRAME, f0:f1w] = INK  # top stripe
    px[f1h - FRAME : f1h, f0:f1w] = INK  # bottom stripe
    px[f0:f1h, f0 : f0 + FRAME] = INK  # left stripe
    px[f0:f1h, f1w - FRAME : f1w] = INK  # right stripe
    oy = MARGIN + FRAME + PAD
    ox = MARGIN + FRAME + PAD
    for row, line in enumerate(lines):
        for col, ch in enumerate(line):
            code = ord(ch)
            if not 0 < code <= MAX_CODEPOINT:
                raise UnsupportedGlyph(f"cannot render U+{code:04X}")
            gy = oy + row * CELL_H
            gx = ox + col * CELL_W
            for bit in range(GRID_W * GRID_H):
                if code >> bit & 1:
                    v, u = divmod(bit, GRID_W)
                    y = gy + v * SUB
                    x = gx + u * SUB
                    px[y : y + SUB, x : x + SUB] = INK
    return px


def decode_text(px: np.ndarray) -> str:
    """Read back the text of a rendered raster; inverse of render_text.

    Tolerates any integer upscale of the rendered image.  A raster without
    ink decodes to the empty string; anything that does not carry a
    consistent frame/cell geometry raises GlyphDecodeError.
    """
    ink = np.asarray(px) < 128
    if not ink.any():
        return ""
    rows = np.flatnonzero(ink.any(axis=1))
    cols = np.flatnonzero(ink.any(axis=0))
    y0, y1 = int(rows[0]), int(rows[-1])
    x0, x1 = int(cols[0]), int(cols[-1])
    # The left frame stripe spans the full bounding-box height; its thickness
    # at mid-height reveals the scale.
    mid = (y0 + y1) // 2
    run = 0
    while x0 + run <= x1 and ink[mid, x0 + run]:
        run += 1
    scale = int(round(run / FRAME))
    if scale < 1:
        raise GlyphDecodeError("cannot measure frame stripe")
    bw = x1 - x0 + 1
    bh = y1 - y0 + 1
    inner_w = bw - 2 * (FRAME + PAD) * scale
    inner_h = bh - 2 * (FRAME + PAD) * scale
    if inner_w <= 0 or inner_h <= 0 or inner_w % (CELL_W * scale) or inner_h % (CELL_H * scale):
        raise GlyphDecodeError(f"inner area {inner_w}x{inner_h} does not fit the cell grid at scale {scale}")
    n_cols = inner_w // (CELL_W * scale)
    n_rows = inner_h // (CELL_H * scale)
    oy = y0 + (FRAME + PAD) * scale
    ox = x0 + (FRAME + PAD) * scale
    half = (SUB * scale) // 2
    lines = []
    for row in range(n_rows):
        chars = []
        gy = oy + row * CELL_H * scale
        for col in range(n_cols):
            gx = ox + col * CELL_W * scale
            code = 0
            for bit in range(GRID_W * GRID_H):
                v, u = divmod(bit, GRID_W)
                y = gy + v * SUB * scale + half
                x = gx + u * SUB * scale + half
                if ink[y, x]:
                    code |= 1 << bit
            if code == 0:
                break  # blank cell: past end of line
            chars.append(chr(code))
        lines.append("".join(chars))
    return "\n".join(lines)
