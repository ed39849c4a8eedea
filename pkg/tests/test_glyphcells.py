import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from docfields import glyphcells
from docfields.imaging import BinaryRaster, PageRaster, PreprocessConfig, morph_close, preprocess

renderable_text = st.text(
    alphabet=st.characters(min_codepoint=1, max_codepoint=0x2500, blacklist_characters="\r"),
    max_size=120,
)


def test_roundtrip_simple():
    text = "Factuurnr: 2024-001\nTotaal: € 1.210,00"
    px = glyphcells.render_text(text)
    assert glyphcells.decode_text(px) == text


def test_empty_text_roundtrip():
    px = glyphcells.render_text("")
    assert glyphcells.decode_text(px) == ""


def test_blank_raster_decodes_empty():
    assert glyphcells.decode_text(np.full((30, 30), 255, dtype=np.uint8)) == ""


def test_trailing_newline_preserved():
    assert glyphcells.decode_text(glyphcells.render_text("a\n")) == "a\n"


@settings(max_examples=80, deadline=None)
@given(renderable_text)
def test_roundtrip_property(text):
    assert glyphcells.decode_text(glyphcells.render_text(text)) == text


def test_roundtrip_after_unit_close():
    text = "Naam: Jan Jansen"
    px = glyphcells.render_text(text)
    closed = morph_close(BinaryRaster(px), 1)
    assert glyphcells.decode_text(closed.pixels) == text


def test_roundtrip_after_integer_upscale():
    text = "schaal test"
    px = glyphcells.render_text(text)
    up = np.kron(px, np.ones((3, 3), dtype=np.uint8))
    assert glyphcells.decode_text(up) == text


def test_roundtrip_after_default_preprocess():
    text = "E-mail: jan@voorbeeld.nl\nTel: +31 6 12345678\n\nWerkervaring —— 2019"
    raster = PageRaster(glyphcells.render_text(text))
    processed = preprocess(raster, PreprocessConfig())
    assert glyphcells.decode_text(processed.pixels) == text


def test_roundtrip_after_close_k3_at_scale_2():
    text = "abc XYZ 0123456789"
    from docfields.imaging import binarize, resize

    raster = resize(PageRaster(glyphcells.render_text(text)), 2)
    binary = binarize(raster, "otsu")
    closed = morph_close(binary, 3)
    assert glyphcells.decode_text(closed.pixels) == text


def test_unsupported_codepoint():
    with pytest.raises(glyphcells.UnsupportedGlyph):
        glyphcells.render_text("\U0001F600")


def test_too_large():
    with pytest.raises(glyphcells.TextTooLarge):
        glyphcells.render_text("x" * 4000)
