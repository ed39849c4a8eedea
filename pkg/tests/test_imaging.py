import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from docfields import imaging
from docfields.imaging import (
    BinaryRaster,
    DegenerateHistogram,
    DocumentFormat,
    EmptyMask,
    PageRaster,
    PreprocessConfig,
    UnsupportedFormat,
    binarize,
    decode_image,
    detect_format,
    encode_png,
    mask_text_region,
    morph_close,
    preprocess,
    resize,
    sharpen,
)


# ---------------------------------------------------------------------------
# Reference oracles, written from the definitions and kept loop-based on
# purpose so they share nothing with the vectorized implementations.


def brute_force_otsu(pixels):
    """Try all 256 thresholds, return the set maximizing between-class variance."""
    flat = pixels.ravel().tolist()
    n = len(flat)
    best, argmax = -1.0, []
    for t in range(1, 256):
        below = [p for p in flat if p < t]
        above = [p for p in flat if p >= t]
        if not below or not above:
            continue
        w0, w1 = len(below) / n, len(above) / n
        mu0 = sum(below) / len(below)
        mu1 = sum(above) / len(above)
        sigma = w0 * w1 * (mu0 - mu1) ** 2
        if sigma > best + 1e-9:
            best, argmax = sigma, [t]
        elif abs(sigma - best) <= 1e-9:
            argmax.append(t)
    return argmax


def reference_close(px, kh, kw):
    """Erode (min) then dilate (max); outside is background for the erosion
    and foreground for the dilation, matching the documented convention."""
    h, w = px.shape
    rh, rw = kh // 2, kw // 2

    def min_at(y, x):
        vals = []
        for dy in range(-rh, rh + 1):
            for dx in range(-rw, rw + 1):
                yy, xx = y + dy, x + dx
                vals.append(px[yy, xx] if 0 <= yy < h and 0 <= xx < w else 255)
        return min(vals)

    grown = np.array([[min_at(y, x) for x in range(w)] for y in range(h)], dtype=np.uint8)

    def max_at(y, x):
        vals = []
        for dy in range(-rh, rh + 1):
            for dx in range(-rw, rw + 1):
                yy, xx = y + dy, x + dx
                vals.append(grown[yy, xx] if 0 <= yy < h and 0 <= xx < w else 0)
        return max(vals)

    return np.array([[max_at(y, x) for x in range(w)] for y in range(h)], dtype=np.uint8)


def reference_components(px):
    """Flood-fill labeling of dark pixels with 8-connectivity."""
    h, w = px.shape
    seen = np.zeros((h, w), dtype=bool)
    comps = []
    for y in range(h):
        for x in range(w):
            if px[y, x] == 0 and not seen[y, x]:
                stack, pix = [(y, x)], []
                seen[y, x] = True
                while stack:
                    cy, cx = stack.pop()
                    pix.append((cy, cx))
                    for dy in (-1, 0, 1):
                        for dx in (-1, 0, 1):
                            ny, nx = cy + dy, cx + dx
                            if 0 <= ny < h and 0 <= nx < w and px[ny, nx] == 0 and not seen[ny, nx]:
                                seen[ny, nx] = True
                                stack.append((ny, nx))
                comps.append(pix)
    return comps


def rasters(max_side=24):
    return (
        st.tuples(st.integers(1, max_side), st.integers(1, max_side))
        .flatmap(
            lambda hw: st.lists(
                st.integers(0, 255), min_size=hw[0] * hw[1], max_size=hw[0] * hw[1]
            ).map(lambda vals: np.array(vals, dtype=np.uint8).reshape(hw))
        )
    )


def binary_rasters(max_side=24):
    return rasters(max_side).map(lambda px: np.where(px >= 128, 255, 0).astype(np.uint8))


# ---------------------------------------------------------------------------
# detect_format


def test_detect_png_magic():
    assert detect_format(b"\x89PNG\r\n\x1a\x0arest") is DocumentFormat.PNG


def test_detect_pdf_magic():
    assert detect_format(b"%PDF-1.7 ...") is DocumentFormat.PDF


def test_detect_docx_unsupported():
    with pytest.raises(UnsupportedFormat):
        detect_format(b"PK\x03\x04 something", "report.docx")


def test_detect_tif_magic_and_jpeg_hint():
    assert detect_format(b"II*\x00abc") is DocumentFormat.TIF
    assert detect_format(b"\xff\xd8\xffdata", "scan.jpeg") is DocumentFormat.JPEG
    assert detect_format(b"\xff\xd8\xffdata", "scan.jpg") is DocumentFormat.JPG


def test_detect_plain_text_fallback():
    assert detect_format("hallo wereld\n".encode()) is DocumentFormat.PLAIN_TEXT
    assert detect_format(b"notes", "notes.txt") is DocumentFormat.PLAIN_TEXT


def test_detect_binary_garbage_rejected():
    with pytest.raises(UnsupportedFormat):
        detect_format(bytes([0xFE, 0xFF, 0x00, 0x80]))


def test_detect_empty_is_precondition_error():
    with pytest.raises(ValueError):
        detect_format(b"")


def test_detect_extension_hint_without_magic():
    assert detect_format(b"\x00\x01\x02ABC" + bytes([0xC0]), "page.png") is DocumentFormat.PNG
    assert detect_format(bytes([0xC0, 0x01]), "frame.img") is DocumentFormat.IMG


# ---------------------------------------------------------------------------
# decode_image


def _png_bytes(array, mode):
    from PIL import Image
    import io

    im = Image.fromarray(array, mode=mode)
    buf = io.BytesIO()
    im.save(buf, format="PNG")
    return buf.getvalue()


def test_decode_white_pixel():
    data = _png_bytes(np.full((1, 1, 3), 255, dtype=np.uint8), "RGB")
    raster = decode_image(data, DocumentFormat.PNG)
    assert raster.pixels.tolist() == [[255]]


def test_decode_red_pixel_rec601():
    data = _png_bytes(np.array([[[255, 0, 0]]], dtype=np.uint8), "RGB")
    raster = decode_image(data, DocumentFormat.PNG)
    # 0.299 * 255 = 76.245 -> 76
    assert raster.pixels.tolist() == [[76]]


def test_decode_truncated_png():
    data = _png_bytes(np.zeros((16, 16), dtype=np.uint8), "L")[:40]
    with pytest.raises(imaging.DecodeError):
        decode_image(data, DocumentFormat.PNG)


def test_decode_roundtrip_gray():
    px = np.arange(64, dtype=np.uint8).reshape(8, 8)
    raster = decode_image(encode_png(PageRaster(px)), DocumentFormat.PNG)
    assert np.array_equal(raster.pixels, px)


def test_decode_rgba_composites_over_white():
    rgba = np.zeros((1, 2, 4), dtype=np.uint8)
    rgba[0, 0] = (0, 0, 0, 0)  # fully transparent -> white background
    rgba[0, 1] = (0, 0, 0, 255)  # opaque black
    raster = decode_image(_png_bytes(rgba, "RGBA"), DocumentFormat.PNG)
    assert raster.pixels.tolist() == [[255, 0]]


# ---------------------------------------------------------------------------
# rasterize_pdf (exercised through a fake adapter script)


@pytest.fixture
def fake_rasterizer(tmp_path):
    script = tmp_path / "fakeraster.py"
    script.write_text(
        "import sys\n"
        "from PIL import Image\n"
        "inp, dpi, outdir = sys.argv[1], int(sys.argv[2]), sys.argv[3]\n"
        "pages = int(open(inp, 'rb').read().split(b'#pages=')[1].split(b'\\n')[0])\n"
        "for i in range(pages):\n"
        "    Image.new('L', (4, 4), color=i).save(f'{outdir}/page-{i + 1:04d}.png')\n"
    )
    return f"python3 {script} {{input}} {{dpi}} {{outdir}}"


def test_rasterize_two_pages(fake_rasterizer):
    pages = imaging.rasterize_pdf(b"%PDF-1.4\n#pages=2\n", dpi=300, command_template=fake_rasterizer)
    assert len(pages) == 2
    assert pages[0].pixels[0, 0] == 0 and pages[1].pixels[0, 0] == 1


def test_rasterize_zero_pages(fake_rasterizer):
    assert imaging.rasterize_pdf(b"%PDF-1.4\n#pages=0\n", command_template=fake_rasterizer) == []


def test_rasterize_without_adapter():
    with pytest.raises(imaging.AdapterUnavailable):
        imaging.rasterize_pdf(b"%PDF-", command_template=None)


def test_rasterize_adapter_failure(tmp_path):
    with pytest.raises(imaging.RasterizeError):
        imaging.rasterize_pdf(b"%PDF-", command_template="python3 -c 'import sys; sys.exit(3)' {input} {dpi} {outdir}")


# ---------------------------------------------------------------------------
# resize


def test_resize_dimensions():
    out = resize(PageRaster(np.zeros((10, 10), dtype=np.uint8)), 2)
    assert (out.height, out.width) == (20, 20)


def test_resize_factor_one_identity():
    px = np.random.default_rng(1).integers(0, 256, (9, 7)).astype(np.uint8)
    out = resize(PageRaster(px), 1)
    assert np.array_equal(out.pixels, px)


def test_resize_constant_field():
    out = resize(PageRaster(np.full((3, 3), 128, dtype=np.uint8)), 2)
    assert out.pixels.shape == (6, 6)
    assert np.all(out.pixels == 128)


@settings(max_examples=60, deadline=None)
@given(
    st.integers(1, 40),
    st.integers(1, 40),
    st.fractions(min_value=1, max_value=4).map(float),
)
def test_resize_roundtrip_dims_for_upscale(h, w, f):
    first = resize(PageRaster(np.zeros((h, w), dtype=np.uint8)), f)
    back = resize(first, 1.0 / f)
    assert (back.height, back.width) == (h, w)


def test_resize_rejects_bad_factor():
    with pytest.raises(ValueError):
        resize(PageRaster(np.zeros((2, 2), dtype=np.uint8)), 0)


# ---------------------------------------------------------------------------
# binarize


def test_binarize_fixed_levels():
    raster = PageRaster(np.array([[200, 60]], dtype=np.uint8))
    out = binarize(raster, 128)
    assert out.pixels.tolist() == [[255, 0]]


def test_binarize_all_white_identity():
    raster = PageRaster(np.full((4, 4), 255, dtype=np.uint8))
    assert np.all(binarize(raster, 128).pixels == 255)


def test_binarize_bimodal_otsu_against_brute_force():
    px = np.array([[40] * 8 + [210] * 8] * 4, dtype=np.uint8)
    argmax = brute_force_otsu(px)
    t = imaging.otsu_threshold(px)
    assert t in argmax
    assert 40 < t <= 210
    out = binarize(PageRaster(px), "otsu")
    assert set(np.unique(out.pixels)) == {0, 255}
    assert np.all(out.pixels[:, :8] == 0) and np.all(out.pixels[:, 8:] == 255)


@settings(max_examples=50, deadline=None)
@given(rasters(max_side=12))
def test_otsu_matches_brute_force(px):
    if np.unique(px).size < 2:
        return
    assert imaging.otsu_threshold(px) in brute_force_otsu(px)


def test_binarize_constant_degenerate_warns():
    raster = PageRaster(np.full((3, 3), 77, dtype=np.uint8))
    with pytest.warns(DegenerateHistogram):
        out = binarize(raster, "otsu")
    # fallback fixed level 128: 77 < 128 -> all dark
    assert np.all(out.pixels == 0)


@settings(max_examples=40, deadline=None)
@given(rasters(max_side=16))
def test_binarize_output_domain(px):
    out = binarize(PageRaster(px), 128)
    assert set(np.unique(out.pixels)) <= {0, 255}


# ---------------------------------------------------------------------------
# morph_close


def test_close_background_identity():
    px = np.full((5, 5), 255, dtype=np.uint8)
    assert np.all(morph_close(BinaryRaster(px), 3).pixels == 255)


def test_close_foreground_identity():
    px = np.zeros((5, 5), dtype=np.uint8)
    assert np.all(morph_close(BinaryRaster(px), 3).pixels == 0)


def test_close_row_gap_reference():
    px = np.array([[0, 255, 0]], dtype=np.uint8)
    expected = reference_close(px, 1, 3)
    out = morph_close(BinaryRaster(px), (1, 3))
    assert out.pixels.tolist() == expected.tolist() == [[0, 0, 0]]


@settings(max_examples=60, deadline=None)
@given(binary_rasters(max_side=14), st.sampled_from([3, 5]))
def test_close_matches_reference(px, k):
    out = morph_close(BinaryRaster(px), k)
    assert np.array_equal(out.pixels, reference_close(px, k, k))


@settings(max_examples=60, deadline=None)
@given(binary_rasters(max_side=20), st.sampled_from([3, 5]))
def test_close_idempotent(px, k):
    once = morph_close(BinaryRaster(px), k)
    twice = morph_close(once, k)
    assert np.array_equal(once.pixels, twice.pixels)


def test_close_rejects_even_kernel():
    with pytest.raises(ValueError):
        morph_close(BinaryRaster(np.zeros((3, 3), dtype=np.uint8)), 2)


# ---------------------------------------------------------------------------
# mask_text_region


def test_mask_single_block():
    px = np.full((10, 10), 255, dtype=np.uint8)
    px[2:5, 3:7] = 0
    out = mask_text_region(BinaryRaster(px), min_area=2)
    expected = np.full((10, 10), 255, dtype=np.uint8)
    expected[2:5, 3:7] = 0
    assert np.array_equal(out.pixels, expected)


def test_mask_empty_warns_and_returns_input():
    px = np.full((6, 6), 255, dtype=np.uint8)
    with pytest.warns(EmptyMask):
        out = mask_text_region(BinaryRaster(px))
    assert np.array_equal(out.pixels, px)


def test_mask_filters_small_component_against_reference():
    px = np.full((20, 20), 255, dtype=np.uint8)
    px[2:8, 2:8] = 0  # area 36
    px[15, 15] = 0  # area 1
    comps = reference_components(px)
    big = [c for c in comps if len(c) >= 4]
    ys = [y for c in big for (y, _) in c]
    xs = [x for c in big for (_, x) in c]
    out = mask_text_region(BinaryRaster(px), min_area=4)
    # inside the reference bounding box: untouched; outside: white
    assert np.all(out.pixels[min(ys) : max(ys) + 1, min(xs) : max(xs) + 1] == px[min(ys) : max(ys) + 1, min(xs) : max(xs) + 1])
    assert out.pixels[15, 15] == 255


@settings(max_examples=50, deadline=None)
@given(binary_rasters(max_side=20))
def test_mask_never_adds_dark(px):
    import warnings as _w

    with _w.catch_warnings():
        _w.simplefilter("ignore")
        out = mask_text_region(BinaryRaster(px))
    assert int(np.sum(out.pixels == 0)) <= int(np.sum(px == 0))


# ---------------------------------------------------------------------------
# sharpen


def test_sharpen_constant_invariance():
    px = np.full((6, 6), 128, dtype=np.uint8)
    assert np.array_equal(sharpen(PageRaster(px)).pixels, px)


def test_sharpen_single_white_pixel_hand_convolution():
    px = np.zeros((5, 5), dtype=np.uint8)
    px[2, 2] = 255
    out = sharpen(PageRaster(px)).pixels
    # center: 5*255 = 1275 -> clamp 255; 4-neighbors: -255 -> clamp 0
    assert out[2, 2] == 255
    assert out[1, 2] == out[3, 2] == out[2, 1] == out[2, 3] == 0
    assert out[0, 0] == 0


def test_sharpen_one_pixel_image():
    px = np.array([[93]], dtype=np.uint8)
    assert sharpen(PageRaster(px)).pixels.tolist() == [[93]]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 255))
def test_sharpen_constant_property(v):
    px = np.full((4, 7), v, dtype=np.uint8)
    assert np.array_equal(sharpen(PageRaster(px)).pixels, px)


# ---------------------------------------------------------------------------
# preprocess composition


def test_preprocess_identity_config():
    cfg = PreprocessConfig(
        resize_factor=1,
        binarize_enabled=False,
        morph_enabled=False,
        mask_enabled=False,
        sharpen_enabled=False,
    )
    px = np.random.default_rng(7).integers(0, 256, (12, 9)).astype(np.uint8)
    out = preprocess(PageRaster(px), cfg)
    assert np.array_equal(out.pixels, px)


def test_preprocess_rejects_even_kernel():
    with pytest.raises(ValueError):
        PreprocessConfig(kernel=2)


def test_preprocess_binary_output_with_defaults():
    rng = np.random.default_rng(3)
    px = np.where(rng.random((40, 60)) < 0.1, 0, 255).astype(np.uint8)
    out = preprocess(PageRaster(px), PreprocessConfig())
    assert set(np.unique(out.pixels)) <= {0, 255}
    assert (out.height, out.width) == (80, 120)
