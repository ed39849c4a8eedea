"""Document ingestion and raster preprocessing for the OCR engine.

The preprocessing pipeline runs, in order: resize, binary threshold,
morphological closing of the dark text (erode, then dilate), contour mask
around the text area, and a sharpening filter.  All operations are pure
functions of their inputs.
"""

from __future__ import annotations

import enum
import io
import math
import shlex
import subprocess
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage


class ImagingError(Exception):
    pass


class UnsupportedFormat(ImagingError):
    pass


class DecodeError(ImagingError):
    pass


class AdapterUnavailable(ImagingError):
    pass


class RasterizeError(ImagingError):
    pass


class DegenerateHistogram(UserWarning):
    """Otsu was asked to threshold a constant image."""


class EmptyMask(UserWarning):
    """No contour survived the area filter; input returned unchanged."""


class DocumentFormat(enum.Enum):
    PDF = "pdf"
    JPG = "jpg"
    JPEG = "jpeg"
    IMG = "img"
    TIF = "tif"
    PNG = "png"
    PLAIN_TEXT = "plain_text"


RASTER_FORMATS = frozenset(
    {DocumentFormat.JPG, DocumentFormat.JPEG, DocumentFormat.IMG, DocumentFormat.TIF, DocumentFormat.PNG}
)


@dataclass
class PageRaster:
    """2-D 8-bit luminance grid, row-major, shape (height, width)."""

    pixels: np.ndarray
    dpi: int | None = None

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("raster must be a non-empty 2-D grid")
        self.pixels = px

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass
class BinaryRaster(PageRaster):
    """PageRaster whose values are exactly 0 or 255."""

    def __post_init__(self) -> None:
        super().__post_init__()
        vals = np.unique(self.pixels)
        if not np.all(np.isin(vals, (0, 255))):
            raise ValueError("binary raster may only contain 0 and 255")


@dataclass
class PreprocessConfig:
    """Tunable parameters of the preprocessing stages.

    The defaults (2x upscale, Otsu threshold, 3x3 kernel, mask area cutoff
    at 0.01% of the image) are common OCR-prep settings; every stage can be
    disabled individually, and a config with all stages at identity settings
    leaves the raster untouched.
    """

    resize_factor: float = 2.0
    threshold: str | int = "otsu"  # "otsu" or a fixed level 0..255
    kernel: int | tuple[int, int] = 3
    binarize_enabled: bool = True
    morph_enabled: bool = True
    mask_enabled: bool = True
    sharpen_enabled: bool = True
    mask_min_area_frac: float = 0.0001

    def __post_init__(self) -> None:
        if self.resize_factor <= 0:
            raise ValueError("resize_factor must be > 0")
        kh, kw = _kernel_shape(self.kernel)
        if isinstance(self.threshold, int) and not 0 <= self.threshold <= 255:
            raise ValueError("fixed threshold must be in 0..255")
        if isinstance(self.threshold, str) and self.threshold != "otsu":
            raise ValueError(f"unknown threshold method {self.threshold!r}")
        if not 0 < self.mask_min_area_frac < 1:
            raise ValueError("mask_min_area_frac must be a fraction in (0, 1)")


def _kernel_shape(kernel: int | tuple[int, int]) -> tuple[int, int]:
    if isinstance(kernel, int):
        kh = kw = kernel
    else:
        kh, kw = kernel
    if kh < 1 or kw < 1 or kh % 2 == 0 or kw % 2 == 0:
        raise ValueError(f"kernel sides must be odd and >= 1, got {kernel!r}")
    return kh, kw


_MAGIC = (
    (b"\x89PNG\r\n\x1a\n", DocumentFormat.PNG),
    (b"%PDF-", DocumentFormat.PDF),
    (b"\xff\xd8\xff", DocumentFormat.JPG),
    (b"II*\x00", DocumentFormat.TIF),
    (b"MM\x00*", DocumentFormat.TIF),
)

_EXTENSIONS = {
    ".pdf": DocumentFormat.PDF,
    ".jpg": DocumentFormat.JPG,
    ".jpeg": DocumentFormat.JPEG,
    ".img": DocumentFormat.IMG,
    ".tif": DocumentFormat.TIF,
    ".png": DocumentFormat.PNG,
    ".txt": DocumentFormat.PLAIN_TEXT,
    ".text": DocumentFormat.PLAIN_TEXT,
}


def detect_format(data: bytes, filename_hint: str = "") -> DocumentFormat:
    """Decide the document format: magic bytes first, extension hint second.

    Content that is valid UTF-8 and carries no known image/PDF signature is
    treated as plain text.  Raises UnsupportedFormat when neither signature
    nor hint matches the supported set.
    """
    if not data:
        raise ValueError("cannot detect format of empty input")
    for magic, fmt in _MAGIC:
        if data.startswith(magic):
            if fmt is DocumentFormat.JPG and filename_hint.lower().endswith(".jpeg"):
                return DocumentFormat.JPEG
            return fmt
    ext = Path(filename_hint).suffix.lower() if filename_hint else ""
    if ext in _EXTENSIONS:
        fmt = _EXTENSIONS[ext]
        if fmt is DocumentFormat.PLAIN_TEXT and not _is_utf8(data):
            raise UnsupportedFormat(f"{filename_hint!r} is not valid UTF-8 text")
        return fmt
    if ext:
        raise UnsupportedFormat(f"unsupported extension {ext!r}")
    if _is_utf8(data):
        return DocumentFormat.PLAIN_TEXT
    raise UnsupportedFormat("no known signature and no usable filename hint")


def _is_utf8(data: bytes) -> bool:
    try:
        data.decode("utf-8")
    except UnicodeDecodeError:
        return False
    return True


def decode_image(data: bytes, fmt: DocumentFormat) -> PageRaster:
    """Decode an image payload into a luminance raster.

    Color inputs collapse to luminance via the Rec. 601 weights
    0.299 R + 0.587 G + 0.114 B, rounded half-up; alpha channels are
    composited over white first.
    """
    if fmt not in RASTER_FORMATS:
        raise ValueError(f"{fmt.value} is not a raster format")
    try:
        im = Image.open(io.BytesIO(data))
        im.load()
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeError(f"cannot decode image payload: {exc}") from exc
    dpi = None
    if "dpi" in im.info:
        try:
            dpi = int(round(float(im.info["dpi"][0])))
        except (TypeError, ValueError, IndexError):
            dpi = None
    if im.mode == "L":
        return PageRaster(np.asarray(im, dtype=np.uint8), dpi=dpi)
    if im.mode in ("RGBA", "LA", "PA"):
        background = Image.new("RGBA", im.size, (255, 255, 255, 255))
        im = Image.alpha_composite(background, im.convert("RGBA"))
    rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
    luma = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
    return PageRaster(np.floor(luma + 0.5).astype(np.uint8), dpi=dpi)


def rasterize_pdf(data: bytes, dpi: int = 300, command_template: str | None = None) -> list[PageRaster]:
    """Render a PDF to one raster per page via the external rasterizer adapter.

    The adapter is a command template with {input}, {dpi} and {outdir}
    placeholders; it must write one PNG per page named page-%04d.png into
    the output directory and exit 0.
    """
    if not command_template:
        raise AdapterUnavailable("no rasterizer configured (set rasterizer_cmd)")
    with tempfile.TemporaryDirectory(prefix="docfields-pdf-") as tmp:
        pdf_path = Path(tmp) / "input.pdf"
        pdf_path.write_bytes(data)
        outdir = Path(tmp) / "pages"
        outdir.mkdir()
        cmd = [
            part.format(input=str(pdf_path), dpi=str(dpi), outdir=str(outdir))
            for part in shlex.split(command_template)
        ]
        try:
            proc = subprocess.run(cmd, capture_output=True, timeout=300)
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise RasterizeError(f"rasterizer failed to run: {exc}") from exc
        if proc.returncode != 0:
            stderr = proc.stderr.decode("utf-8", "replace")[:500]
            raise RasterizeError(f"rasterizer exited {proc.returncode}: {stderr}")
        pages = []
        for page_file in sorted(outdir.glob("page-*.png")):
            raster = decode_image(page_file.read_bytes(), DocumentFormat.PNG)
            raster.dpi = dpi
            pages.append(raster)
        return pages


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def resize(raster: PageRaster, factor: float) -> PageRaster:
    """Scale both dimensions by `factor` (rounded, min 1) with bilinear interpolation."""
    if factor <= 0:
        raise ValueError("resize factor must be > 0")
    if factor == 1.0:
        return PageRaster(raster.pixels.copy(), dpi=raster.dpi)
    out_h = max(1, _round_half_up(raster.height * factor))
    out_w = max(1, _round_half_up(raster.width * factor))
    src = raster.pixels.astype(np.float64)
    # Pixel centers map to (i + 0.5) / scale - 0.5 in source coordinates.
    ys = (np.arange(out_h) + 0.5) * (raster.height / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (raster.width / out_w) - 0.5
    y0 = np.clip(np.floor(ys), 0, raster.height - 1).astype(np.intp)
    x0 = np.clip(np.floor(xs), 0, raster.width - 1).astype(np.intp)
    y1 = np.minimum(y0 + 1, raster.height - 1)
    x1 = np.minimum(x0 + 1, raster.width - 1)
    fy = np.clip(ys - y0, 0.0, 1.0)[:, None]
    fx = np.clip(xs - x0, 0.0, 1.0)[None, :]
    top = src[np.ix_(y0, x0)] * (1 - fx) + src[np.ix_(y0, x1)] * fx
    bottom = src[np.ix_(y1, x0)] * (1 - fx) + src[np.ix_(y1, x1)] * fx
    out = top * (1 - fy) + bottom * fy
    return PageRaster(np.floor(out + 0.5).astype(np.uint8), dpi=raster.dpi)


def otsu_threshold(pixels: np.ndarray) -> int:
    """Threshold maximizing between-class variance; midpoint of a flat maximum.

    The returned t classifies pixel >= t as foreground (255).
    """
    hist = np.bincount(pixels.ravel(), minlength=256).astype(np.float64)
    total = hist.sum()
    # Classes: below = {p < t}, above = {p >= t}, for t in 1..255.
    cum = np.cumsum(hist)
    cum_val = np.cumsum(hist * np.arange(256))
    w0 = cum[:-1]  # weight of class below, for t = 1..255
    w1 = total - w0
    valid = (w0 > 0) & (w1 > 0)
    if not valid.any():
        raise ValueError("degenerate histogram")
    mu0 = np.where(w0 > 0, cum_val[:-1] / np.maximum(w0, 1), 0.0)
    mu1 = np.where(w1 > 0, (cum_val[-1] - cum_val[:-1]) / np.maximum(w1, 1), 0.0)
    sigma_b = np.where(valid, w0 * w1 * (mu0 - mu1) ** 2, -1.0)
    ties = np.flatnonzero(sigma_b == sigma_b.max())
    # Midpoint of the first contiguous run of maximizers: levels across an
    # empty histogram gap score identically, and mid-gap is the stable pick.
    run_end = ties[0]
    for idx in ties[1:]:
        if idx != run_end + 1:
            break
        run_end = idx
    return int(ties[0] + run_end + 2) // 2  # thresholds are index + 1


def binarize(raster: PageRaster, threshold: str | int = "otsu") -> BinaryRaster:
    """Map pixel >= threshold to 255 and the rest to 0.

    With "otsu" the level comes from Otsu's method; a constant image makes
    that degenerate, in which case a fixed level of 128 is used and a
    DegenerateHistogram warning is emitted.
    """
    if isinstance(threshold, str):
        if threshold != "otsu":
            raise ValueError(f"unknown threshold method {threshold!r}")
        try:
            level = otsu_threshold(raster.pixels)
        except ValueError:
            warnings.warn(DegenerateHistogram("constant image; falling back to fixed level 128"))
            level = 128
    else:
        if not 0 <= threshold <= 255:
            raise ValueError("fixed threshold must be in 0..255")
        level = threshold
    out = np.where(raster.pixels >= level, 255, 0).astype(np.uint8)
    return BinaryRaster(out, dpi=raster.dpi)


def morph_close(binary: BinaryRaster, kernel: int | tuple[int, int] = 3) -> BinaryRaster:
    """Close the dark regions: luminance erosion, then dilation, same element.

    On dark text over a light background this fills light gaps narrower than
    the kernel.  Outside the image counts as background for the first stage
    and as foreground for the second, so borders neither bleed ink in nor
    eat ink away; with that convention the operation is idempotent.
    """
    kh, kw = _kernel_shape(kernel)
    if kh == 1 and kw == 1:
        return BinaryRaster(binary.pixels.copy(), dpi=binary.dpi)
    grown = ndimage.minimum_filter(binary.pixels, size=(kh, kw), mode="constant", cval=255)
    closed = ndimage.maximum_filter(grown, size=(kh, kw), mode="constant", cval=0)
    return BinaryRaster(closed.astype(np.uint8), dpi=binary.dpi)


def mask_text_region(binary: BinaryRaster, min_area: int | None = None) -> BinaryRaster:
    """Whiten everything outside the bounding box of the significant dark contours.

    Connected dark components (8-connectivity) with area >= min_area define
    the box; min_area defaults to 0.01% of the image area.  When nothing
    passes the filter an EmptyMask warning is emitted and the input is
    returned unchanged.
    """
    px = binary.pixels
    if min_area is None:
        min_area = max(1, _round_half_up(0.0001 * px.size))
    labels, count = ndimage.label(px == 0, structure=np.ones((3, 3), dtype=bool))
    if count:
        areas = np.bincount(labels.ravel())[1:]
        kept = np.flatnonzero(areas >= min_area) + 1
    else:
        kept = np.array([], dtype=np.intp)
    if kept.size == 0:
        warnings.warn(EmptyMask("no dark component reaches the area cutoff"))
        return BinaryRaster(px.copy(), dpi=binary.dpi)
    keep_mask = np.isin(labels, kept)
    rows = np.flatnonzero(keep_mask.any(axis=1))
    cols = np.flatnonzero(keep_mask.any(axis=0))
    out = np.full_like(px, 255)
    r0, r1 = rows[0], rows[-1]
    c0, c1 = cols[0], cols[-1]
    out[r0 : r1 + 1, c0 : c1 + 1] = px[r0 : r1 + 1, c0 : c1 + 1]
    return BinaryRaster(out, dpi=binary.dpi)


_SHARPEN_KERNEL = np.array([[0, -1, 0], [-1, 5, -1], [0, -1, 0]], dtype=np.int32)


def sharpen(raster: PageRaster) -> PageRaster:
    """3x3 sharpening convolution, clamped to 0..255, replicate border."""
    acc = ndimage.convolve(raster.pixels.astype(np.int32), _SHARPEN_KERNEL, mode="nearest")
    return PageRaster(np.clip(acc, 0, 255).astype(np.uint8), dpi=raster.dpi)


def preprocess(raster: PageRaster, config: PreprocessConfig | None = None) -> PageRaster:
    """Run the full preprocessing chain in pipeline order.

    Stages: resize -> binarize -> morphological close -> contour mask ->
    sharpen.  Disabled stages are skipped; the result is what the OCR
    adapter receives.
    """
    if config is None:
        config = PreprocessConfig()
    out: PageRaster = raster
    if config.resize_factor != 1.0:
        out = resize(out, config.resize_factor)
    if config.binarize_enabled:
        out = binarize(out, config.threshold)
    if config.morph_enabled:
        if not isinstance(out, BinaryRaster):
            out = binarize(out, config.threshold)
        out = morph_close(out, config.kernel)
    if config.mask_enabled:
        if not isinstance(out, BinaryRaster):
            out = binarize(out, config.threshold)
        min_area = max(1, _round_half_up(config.mask_min_area_frac * out.pixels.size))
        out = mask_text_region(out, min_area=min_area)
    if config.sharpen_enabled:
        out = sharpen(out)
    return PageRaster(out.pixels, dpi=out.dpi)


def encode_png(raster: PageRaster) -> bytes:
    """Serialize a raster as a grayscale PNG (fixture storage format)."""
    im = Image.fromarray(raster.pixels, mode="L")
    buf = io.BytesIO()
    kwargs = {}
    if raster.dpi:
        kwargs["dpi"] = (raster.dpi, raster.dpi)
    im.save(buf, format="PNG", **kwargs)
    return buf.getvalue()
