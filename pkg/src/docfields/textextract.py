"""Text extraction: OCR adapter, language detection, spell correction, LLM cleanup.

The pipeline is preprocess -> ocr -> detect_language -> correct_spelling ->
llm_correct, with per-stage enable flags.  Plain-text documents bypass
imaging and OCR entirely.
"""

from __future__ import annotations

import math
import re
import subprocess
import tempfile
import threading
from collections import defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

from . import gateway as gw
from . import glyphcells
from .imaging import (
    AdapterUnavailable,
    DocumentFormat,
    PageRaster,
    PreprocessConfig,
    decode_image,
    detect_format,
    encode_png,
    preprocess,
    rasterize_pdf,
)

LANGUAGES = ("nl", "en")


class NoAlphabeticContent(Exception):
    pass


class DictionaryMissing(Exception):
    pass


class EngineError(Exception):
    pass


def _data_text(name: str) -> str:
    return resources.files("docfields.data").joinpath(name).read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def _stopwords(language: str) -> frozenset[str]:
    return frozenset(w.strip() for w in _data_text(f"stopwords_{language}.txt").splitlines() if w.strip())


@lru_cache(maxsize=None)
def _trigram_logprobs(language: str) -> dict[str, float]:
    """Character-trigram log-probabilities from the top of the frequency list."""
    counts: dict[str, int] = defaultdict(int)
    for line in _data_text(f"words_{language}.txt").splitlines()[:3000]:
        word, _, freq = line.partition(" ")
        weight = max(1, int(freq or 1))
        padded = f"  {word} "
        for i in range(len(padded) - 2):
            counts[padded[i : i + 3]] += weight
    total = sum(counts.values())
    return {tri: math.log(c / total) for tri, c in counts.items()}


_WORD_RE = re.compile(r"\w+", re.UNICODE)
_ALPHA_RE = re.compile(r"[^\W\d_]", re.UNICODE)


def detect_language(text: str) -> str:
    """Pick "nl" or "en" by stopword hits; character trigrams break ties.

    Deterministic and total on any text with at least one alphabetic token;
    a residual tie goes to "en".
    """
    tokens = [t.lower() for t in _WORD_RE.findall(text) if _ALPHA_RE.search(t)]
    if not tokens:
        raise NoAlphabeticContent("text contains no alphabetic token")
    hits = {lang: sum(1 for t in tokens if t in _stopwords(lang)) for lang in LANGUAGES}
    best = max(hits.values())
    leaders = [lang for lang in LANGUAGES if hits[lang] == best]
    if len(leaders) == 1:
        return leaders[0]
    floor = math.log(1e-9)
    scores = {}
    for lang in leaders:
        model = _trigram_logprobs(lang)
        ll = 0.0
        for tok in tokens:
            padded = f"  {tok} "
            for i in range(len(padded) - 2):
                ll += model.get(padded[i : i + 3], floor)
        scores[lang] = ll
    ranked = sorted(leaders, key=lambda lang: (scores[lang], lang == "en"), reverse=True)
    return ranked[0]


# ---------------------------------------------------------------------------
# Spell checking


@dataclass
class SpellDictionary:
    """Word-frequency model backing the corrector.

    Candidate lookup uses a deletion-variant index built lazily on first
    use; candidates are always verified with a true edit-distance check, so
    the index is a pure speedup over brute-force Levenshtein.
    """

    language: str
    word_frequencies: dict[str, int]

    def __post_init__(self) -> None:
        if not self.word_frequencies:
            raise ValueError("dictionary must not be empty")
        for word, count in self.word_frequencies.items():
            if word != word.lower():
                raise ValueError(f"dictionary keys must be lowercase: {word!r}")
            if count < 1:
                raise ValueError(f"count for {word!r} must be >= 1")
        self._words: list[str] = list(self.word_frequencies)
        self._index: dict[int, list[int]] | None = None
        self._index_lock = threading.Lock()

    def __contains__(self, word: str) -> bool:
        return word in self.word_frequencies

    def _ensure_index(self) -> dict[int, list[int]]:
        # Built on first use; the lock keeps the dictionary shareable across
        # threads from the moment it is loaded.
        with self._index_lock:
            if self._index is None:
                index: dict[int, list[int]] = defaultdict(list)
                for wid, word in enumerate(self._words):
                    for variant in _deletes_up_to_two(word):
                        index[hash(variant)].append(wid)
                self._index = dict(index)
            return self._index

    def candidates_within_two(self, word: str) -> list[str]:
        index = self._ensure_index()
        ids: set[int] = set()
        for variant in _deletes_up_to_two(word):
            ids.update(index.get(hash(variant), ()))
        return [self._words[i] for i in ids]


def _deletes_up_to_two(word: str) -> set[str]:
    variants = {word}
    once = {word[:i] + word[i + 1 :] for i in range(len(word))}
    variants |= once
    for w in once:
        variants.update(w[:i] + w[i + 1 :] for i in range(len(w)))
    return variants


def edit_distance(a: str, b: str, cap: int = 2) -> int:
    """Levenshtein distance, capped: returns cap + 1 once it exceeds cap."""
    if abs(len(a) - len(b)) > cap:
        return cap + 1
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        lo = i
        for j, cb in enumerate(b, start=1):
            cost = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb))
            cur.append(cost)
            lo = min(lo, cost)
        if lo > cap:
            return cap + 1
        prev = cur
    return min(prev[-1], cap + 1)


@lru_cache(maxsize=None)
def load_dictionary(language: str, path: str | None = None) -> SpellDictionary:
    if language not in LANGUAGES:
        raise DictionaryMissing(f"no dictionary for language {language!r}")
    text = Path(path).read_text(encoding="utf-8") if path else _data_text(f"words_{language}.txt")
    freqs: dict[str, int] = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        word, _, count = line.partition(" ")
        freqs[word] = int(count)
    return SpellDictionary(language, freqs)


def suggest(word: str, dictionary: SpellDictionary) -> str:
    """Best correction for one token, or the token unchanged.

    Tokens starting with an uppercase letter (usually names) and tokens
    containing digits are never touched.  Otherwise the most frequent
    dictionary word within edit distance 1 wins, then distance 2, ties
    broken alphabetically.
    """
    if not word:
        raise ValueError("word must be non-empty")
    if word[0].isupper() or any(ch.isdigit() for ch in word):
        return word
    lowered = word.lower()
    if lowered in dictionary:
        return word
    pool = dictionary.candidates_within_two(lowered)
    best: tuple[int, int, str] | None = None
    for cand in pool:
        dist = edit_distance(lowered, cand, cap=2)
        if dist > 2:
            continue
        key = (dist, -dictionary.word_frequencies[cand], cand)
        if best is None or key < best:
            best = key
    return best[2] if best else word


# Spans that must never be "corrected": e-mail addresses and URLs, whose
# lowercase fragments are not prose vocabulary.
_PROTECTED_RE = re.compile(
    r"[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}"
    r"|(?:https?://|www\.)[^\s]+",
)


def correct_spelling(text: str, language: str, dictionary: SpellDictionary | None = None) -> str:
    """Apply suggest() to word runs; separators are preserved byte-exact."""
    if dictionary is None:
        dictionary = load_dictionary(language)
    if dictionary.language != language:
        raise DictionaryMissing(f"dictionary is for {dictionary.language!r}, not {language!r}")

    protected = [m.span() for m in _PROTECTED_RE.finditer(text)]

    def is_protected(start: int, end: int) -> bool:
        return any(ps <= start and end <= pe for ps, pe in protected)

    out: list[str] = []
    pos = 0
    for m in _WORD_RE.finditer(text):
        out.append(text[pos : m.start()])
        token = m.group()
        out.append(token if is_protected(m.start(), m.end()) else suggest(token, dictionary))
        pos = m.end()
    out.append(text[pos:])
    return "".join(out)


# ---------------------------------------------------------------------------
# OCR adapters


@dataclass
class OcrResult:
    text: str
    mean_confidence: float | None = None
    engine_id: str = ""

    def __post_init__(self) -> None:
        if self.mean_confidence is not None and not 0.0 <= self.mean_confidence <= 1.0:
            raise ValueError("mean_confidence must be in [0, 1]")


class GlyphCellOcr:
    """Deterministic stub engine: exact inverse of the block-cell renderer."""

    engine_id = "glyph-cell-stub"

    def recognize(self, raster: PageRaster, language: str) -> OcrResult:
        try:
            text = glyphcells.decode_text(raster.pixels)
        except glyphcells.GlyphDecodeError as exc:
            raise EngineError(str(exc)) from exc
        return OcrResult(text=text, mean_confidence=1.0, engine_id=self.engine_id)


class CommandOcr:
    """External engine adapter: command gets an image path and a language code,
    prints recognized UTF-8 text on stdout, exits 0 on success."""

    def __init__(self, command_template: str):
        self.command_template = command_template
        self.engine_id = f"command:{command_template.split()[0]}"

    def recognize(self, raster: PageRaster, language: str) -> OcrResult:
        import shlex

        with tempfile.NamedTemporaryFile(suffix=".png", prefix="docfields-ocr-", delete=True) as tmp:
            tmp.write(encode_png(raster))
            tmp.flush()
            cmd = [
                part.format(image=tmp.name, lang=language)
                for part in shlex.split(self.command_template)
            ]
            try:
                proc = subprocess.run(cmd, capture_output=True, timeout=300)
            except (OSError, subprocess.TimeoutExpired) as exc:
                raise EngineError(f"OCR command failed to run: {exc}") from exc
        if proc.returncode != 0:
            raise EngineError(f"OCR command exited {proc.returncode}: {proc.stderr.decode('utf-8', 'replace')[:300]}")
        return OcrResult(text=proc.stdout.decode("utf-8"), mean_confidence=None, engine_id=self.engine_id)


def ocr(raster: PageRaster, lang_hint: str, adapter=None) -> OcrResult:
    """Invoke the configured OCR adapter with a language hint."""
    if adapter is None:
        raise AdapterUnavailable("no OCR adapter configured")
    return adapter.recognize(raster, lang_hint)


# ---------------------------------------------------------------------------
# Documents and the extraction pipeline


@dataclass
class Document:
    format: DocumentFormat
    text: str | None = None  # plain-text documents only
    rasters: list[PageRaster] = field(default_factory=list)


def load_document(
    data: bytes,
    filename_hint: str = "",
    rasterizer_cmd: str | None = None,
    dpi: int = 300,
) -> Document:
    fmt = detect_format(data, filename_hint)
    if fmt is DocumentFormat.PLAIN_TEXT:
        return Document(format=fmt, text=data.decode("utf-8"))
    if fmt is DocumentFormat.PDF:
        return Document(format=fmt, rasters=rasterize_pdf(data, dpi=dpi, command_template=rasterizer_cmd))
    return Document(format=fmt, rasters=[decode_image(data, fmt)])


@dataclass
class StageConfig:
    """Enable flags and knobs for the extraction pipeline stages."""

    preprocess_enabled: bool = True
    language_detection: bool = True
    default_language: str = "nl"
    spell_check: bool = True
    llm_correction: bool = False
    llm_best_effort: bool = False
    correction_template: str = "correct_only"


@dataclass
class ExtractedText:
    text: str
    language: str
    stages_applied: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def llm_correct(text: str, gateway: gw.LlmGateway | None, template_id: str = "correct_only") -> str:
    """Run the correction prompt through the gateway and return its output verbatim."""
    if gateway is None:
        raise gw.GatewayError("no gateway configured for LLM correction")
    prompt = gw.render(template_id, {"text": text})
    return gateway.complete(prompt)


def extract_text(
    document: Document,
    stages: StageConfig | None = None,
    preprocess_config: PreprocessConfig | None = None,
    ocr_adapter=None,
    gateway: gw.LlmGateway | None = None,
) -> ExtractedText:
    """Run the extraction pipeline over an ingested document.

    Plain-text input skips preprocessing and OCR.  stages_applied records
    exactly what ran, in order; a failing LLM stage downgrades to a warning
    when llm_best_effort is set.
    """
    stages = stages or StageConfig()
    applied: list[str] = []
    warnings_out: list[str] = []

    if document.format is DocumentFormat.PLAIN_TEXT:
        text = document.text or ""
    else:
        pages = []
        for raster in document.rasters:
            page = preprocess(raster, preprocess_config) if stages.preprocess_enabled else raster
            pages.append(ocr(page, stages.default_language, ocr_adapter).text)
        text = "\n".join(pages)
        applied.append("ocr")

    language = stages.default_language
    if stages.language_detection:
        try:
            language = detect_language(text)
            applied.append("language_detection")
        except NoAlphabeticContent:
            warnings_out.append("language detection skipped: no alphabetic content")

    if stages.spell_check:
        text = correct_spelling(text, language)
        applied.append("spell_check")

    if stages.llm_correction:
        try:
            text = llm_correct(text, gateway, stages.correction_template)
            applied.append("llm_correction")
        except gw.GatewayError as exc:
            if not stages.llm_best_effort:
                # surface what the pipeline had produced before the failure
                exc.partial = ExtractedText(text=text, language=language, stages_applied=applied, warnings=warnings_out)
                raise
            warnings_out.append(f"llm correction skipped: {exc}")

    return ExtractedText(text=text, language=language, stages_applied=applied, warnings=warnings_out)
