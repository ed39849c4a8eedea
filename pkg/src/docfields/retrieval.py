"""Field retrieval cascade: fuzzy regular expressions, then NER, then the LLM.

Queries are normalized to a routing category.  Stages run strictly in
cascade order, a stage is skipped when it cannot apply to the category, and
the first stage producing matches short-circuits the rest.  Every match
carries the stage that produced it.
"""

from __future__ import annotations

import datetime
import json
import re
import subprocess
import unicodedata
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import gateway as gw

CATALOG_CATEGORIES = (
    "email",
    "phone",
    "website",
    "iban",
    "date",
    "amount",
    "address",
    "postal_code",
    "vat_number",
)
NER_CATEGORIES = ("person", "organization", "location", "language")

STAGE_FUZZY = "fuzzy_regex"
STAGE_NER = "ner"
STAGE_LLM = "llm"
STAGE_ORDER = (STAGE_FUZZY, STAGE_NER, STAGE_LLM)


class RetrievalError(Exception):
    pass


class EmptyQuery(RetrievalError):
    pass


class NoCatalogEntry(RetrievalError):
    pass


class BackendUnavailable(RetrievalError):
    pass


class AllStagesFailed(RetrievalError):
    def __init__(self, message: str, result: "RetrievalResult"):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class FieldQuery:
    raw: str
    key: str
    category: str


@dataclass
class Match:
    value: str
    stage: str
    confidence: float
    span: tuple[int, int] | None = None

    def to_dict(self) -> dict:
        out = {"value": self.value, "stage": self.stage, "confidence": self.confidence}
        if self.span is not None:
            out["span"] = [self.span[0], self.span[1]]
        return out


@dataclass
class RetrievalResult:
    query: FieldQuery
    matches: list[Match] = field(default_factory=list)
    stage_fired: str | None = None
    stages_attempted: list[str] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "query": {"raw": self.query.raw, "key": self.query.key, "category": self.query.category},
            "matches": [m.to_dict() for m in self.matches],
            "stage_fired": self.stage_fired,
            "stages_attempted": list(self.stages_attempted),
            "errors": list(self.errors),
        }


# ---------------------------------------------------------------------------
# Query normalization

_SYNONYMS: dict[str, str] = {}


def _add_synonyms(category: str, *keys: str) -> None:
    for key in keys:
        _SYNONYMS[key] = category


_add_synonyms("email", "e mail", "email", "mail", "mail address", "email address",
              "e mail address", "e mailadres", "emailadres", "mailadres")
_add_synonyms("phone", "phone", "telephone", "phone number", "telephone number", "phone no",
              "mobile", "mobile number", "telefoon", "telefoonnummer", "mobiel", "tel")
_add_synonyms("website", "website", "web site", "url", "homepage", "web address", "webadres", "site")
_add_synonyms("iban", "iban", "bank account", "bank account number", "account number",
              "international bank account number", "rekeningnummer", "bankrekening")
_add_synonyms("date", "date", "invoice date", "due date", "order date", "datum",
              "factuurdatum", "vervaldatum")
_add_synonyms("amount", "amount", "total", "total amount", "invoice amount", "sum",
              "price", "bedrag", "totaalbedrag", "totaal", "factuurbedrag")
_add_synonyms("address", "address", "street address", "postal address", "home address",
              "adres", "woonadres")
_add_synonyms("postal_code", "postal code", "zip", "zip code", "postcode", "zipcode")
_add_synonyms("vat_number", "vat", "vat number", "vat id", "btw", "btw nummer",
              "btwnummer", "tax number")
_add_synonyms("person", "name", "candidate name", "person", "full name", "contact person",
              "candidate", "naam", "kandidaat", "persoon", "applicant")
_add_synonyms("organization", "organization", "organisation", "company", "seller", "vendor",
              "supplier", "employer", "bedrijf", "verkoper", "leverancier", "werkgever", "firma")
_add_synonyms("location", "location", "city", "place", "country", "plaats", "stad", "locatie", "land")
_add_synonyms("language", "language", "languages", "taal", "talen", "spoken languages", "talenkennis")


def _strip_diacritics(text: str) -> str:
    decomposed = unicodedata.normalize("NFKD", text)
    return "".join(ch for ch in decomposed if not unicodedata.combining(ch))


def normalize_query(raw: str, synonyms: dict[str, str] | None = None) -> FieldQuery:
    """Case-fold, strip diacritics, collapse separator runs, resolve synonyms.

    Keys that match no synonym and no category name become freeform, which
    routes straight to the LLM stage.
    """
    if not raw or not raw.strip():
        raise EmptyQuery("query must be non-empty")
    key = _strip_diacritics(raw.casefold())
    key = re.sub(r"[-_\s]+", " ", key).strip()
    table = dict(_SYNONYMS)
    if synonyms:
        table.update({normalize_key(k): v for k, v in synonyms.items()})
    squashed = key.replace(" ", "")
    for candidate in (key, squashed):
        if candidate in table:
            return FieldQuery(raw=raw, key=key, category=table[candidate])
        if candidate in CATALOG_CATEGORIES or candidate in NER_CATEGORIES:
            return FieldQuery(raw=raw, key=key, category=candidate)
    return FieldQuery(raw=raw, key=key, category="freeform")


def normalize_key(raw: str) -> str:
    return re.sub(r"[-_\s]+", " ", _strip_diacritics(raw.casefold())).strip()


# ---------------------------------------------------------------------------
# Validators (post filters)


def iban_mod97(candidate: str) -> bool:
    """ISO 13616 checksum: rearranged, letters mapped A=10..Z=35, mod 97 == 1."""
    compact = candidate.replace(" ", "").upper()
    if not 15 <= len(compact) <= 34 or not compact.isalnum():
        return False
    if not (compact[:2].isalpha() and compact[2:4].isdigit()):
        return False
    rearranged = compact[4:] + compact[:4]
    digits = "".join(str(int(ch, 36)) for ch in rearranged)
    return int(digits) % 97 == 1


_MONTHS = {
    "januari": 1, "february": 2, "februari": 2, "march": 3, "maart": 3, "april": 4,
    "may": 5, "mei": 5, "june": 6, "juni": 6, "july": 7, "juli": 7, "august": 8,
    "augustus": 8, "september": 9, "october": 10, "oktober": 10, "november": 11,
    "december": 12, "january": 1,
}


def plausible_date(candidate: str) -> bool:
    """Accept only calendar-valid dates (day-first for numeric forms)."""
    text = candidate.strip()
    m = re.fullmatch(r"(\d{4})-(\d{2})-(\d{2})", text)
    if m:
        year, month, day = map(int, m.groups())
    else:
        m = re.fullmatch(r"(\d{1,2})[-/](\d{1,2})[-/](\d{4})", text)
        if m:
            day, month, year = map(int, m.groups())
        else:
            m = re.fullmatch(r"(\d{1,2}) ([A-Za-z]+) (\d{4})", text)
            if not m:
                return False
            day = int(m.group(1))
            month = _MONTHS.get(m.group(2).lower(), 0)
            year = int(m.group(3))
    if not 1900 <= year <= 2099 or month == 0:
        return False
    try:
        datetime.date(year, month, day)
    except ValueError:
        return False
    return True


def nl_phone(candidate: str) -> bool:
    digits = re.sub(r"\D", "", candidate)
    if candidate.lstrip().startswith("+31"):
        return len(digits) == 11  # 31 + nine subscriber digits
    return len(digits) == 10 and digits.startswith("0")


VALIDATORS = {
    "iban_mod97": iban_mod97,
    "plausible_date": plausible_date,
    "nl_phone": nl_phone,
}


# ---------------------------------------------------------------------------
# Pattern catalog

_MONTH_NAMES = (
    "januari|februari|maart|april|mei|juni|juli|augustus|september|oktober|november|december"
    "|january|february|march|may|june|july|august|october"
)

DEFAULT_PATTERNS: dict[str, dict] = {
    "email": {
        # Word-boundary anchored local@domain.tld with a 2+ letter TLD.
        "pattern": r"\b[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}\b",
        "post_filter": None,
    },
    "phone": {
        "pattern": r"(?<![\w+])(?:\+31(?:[ -]?\d){9}|0\d{1,3}[ -]?\d{6,8})(?!\w)",
        "post_filter": "nl_phone",
    },
    "website": {
        "pattern": r"\b(?:https?://[^\s\"'<>]+|www\.[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)+(?:/[^\s\"'<>]*)?)",
        "post_filter": None,
    },
    "iban": {
        "pattern": r"\b(?:[A-Z]{2}\d{2}[A-Z0-9]{11,30}|[A-Z]{2}\d{2}(?: [A-Z0-9]{4}){2,7}(?: [A-Z0-9]{1,4})?)\b",
        "post_filter": "iban_mod97",
    },
    "date": {
        "pattern": (
            r"\b(?:\d{4}-\d{2}-\d{2}|\d{1,2}[-/]\d{1,2}[-/]\d{4}"
            r"|\d{1,2} (?i:" + _MONTH_NAMES + r") \d{4})\b"
        ),
        "post_filter": "plausible_date",
    },
    "amount": {
        "pattern": r"(?:€|EUR)\s?\d+(?:[.,]\d{3})*(?:[.,]\d{2})?(?!\d)",
        "post_filter": None,
    },
    "address": {
        "pattern": (
            r"\b[A-Z][a-zà-ÿ]+(?: [A-Z][a-zà-ÿ]+)* \d{1,4}[a-z]?, "
            r"\d{4} ?[A-Z]{2} [A-Z][a-zà-ÿ]+(?: [A-Z][a-zà-ÿ]+)*(?: aan den [A-Z][a-zà-ÿ]+)?\b"
        ),
        "post_filter": None,
    },
    "postal_code": {
        "pattern": r"\b\d{4} ?[A-Z]{2}\b",
        "post_filter": None,
    },
    "vat_number": {
        "pattern": r"\b[A-Z]{2}\d{9}B\d{2}\b|\b[A-Z]{2}\d{8,12}\b",
        "post_filter": None,
    },
}


class PatternCatalog:
    """The nine compiled field patterns plus optional post filters."""

    def __init__(self, entries: dict[str, dict] | None = None):
        entries = entries if entries is not None else DEFAULT_PATTERNS
        if set(entries) != set(CATALOG_CATEGORIES):
            raise ValueError(
                f"catalog must define exactly the nine categories {sorted(CATALOG_CATEGORIES)}, "
                f"got {sorted(entries)}"
            )
        self.entries: dict[str, dict] = {}
        for category, spec in entries.items():
            pattern = spec["pattern"]
            post_filter = spec.get("post_filter")
            if post_filter is not None and post_filter not in VALIDATORS:
                raise ValueError(f"unknown post_filter {post_filter!r} for {category}")
            self.entries[category] = {
                "pattern": pattern,
                "compiled": re.compile(pattern),
                "post_filter": post_filter,
            }

    @classmethod
    def from_json(cls, path: str | Path) -> "PatternCatalog":
        overrides = json.loads(Path(path).read_text(encoding="utf-8"))
        merged = {cat: dict(spec) for cat, spec in DEFAULT_PATTERNS.items()}
        for category, spec in overrides.items():
            if category not in merged:
                raise ValueError(f"cannot add category {category!r}: the catalog is fixed at nine entries")
            merged[category] = {"pattern": spec["pattern"], "post_filter": spec.get("post_filter")}
        return cls(merged)

    def __contains__(self, category: str) -> bool:
        return category in self.entries


_default_catalog: PatternCatalog | None = None


def default_catalog() -> PatternCatalog:
    global _default_catalog
    if _default_catalog is None:
        _default_catalog = PatternCatalog()
    return _default_catalog


def match_fuzzy_regex(text: str, query: FieldQuery, catalog: PatternCatalog | None = None) -> list[Match]:
    """All non-overlapping pattern matches in document order, post-filtered."""
    catalog = catalog or default_catalog()
    if query.category not in catalog:
        raise NoCatalogEntry(f"no pattern for category {query.category!r}")
    entry = catalog.entries[query.category]
    validator = VALIDATORS[entry["post_filter"]] if entry["post_filter"] else None
    matches = []
    for m in entry["compiled"].finditer(text):
        value = m.group()
        if validator is not None and not validator(value):
            continue
        matches.append(Match(value=value, stage=STAGE_FUZZY, confidence=1.0, span=(m.start(), m.end())))
    return matches


# ---------------------------------------------------------------------------
# Named-entity recognition backends


def _gazetteer_lines(name: str) -> list[str]:
    text = resources.files("docfields.data").joinpath(name).read_text(encoding="utf-8")
    return [line.strip() for line in text.splitlines() if line.strip()]


_PARTICLES = frozenset({"de", "van", "der", "den", "te", "ter", "op", "'t", "d'", "von", "aan", "het"})

_ORG_SUFFIXES = frozenset(
    {"B.V.", "B.V", "BV", "N.V.", "N.V", "NV", "GmbH", "Inc", "Inc.", "Ltd", "Ltd.", "LLC",
     "V.O.F.", "VOF", "Corp", "Corp.", "Co.", "AG", "S.A.", "SA", "PLC"}
)

_TOKEN_RE = re.compile(r"[A-Za-zÀ-ÿ'][A-Za-zÀ-ÿ0-9.&'-]*")


class GazetteerNer:
    """Dictionary-driven recognizer over capitalized token sequences.

    Persons anchor on a first-name list (or whole-name entries), languages
    and locations on lexicons, organizations on legal-form suffixes like
    "B.V." or "GmbH".
    """

    backend_id = "gazetteer"
    confidence = 0.9

    def __init__(
        self,
        first_names: set[str] | None = None,
        person_names: set[str] | None = None,
        cities: set[str] | None = None,
        languages: set[str] | None = None,
    ):
        if first_names is None:
            first_names = set(_gazetteer_lines("pools/first_names.txt"))
        if cities is None:
            cities = set(_gazetteer_lines("pools/cities.txt"))
        if languages is None:
            languages = set(_gazetteer_lines("gazetteers/languages.txt"))
        self.first_names = {n.casefold() for n in first_names}
        self.person_names = set(person_names or ())
        self.cities = cities
        self.languages = languages

    def entities(self, text: str, etype: str, language: str = "nl") -> list[Match]:
        tokens = [(m.start(), m.end(), m.group()) for m in _TOKEN_RE.finditer(text)]
        if etype == "person":
            spans = self._persons(text, tokens)
        elif etype == "organization":
            spans = self._organizations(text, tokens)
        elif etype == "location":
            spans = self._lexicon_spans(text, tokens, self.cities)
        elif etype == "language":
            spans = self._lexicon_spans(text, tokens, self.languages)
        else:
            raise ValueError(f"unknown entity type {etype!r}")
        return [
            Match(value=text[s:e], stage=STAGE_NER, confidence=self.confidence, span=(s, e))
            for s, e in _drop_overlaps(spans)
        ]

    @staticmethod
    def _make_adjacent(text, tokens):
        # Tokens continue one phrase only across a single literal space;
        # newlines and punctuation break the sequence.
        def adjacent(i: int) -> bool:
            return tokens[i + 1][0] == tokens[i][1] + 1 and text[tokens[i][1]] == " "

        return adjacent

    def _persons(self, text, tokens):
        adjacent = self._make_adjacent(text, tokens)
        spans = []
        for name in self.person_names:
            for m in re.finditer(rf"(?<![\w']){re.escape(name)}(?![\w'])", text):
                spans.append(m.span())
        i = 0
        while i < len(tokens):
            start, end, tok = tokens[i]
            if tok[0].isupper() and tok.casefold() in self.first_names:
                j = i
                last_cap = i
                while j + 1 < len(tokens) and adjacent(j):
                    nxt = tokens[j + 1][2]
                    if nxt in _PARTICLES:
                        j += 1
                    elif nxt[0].isupper() and not nxt.rstrip(".") in _ORG_SUFFIXES:
                        j += 1
                        last_cap = j
                    else:
                        break
                if last_cap > i:
                    spans.append((start, tokens[last_cap][1]))
                    i = last_cap + 1
                    continue
            i += 1
        return spans

    def _organizations(self, text, tokens):
        adjacent = self._make_adjacent(text, tokens)
        spans = []
        for i, (start, end, tok) in enumerate(tokens):
            if tok in _ORG_SUFFIXES:
                first = i
                while (
                    first > 0
                    and tokens[first - 1][2][0].isupper()
                    and tokens[first - 1][2] not in _ORG_SUFFIXES
                    and adjacent(first - 1)
                ):
                    first -= 1
                if first < i:
                    spans.append((tokens[first][0], end))
        return spans

    def _lexicon_spans(self, text, tokens, lexicon):
        adjacent = self._make_adjacent(text, tokens)
        by_len = sorted(lexicon, key=lambda e: -len(e.split()))
        spans = []
        for entry in by_len:
            n = len(entry.split())
            for i in range(len(tokens)):
                j = i + n - 1
                if j >= len(tokens):
                    continue
                if any(not adjacent(k) for k in range(i, j)):
                    continue
                candidate = text[tokens[i][0] : tokens[j][1]]
                if candidate == entry:
                    spans.append((tokens[i][0], tokens[j][1]))
        return spans


def _drop_overlaps(spans):
    chosen: list[tuple[int, int]] = []
    for start, end in sorted(set(spans), key=lambda s: (s[0], -(s[1] - s[0]))):
        if not chosen or start >= chosen[-1][1]:
            chosen.append((start, end))
    return chosen


_NER_TYPE_ALIASES = {
    "person": "person", "per": "person", "persons": "person",
    "organization": "organization", "org": "organization",
    "location": "location", "loc": "location", "gpe": "location",
    "language": "language", "lang": "language",
}


class CommandNerBackend:
    """External adapter: command gets the language code as an argument, the
    text on stdin, and emits JSONL entities {value, type, start, end}."""

    backend_id = "command"

    def __init__(self, command_template: str):
        self.command_template = command_template

    def entities(self, text: str, etype: str, language: str = "nl") -> list[Match]:
        import shlex

        cmd = [part.format(lang=language) for part in shlex.split(self.command_template)]
        try:
            proc = subprocess.run(cmd, input=text.encode("utf-8"), capture_output=True, timeout=300)
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise BackendUnavailable(f"NER command failed to run: {exc}") from exc
        if proc.returncode != 0:
            raise BackendUnavailable(f"NER command exited {proc.returncode}")
        matches = []
        for line in proc.stdout.decode("utf-8").splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            if _NER_TYPE_ALIASES.get(str(obj.get("type", "")).lower()) != etype:
                continue
            span = None
            if obj.get("start") is not None and obj.get("end") is not None:
                span = (int(obj["start"]), int(obj["end"]))
            matches.append(
                Match(value=obj["value"], stage=STAGE_NER,
                      confidence=float(obj.get("confidence", 0.8)), span=span)
            )
        return matches


def match_ner(text: str, query: FieldQuery, language: str = "nl", backend=None) -> list[Match]:
    """Entities of the query's mapped type, in document order."""
    if query.category not in NER_CATEGORIES:
        raise ValueError(f"category {query.category!r} is not an entity category")
    if backend is None:
        raise BackendUnavailable("no NER backend configured")
    return backend.entities(text, query.category, language)


# ---------------------------------------------------------------------------
# LLM stage

_NONE_LIKE = frozenset(
    {"none", "n/a", "na", "-", "null", "not found", "no match", "none found",
     "geen", "niets", "onbekend", "unknown", ""}
)


def llm_retrieve(text: str, query: FieldQuery, gateway: gw.LlmGateway | None = None) -> list[Match]:
    """Ask the gateway for the field; values split on newlines and semicolons."""
    if gateway is None:
        raise gw.GatewayError("no gateway configured")
    prompt = gw.render("retrieve_field", {"user_input": query.raw, "text": text})
    response = gateway.complete(prompt)
    values = []
    for chunk in re.split(r"[\n;]+", response):
        value = chunk.strip().strip('"').strip()
        if value.rstrip(".").strip().lower() in _NONE_LIKE:
            continue
        values.append(value)
    return [Match(value=v, stage=STAGE_LLM, confidence=0.5, span=None) for v in values]


# ---------------------------------------------------------------------------
# Cascade

DEFAULT_ROUTES: dict[str, tuple[str, ...]] = {
    **{cat: (STAGE_FUZZY, STAGE_LLM) for cat in CATALOG_CATEGORIES},
    "person": (STAGE_NER, STAGE_LLM),
    "organization": (STAGE_NER, STAGE_LLM),
    "location": (STAGE_NER, STAGE_LLM),
    # Free-text "language" queries confuse an LLM into answering with the
    # document language, so this category stays on the entity recognizer.
    "language": (STAGE_NER,),
    "freeform": (STAGE_LLM,),
}


def retrieve(
    text: str,
    query: FieldQuery | str,
    catalog: PatternCatalog | None = None,
    ner_backend=None,
    gateway: gw.LlmGateway | None = None,
    routes: dict[str, tuple[str, ...]] | None = None,
    language: str = "nl",
) -> RetrievalResult:
    """Run the cascade for one query and return matches with provenance.

    Stages run in the fixed order fuzzy_regex -> ner -> llm, restricted to
    the stages applicable to the query category; the first stage that
    yields matches wins.  Empty matches everywhere is a valid outcome;
    AllStagesFailed is raised only when every applicable stage errored.
    """
    if not text:
        raise ValueError("text must be non-empty")
    if isinstance(query, str):
        query = normalize_query(query)
    catalog = catalog or default_catalog()
    route_table = routes or DEFAULT_ROUTES
    plan = [s for s in STAGE_ORDER if s in route_table.get(query.category, (STAGE_LLM,))]
    if STAGE_FUZZY in plan and query.category not in catalog:
        plan.remove(STAGE_FUZZY)
    result = RetrievalResult(query=query)
    for stage in plan:
        result.stages_attempted.append(stage)
        try:
            if stage == STAGE_FUZZY:
                matches = match_fuzzy_regex(text, query, catalog)
            elif stage == STAGE_NER:
                matches = match_ner(text, query, language=language, backend=ner_backend)
            else:
                matches = llm_retrieve(text, query, gateway)
        except (RetrievalError, gw.GatewayError) as exc:
            result.errors.append(f"{stage}: {exc}")
            continue
        if matches:
            result.matches = matches
            result.stage_fired = stage
            break
    if result.stages_attempted and len(result.errors) == len(result.stages_attempted):
        raise AllStagesFailed("every applicable stage errored", result)
    return result


def retrieve_all(
    text: str,
    queries: list[FieldQuery | str],
    **kwargs,
) -> list[RetrievalResult]:
    """Element-wise retrieve with per-query failure isolation."""
    results = []
    for query in queries:
        try:
            results.append(retrieve(text, query, **kwargs))
        except AllStagesFailed as exc:
            results.append(exc.result)
    return results
