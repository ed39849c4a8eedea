"""Seeded synthetic-document generator with machine-readable ground truth.

Resumes vary section order, section titles, contact labels, separators and
content, drawn from fixed pools (70 occupations, 50 work experiences, 30
academic backgrounds, plus names, streets, cities and skills).  Every truth
value appears character-for-character in the rendered text, which is what
licenses perfect-score expectations for the pattern-matched fields.

All randomness comes from a SplitMix64 generator, so a document is a pure
function of its seed: state advances by the golden-gamma constant
0x9E3779B97F4A7C15 and each output is finalized with two xor-shift
multiplies (0xBF58476D1CE4E5B9, 0x94D049BB133111EB).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import glyphcells
from .gateway import LlmGateway, Transcript, render
from .imaging import PageRaster
from .textextract import Document, DocumentFormat, StageConfig, extract_text

TextTooLarge = glyphcells.TextTooLarge

_MASK = (1 << 64) - 1


class SplitMix64:
    """Deterministic 64-bit generator driving every corpus choice."""

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def randbelow(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        limit = _MASK + 1 - (_MASK + 1) % n
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def randint(self, a: int, b: int) -> int:
        return a + self.randbelow(b - a + 1)

    def choice(self, seq):
        return seq[self.randbelow(len(seq))]

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample(self, seq, k: int) -> list:
        pool = list(seq)
        self.shuffle(pool)
        return pool[:k]


# ---------------------------------------------------------------------------
# Pools


def _pool_lines(name: str) -> list[str]:
    text = resources.files("docfields.data.pools").joinpath(name).read_text(encoding="utf-8")
    return [line.strip() for line in text.splitlines() if line.strip()]


@dataclass
class GeneratorPools:
    occupations: list[str]
    work_experiences: list[str]
    academic_backgrounds: list[str]
    section_synonyms: dict[str, list[str]]
    first_names: list[str]
    last_names: list[str]
    streets: list[str]
    cities: list[str]
    domains: list[str]
    hard_skills: list[str]
    soft_skills: list[str]
    languages: list[str]

    def __post_init__(self) -> None:
        if len(self.occupations) != 70:
            raise ValueError(f"occupations pool must hold exactly 70 entries, got {len(self.occupations)}")
        if len(self.work_experiences) != 50:
            raise ValueError(f"work experiences pool must hold exactly 50 entries, got {len(self.work_experiences)}")
        if len(self.academic_backgrounds) != 30:
            raise ValueError(
                f"academic backgrounds pool must hold exactly 30 entries, got {len(self.academic_backgrounds)}"
            )
        for canonical, alternatives in self.section_synonyms.items():
            if len(alternatives) < 4:
                raise ValueError(f"section {canonical!r} needs at least 4 title alternatives")

    @property
    def digest(self) -> str:
        blob = json.dumps(
            {
                "occupations": self.occupations,
                "work_experiences": self.work_experiences,
                "academic_backgrounds": self.academic_backgrounds,
                "section_synonyms": self.section_synonyms,
                "first_names": self.first_names,
                "last_names": self.last_names,
                "streets": self.streets,
                "cities": self.cities,
                "domains": self.domains,
                "hard_skills": self.hard_skills,
                "soft_skills": self.soft_skills,
                "languages": self.languages,
            },
            sort_keys=True,
            ensure_ascii=False,
        )
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


_default_pools: GeneratorPools | None = None


def default_pools() -> GeneratorPools:
    global _default_pools
    if _default_pools is None:
        synonyms = json.loads(
            resources.files("docfields.data.pools").joinpath("section_titles.json").read_text(encoding="utf-8")
        )
        _default_pools = GeneratorPools(
            occupations=_pool_lines("occupations.txt"),
            work_experiences=_pool_lines("experiences.txt"),
            academic_backgrounds=_pool_lines("academics.txt"),
            section_synonyms=synonyms,
            first_names=_pool_lines("first_names.txt"),
            last_names=_pool_lines("last_names.txt"),
            streets=_pool_lines("streets.txt"),
            cities=_pool_lines("cities.txt"),
            domains=_pool_lines("domains.txt"),
            hard_skills=_pool_lines("hard_skills.txt"),
            soft_skills=_pool_lines("soft_skills.txt"),
            languages=_pool_lines("languages.txt"),
        )
    return _default_pools


# ---------------------------------------------------------------------------
# Resume generation


@dataclass
class ResumeTruth:
    name: str
    address: str
    email: str
    phone: str
    education: str
    job_title: str
    languages: list[str]
    hard_skills: list[str]
    soft_skills: list[str]


@dataclass
class RenderedDoc:
    text: str
    layout_descriptor: dict
    seed: int


_NAME_LABELS = ("Naam", "Name", "Kandidaat")
_ADDRESS_LABELS = ("Adres", "Address", "Woonadres")
_EMAIL_LABELS = ("E-mail", "Email", "Mail", "Contact")
_PHONE_LABELS = ("Telefoon", "Tel", "Telefoonnummer", "Mobiel")

# Lowercase vocabulary here must stay inside the shipped Dutch dictionary;
# tests enforce that, which keeps spell correction a no-op on the corpus.
_PROFILE_TEMPLATES = (
    "Ervaren {occupation} met {years} jaar werkervaring.",
    "Gedreven {occupation} met passie voor het vak.",
    "Enthousiaste {occupation}, {years} jaar ervaring, sterk in samenwerken.",
    "Resultaatgerichte {occupation} met ruime ervaring in teamverband.",
)


def _postal_code(rng: SplitMix64) -> str:
    letters = "".join(chr(ord("A") + rng.randbelow(26)) for _ in range(2))
    return f"{rng.randint(1000, 9999)} {letters}"


def _squash_name(part: str) -> str:
    return part.replace(" ", "").replace("'", "").lower()


def generate_resume(seed: int, pools: GeneratorPools | None = None) -> tuple[ResumeTruth, RenderedDoc]:
    """Deterministically build one resume: same seed, byte-identical output."""
    pools = pools or default_pools()
    rng = SplitMix64(seed)

    first = rng.choice(pools.first_names)
    last = rng.choice(pools.last_names)
    name = f"{first} {last}"
    street = rng.choice(pools.streets)
    city = rng.choice(pools.cities)
    address = f"{street} {rng.randint(1, 199)}, {_postal_code(rng)} {city}"
    email = f"{_squash_name(first)}.{_squash_name(last)}@{rng.choice(pools.domains)}"
    digits = "".join(str(rng.randbelow(10)) for _ in range(8))
    phone = f"+31 6 {digits}" if rng.randbelow(2) else f"06-{digits}"
    occupation = rng.choice(pools.occupations)
    years = rng.randint(2, 25)
    experiences = rng.sample(pools.work_experiences, rng.randint(2, 4))
    academics = rng.sample(pools.academic_backgrounds, rng.randint(1, 2))
    hard = rng.sample(pools.hard_skills, rng.randint(3, 6))
    soft = rng.sample(pools.soft_skills, rng.randint(2, 4))
    langs = rng.sample(pools.languages, rng.randint(2, 4))

    titles = {sec: rng.choice(alts) for sec, alts in pools.section_synonyms.items()}
    labels = {
        "name": rng.choice(_NAME_LABELS),
        "address": rng.choice(_ADDRESS_LABELS),
        "email": rng.choice(_EMAIL_LABELS),
        "phone": rng.choice(_PHONE_LABELS),
    }
    bullet = rng.choice(("- ", "• ", "* "))
    separator_style = rng.choice(("em-dash", "equals", "blank"))
    list_style = rng.choice(("bullets", "comma"))

    contact_lines = [
        f"{labels['name']}: {name}",
        f"{labels['address']}: {address}",
        f"{labels['email']}: {email}",
        f"{labels['phone']}: {phone}",
    ]
    rng.shuffle(contact_lines)

    profile_line = rng.choice(_PROFILE_TEMPLATES).format(occupation=occupation, years=years)

    def listing(items: list[str]) -> list[str]:
        if list_style == "bullets":
            return [f"{bullet}{item}" for item in items]
        return [", ".join(items)]

    sections: dict[str, list[str]] = {
        "contact": contact_lines,
        "profile": [profile_line],
        "experience": [f"{bullet}{e}" for e in experiences],
        "education": [f"{bullet}{a}" for a in academics] if len(academics) > 1 else [academics[0]],
        "hard_skills": listing(hard),
        "soft_skills": listing(soft),
        "languages": [", ".join(langs)],
    }
    order = list(sections)
    rng.shuffle(order)

    if separator_style == "em-dash":
        separator = "—" * 28
    elif separator_style == "equals":
        separator = "=" * 28
    else:
        separator = ""

    lines: list[str] = []
    for section in order:
        lines.append(titles[section])
        if separator:
            lines.append(separator)
        lines.extend(sections[section])
        lines.append("")
    text = "\n".join(lines).rstrip("\n")

    truth = ResumeTruth(
        name=name,
        address=address,
        email=email,
        phone=phone,
        education=academics[0],
        job_title=occupation,
        languages=langs,
        hard_skills=hard,
        soft_skills=soft,
    )
    doc = RenderedDoc(
        text=text,
        layout_descriptor={
            "section_order": order,
            "titles": titles,
            "labels": labels,
            "separator": separator_style,
            "list_style": list_style,
            "bullet": bullet.strip(),
        },
        seed=seed,
    )
    return truth, doc


TRUTH_FIELDS = (
    "name",
    "address",
    "e-mail",
    "phone number",
    "education",
    "job title",
    "languages",
    "hard skills",
    "soft skills",
)

FREEFORM_FIELDS = ("education", "job title", "hard skills", "soft skills")


def _truth_map(truth: ResumeTruth) -> dict:
    return {
        "name": truth.name,
        "address": truth.address,
        "e-mail": truth.email,
        "phone number": truth.phone,
        "education": truth.education,
        "job title": truth.job_title,
        "languages": truth.languages,
        "hard skills": truth.hard_skills,
        "soft skills": truth.soft_skills,
    }


def generate_corpus(base_seed: int, n: int, pools: GeneratorPools | None = None) -> dict:
    """Corpus of n resumes with seeds base_seed .. base_seed + n - 1, in the
    evaluation module's ground-truth JSON format."""
    if n < 1:
        raise ValueError("n must be >= 1")
    pools = pools or default_pools()
    documents = []
    for seed in range(base_seed, base_seed + n):
        truth, doc = generate_resume(seed, pools)
        documents.append(
            {
                "doc_id": f"resume-{seed:08d}",
                "source": {"kind": "text", "value": doc.text},
                "truth": _truth_map(truth),
            }
        )
    return {
        "metadata": {
            "generator": "docfields.datasetgen",
            "base_seed": base_seed,
            "count": n,
            "pool_digest": pools.digest,
        },
        "documents": documents,
    }


def render_raster(doc: RenderedDoc, max_width: int = 4096, max_height: int = 8192) -> PageRaster:
    """Draw a generated document into the block-cell raster format that the
    stub OCR adapter reads back exactly."""
    return PageRaster(glyphcells.render_text(doc.text, max_width=max_width, max_height=max_height))


def build_replay_transcript(
    corpus: dict,
    path: str | Path | None = None,
    stages: StageConfig | None = None,
) -> Transcript:
    """Record the LLM answers a replay run needs: for every freeform field
    the retrieval prompt (rendered against the pipeline's extracted text)
    maps to the ground-truth value."""
    stages = stages or StageConfig()
    transcript = Transcript(path)
    for entry in corpus["documents"]:
        document = Document(format=DocumentFormat.PLAIN_TEXT, text=entry["source"]["value"])
        extracted = extract_text(document, stages)
        for field_name in FREEFORM_FIELDS:
            truth = entry["truth"].get(field_name)
            if truth is None:
                continue
            response = ", ".join(truth) if isinstance(truth, list) else truth
            prompt = render("retrieve_field", {"user_input": field_name, "text": extracted.text})
            transcript.record(prompt, response)
    return transcript


# ---------------------------------------------------------------------------
# Invoice-like fixtures


_BANK_CODES = ("ABNA", "INGB", "RABO", "TRIO", "BUNQ", "SNSB", "ASNB", "KNAB")


def make_iban(rng: SplitMix64, country: str = "NL") -> str:
    """Construct a checksum-valid IBAN from a random bank code and account."""
    bank = rng.choice(_BANK_CODES)
    account = "".join(str(rng.randbelow(10)) for _ in range(10))
    body = bank + account
    digits = "".join(str(int(ch, 36)) for ch in body + country + "00")
    check = 98 - int(digits) % 97
    return f"{country}{check:02d}{body}"


def generate_invoice_text(seed: int, pools: GeneratorPools | None = None) -> tuple[dict, str]:
    """Small invoice-shaped text fixture with ground truth for the
    pattern-matched fields."""
    pools = pools or default_pools()
    rng = SplitMix64(seed + 0x1A2B3C)
    seller = rng.choice(
        ("Vermeer Transport B.V.", "Kantoorgroep Midden B.V.", "Laboratorium Delta N.V.", "Drukkerij Letterzetter B.V.")
    )
    number = f"{rng.randint(2020, 2025)}-{rng.randint(1000, 9999)}"
    day, month, year = rng.randint(1, 28), rng.randint(1, 12), rng.randint(2020, 2025)
    date = f"{day:02d}-{month:02d}-{year}"
    cents = rng.randint(0, 99)
    euros = rng.randint(50, 9999)
    amount = f"€ {euros:,}".replace(",", ".") + f",{cents:02d}"
    iban = make_iban(rng)
    address = f"{rng.choice(pools.streets)} {rng.randint(1, 99)}, {_postal_code(rng)} {rng.choice(pools.cities)}"
    repeat_total = rng.randbelow(2)
    lines = [
        f"FACTUUR {number}",
        "",
        f"Verkoper: {seller}",
        f"Adres: {address}",
        f"Factuurdatum: {date}",
        f"Factuurnummer: {number}",
        "",
        "Omschrijving: Onderhoud en inspectie",
        f"Totaal: {amount}",
    ]
    if repeat_total:
        lines += ["", f"Te betalen: {amount}"]
    lines += ["", f"IBAN: {iban}", "Betaling binnen 30 dagen."]
    truth = {
        "invoice number": number,
        "invoice date": date,
        "total amount": amount,
        "iban": iban,
        "seller": seller,
    }
    return truth, "\n".join(lines)
