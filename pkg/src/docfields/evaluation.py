"""Evaluation harness: Jaccard similarity, field scoring, corpus reports.

Scoring follows the single-truth labeling rules: the first retrieved value
equivalent to the truth is the one true positive, duplicates and wrong
values are false positives, and a missed present truth is a false
negative.  Undefined ratios (0/0) are reported as such, never as 0.
"""

from __future__ import annotations

import hashlib
import json
import unicodedata
from collections import Counter
from dataclasses import dataclass, field as dc_field
from pathlib import Path

from . import retrieval as rt
from . import textextract as tx
from .imaging import PreprocessConfig


class NormalizationMismatch(Exception):
    pass


class ZeroDocuments(Exception):
    pass


@dataclass(frozen=True)
class TokenSet:
    tokens: frozenset[str]
    normalization_id: str


def _strip_edge_symbols(token: str) -> str:
    start, end = 0, len(token)
    while start < end and unicodedata.category(token[start])[0] in ("P", "S"):
        start += 1
    while end > start and unicodedata.category(token[end - 1])[0] in ("P", "S"):
        end -= 1
    return token[start:end]


def _stem_en(word: str) -> str:
    if len(word) > 5 and word.endswith("ing"):
        word = word[:-3]
        if len(word) > 3 and word[-1] == word[-2] and word[-1] not in "lse":
            word = word[:-1]
    elif len(word) > 4 and word.endswith("ed"):
        word = word[:-2]
        if len(word) > 3 and word[-1] == word[-2] and word[-1] not in "lse":
            word = word[:-1]
    elif len(word) > 3 and word.endswith("s") and not word.endswith("ss"):
        word = word[:-1]
    return word


def _stem_nl(word: str) -> str:
    if len(word) > 5 and word.endswith("tje"):
        word = word[:-3]
    elif len(word) > 4 and word.endswith("je"):
        word = word[:-2]
    elif len(word) > 5 and word.endswith("en"):
        word = word[:-2]
    elif len(word) > 4 and word.endswith("s") and not word.endswith("ss"):
        word = word[:-1]
    return word


def _stem(word: str, language: str) -> str:
    rule = _stem_nl if language == "nl" else _stem_en
    # Iterate to a fixed point so renormalizing normalized text is stable.
    while True:
        out = rule(word)
        if out == word:
            return out
        word = out


def normalize_tokens(
    text: str,
    language: str = "en",
    strip_symbols: bool = True,
    lemmatize: bool = True,
) -> TokenSet:
    """Whitespace segmentation, case folding, optional symbol stripping and
    rule-based suffix stemming; duplicates collapse into a set."""
    steps = ["ws", "casefold"]
    if strip_symbols:
        steps.append("strip")
    if lemmatize:
        steps.append(f"stem-{language}")
    tokens = set()
    for raw in text.split():
        token = raw.casefold()
        if strip_symbols:
            token = _strip_edge_symbols(token)
        if lemmatize and token:
            token = _stem(token, language)
        if token:
            tokens.add(token)
    return TokenSet(tokens=frozenset(tokens), normalization_id="+".join(steps))


def jaccard(a: TokenSet, b: TokenSet) -> float:
    """|a ∩ b| / |a ∪ b|; two empty sets count as identical (1.0)."""
    if a.normalization_id != b.normalization_id:
        raise NormalizationMismatch(f"{a.normalization_id!r} vs {b.normalization_id!r}")
    if not a.tokens and not b.tokens:
        return 1.0
    return len(a.tokens & b.tokens) / len(a.tokens | b.tokens)


@dataclass
class FieldScore:
    field: str = ""
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: "FieldScore") -> "FieldScore":
        return FieldScore(self.field or other.field, self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


def default_matcher(a: str, b: str) -> bool:
    """Equivalence used for scoring: token-set equality after symbol stripping."""
    ta = normalize_tokens(a, strip_symbols=True, lemmatize=False).tokens
    tb = normalize_tokens(b, strip_symbols=True, lemmatize=False).tokens
    if not ta and not tb:
        return a.strip() == b.strip()
    return ta == tb


def score_field(
    retrieved: list[str],
    truth: str | None,
    matcher=None,
    field: str = "",
) -> FieldScore:
    """Label retrieved values for one document-field pair.

    At most one value is the true positive; equivalent duplicates and
    non-equivalent values are false positives; a present truth without a
    true positive is a false negative.
    """
    matcher = matcher or default_matcher
    score = FieldScore(field=field)
    for value in retrieved:
        if truth is not None and score.tp == 0 and matcher(value, truth):
            score.tp = 1
        else:
            score.fp += 1
    if truth is not None and score.tp == 0:
        score.fn = 1
    return score


def aggregate(scores: list[FieldScore], correct_docs: int, n_documents: int) -> dict:
    """Accuracy, precision and recall for one field over a corpus run."""
    if n_documents <= 0:
        raise ZeroDocuments("n_documents must be > 0")
    tp = sum(s.tp for s in scores)
    fp = sum(s.fp for s in scores)
    fn = sum(s.fn for s in scores)
    return {
        "accuracy": correct_docs / n_documents,
        "precision": tp / (tp + fp) if tp + fp else None,
        "recall": tp / (tp + fn) if tp + fn else None,
        "tp": tp,
        "fp": fp,
        "fn": fn,
    }


# ---------------------------------------------------------------------------
# Corpus evaluation


@dataclass
class CorpusDocument:
    doc_id: str
    source_kind: str  # "text" or "path"
    source_value: str
    truth: dict
    truth_text: str | None = None


def load_corpus(data: dict | str | Path) -> list[CorpusDocument]:
    """Read the ground-truth corpus format (see schemas/corpus.schema.json)."""
    if not isinstance(data, dict):
        data = json.loads(Path(data).read_text(encoding="utf-8"))
    docs = []
    for entry in data["documents"]:
        docs.append(
            CorpusDocument(
                doc_id=str(entry["doc_id"]),
                source_kind=entry["source"]["kind"],
                source_value=entry["source"]["value"],
                truth=dict(entry["truth"]),
                truth_text=entry.get("truth_text"),
            )
        )
    return docs


@dataclass
class EvalOptions:
    strip_symbols: bool = True
    lemmatize: bool = True
    strict_accuracy: bool = True  # correct means tp == 1 and fp == 0
    skip_failures: bool = False


@dataclass
class CorpusReport:
    per_field: dict
    jaccard_mean: float | None
    n_documents: int
    run_config_digest: str
    failures: list[dict] = dc_field(default_factory=list)

    def to_json(self) -> str:
        payload = {
            "per_field": self.per_field,
            "jaccard_mean": self.jaccard_mean,
            "n_documents": self.n_documents,
            "run_config_digest": self.run_config_digest,
            "failures": self.failures,
        }
        return json.dumps(payload, sort_keys=True, ensure_ascii=False, indent=2) + "\n"


def config_digest(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True, ensure_ascii=False).encode("utf-8")).hexdigest()


def _truth_as_single_value(truth) -> str:
    if isinstance(truth, list):
        return ", ".join(truth)
    return truth


def evaluate_corpus(
    corpus: list[CorpusDocument],
    stages: tx.StageConfig | None = None,
    preprocess_config: PreprocessConfig | None = None,
    ocr_adapter=None,
    gateway=None,
    catalog: rt.PatternCatalog | None = None,
    ner_backend=None,
    routes: dict | None = None,
    synonyms: dict | None = None,
    options: EvalOptions | None = None,
    run_config_digest: str = "",
    rasterizer_cmd: str | None = None,
) -> CorpusReport:
    """Extract, retrieve and score every document; aggregate per field.

    A document counts as correct for a field's accuracy when its score is
    tp=1 and fp=0 (strict default).  Failed documents are recorded; they
    count as false negatives unless skip_failures excludes them from the
    denominators entirely.
    """
    if not corpus:
        raise ZeroDocuments("corpus is empty")
    stages = stages or tx.StageConfig()
    options = options or EvalOptions()
    field_scores: dict[str, list[FieldScore]] = {}
    field_correct: Counter = Counter()
    field_docs: Counter = Counter()
    techniques: dict[str, Counter] = {}
    jaccards: list[float] = []
    failures: list[dict] = []

    for doc in sorted(corpus, key=lambda d: d.doc_id):
        try:
            if doc.source_kind == "text":
                document = tx.Document(format=tx.DocumentFormat.PLAIN_TEXT, text=doc.source_value)
                truth_text = doc.truth_text if doc.truth_text is not None else doc.source_value
            else:
                payload = Path(doc.source_value).read_bytes()
                document = tx.load_document(payload, doc.source_value, rasterizer_cmd=rasterizer_cmd)
                truth_text = doc.truth_text
            extracted = tx.extract_text(
                document,
                stages,
                preprocess_config=preprocess_config,
                ocr_adapter=ocr_adapter,
                gateway=gateway,
            )
            if truth_text is not None:
                got = normalize_tokens(extracted.text, extracted.language, options.strip_symbols, options.lemmatize)
                want = normalize_tokens(truth_text, extracted.language, options.strip_symbols, options.lemmatize)
                jaccards.append(jaccard(got, want))
            results = rt.retrieve_all(
                extracted.text,
                list(doc.truth.keys()),
                catalog=catalog,
                ner_backend=ner_backend,
                gateway=gateway,
                routes=routes,
                language=extracted.language,
            )
        except Exception as exc:  # per-document isolation
            failures.append({"doc_id": doc.doc_id, "error": f"{type(exc).__name__}: {exc}"})
            if not options.skip_failures:
                for field_name, truth in doc.truth.items():
                    field_docs[field_name] += 1
                    score = FieldScore(field=field_name, fn=1 if truth is not None else 0)
                    field_scores.setdefault(field_name, []).append(score)
            continue

        for field_name, result in zip(doc.truth.keys(), results):
            truth = doc.truth[field_name]
            values = [m.value for m in result.matches]
            if isinstance(truth, list) and values:
                values = [", ".join(values)]
            score = score_field(values, _truth_as_single_value(truth), field=field_name)
            field_docs[field_name] += 1
            field_scores.setdefault(field_name, []).append(score)
            correct = score.tp == 1 and (score.fp == 0 if options.strict_accuracy else True)
            if truth is None:
                correct = score.tp == 0 and score.fp == 0
            if correct:
                field_correct[field_name] += 1
            if result.stage_fired:
                techniques.setdefault(field_name, Counter())[result.stage_fired] += 1

    per_field = {}
    for field_name, scores in sorted(field_scores.items()):
        n_docs = field_docs[field_name]
        entry = aggregate(scores, field_correct[field_name], n_docs)
        stage_counter = techniques.get(field_name)
        entry["technique"] = stage_counter.most_common(1)[0][0] if stage_counter else None
        entry["n_documents"] = n_docs
        per_field[field_name] = entry

    return CorpusReport(
        per_field=per_field,
        jaccard_mean=sum(jaccards) / len(jaccards) if jaccards else None,
        n_documents=len(corpus) - (len(failures) if options.skip_failures else 0),
        run_config_digest=run_config_digest,
        failures=failures,
    )
