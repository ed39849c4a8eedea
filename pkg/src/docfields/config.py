"""Run configuration: one JSON file wiring adapters, stages and paths.

Precedence is CLI flag > environment variable > config file > default.
Unknown keys are rejected so typos fail loudly instead of silently running
with defaults.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from . import retrieval as rt
from . import textextract as tx
from .evaluation import EvalOptions
from .gateway import CompletionParams, LlmGateway, Transcript
from .imaging import PreprocessConfig

API_KEY_ENV = "DOCFIELDS_API_KEY"


class ConfigError(Exception):
    pass


@dataclass
class GatewayConfig:
    mode: str = "replay"
    endpoint_url: str = ""
    model_id: str = "gpt-3.5-turbo"
    temperature: float = 0.1
    max_tokens: int = 2048
    transcript_path: str | None = None
    timeout: float = 60.0
    max_in_flight: int = 4

    def __post_init__(self) -> None:
        if self.mode not in ("replay", "live"):
            raise ValueError(f"gateway mode must be replay or live, got {self.mode!r}")
        if self.mode == "live" and not self.endpoint_url:
            raise ValueError("live gateway mode requires endpoint_url")


@dataclass
class OcrConfig:
    adapter: str | None = "stub"  # "stub", "command" or null
    command: str | None = None


@dataclass
class ServiceConfig:
    document_ttl_seconds: float = 3600.0
    allow_evaluate: bool = True


@dataclass
class RunConfig:
    preprocessing: PreprocessConfig = field(default_factory=PreprocessConfig)
    stages: tx.StageConfig = field(default_factory=tx.StageConfig)
    gateway: GatewayConfig = field(default_factory=GatewayConfig)
    ocr: OcrConfig = field(default_factory=OcrConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)
    evaluation: EvalOptions = field(default_factory=EvalOptions)
    rasterizer_cmd: str | None = None
    dpi: int = 300
    catalog_path: str | None = None
    ner_command: str | None = None
    synonyms: dict = field(default_factory=dict)
    routes: dict = field(default_factory=dict)

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(payload)

    @classmethod
    def from_dict(cls, payload: dict) -> "RunConfig":
        return _build_dataclass(cls, payload, "config")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False, default=str)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


_NESTED = {
    "preprocessing": PreprocessConfig,
    "stages": tx.StageConfig,
    "gateway": GatewayConfig,
    "ocr": OcrConfig,
    "service": ServiceConfig,
    "evaluation": EvalOptions,
}


def _build_dataclass(cls, payload: dict, where: str):
    if not isinstance(payload, dict):
        raise ConfigError(f"{where} must be an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(payload) - names
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {', '.join(sorted(unknown))}")
    kwargs = {}
    for key, value in payload.items():
        nested = _NESTED.get(key)
        if nested is not None and cls is RunConfig:
            kwargs[key] = _build_dataclass(nested, value, key)
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where}: {exc}") from exc


@dataclass
class Wiring:
    """Constructed adapters shared by the CLI and the HTTP service, so both
    paths run the identical core operations."""

    config: RunConfig
    gateway: LlmGateway | None
    ocr_adapter: object | None
    ner_backend: object | None
    catalog: rt.PatternCatalog

    @classmethod
    def from_config(cls, config: RunConfig) -> "Wiring":
        gcfg = config.gateway
        transcript = Transcript(gcfg.transcript_path) if gcfg.transcript_path else Transcript()
        gateway = LlmGateway(
            mode=gcfg.mode,
            transcript=transcript,
            endpoint_url=gcfg.endpoint_url,
            api_key=os.environ.get(API_KEY_ENV, ""),
            params=CompletionParams(model_id=gcfg.model_id, temperature=gcfg.temperature, max_tokens=gcfg.max_tokens),
            timeout=gcfg.timeout,
            max_in_flight=gcfg.max_in_flight,
        )
        if config.ocr.adapter == "stub":
            ocr_adapter = tx.GlyphCellOcr()
        elif config.ocr.adapter == "command":
            if not config.ocr.command:
                raise ConfigError("ocr.adapter is \"command\" but ocr.command is not set")
            ocr_adapter = tx.CommandOcr(config.ocr.command)
        elif config.ocr.adapter in (None, "none"):
            ocr_adapter = None
        else:
            raise ConfigError(f"unknown ocr.adapter {config.ocr.adapter!r}")
        ner_backend = rt.CommandNerBackend(config.ner_command) if config.ner_command else rt.GazetteerNer()
        catalog = rt.PatternCatalog.from_json(config.catalog_path) if config.catalog_path else rt.default_catalog()
        return cls(config=config, gateway=gateway, ocr_adapter=ocr_adapter, ner_backend=ner_backend, catalog=catalog)

    def routes_table(self) -> dict:
        if not self.config.routes:
            return rt.DEFAULT_ROUTES
        table = dict(rt.DEFAULT_ROUTES)
        for category, stages in self.config.routes.items():
            table[category] = tuple(stages)
        return table

    def load(self, data: bytes, filename_hint: str = "") -> tx.Document:
        return tx.load_document(data, filename_hint, rasterizer_cmd=self.config.rasterizer_cmd, dpi=self.config.dpi)

    def extract(self, document: tx.Document) -> tx.ExtractedText:
        return tx.extract_text(
            document,
            self.config.stages,
            preprocess_config=self.config.preprocessing,
            ocr_adapter=self.ocr_adapter,
            gateway=self.gateway,
        )

    def retrieve(self, text: str, fields: list[str], language: str = "nl") -> list[dict]:
        queries = [rt.normalize_query(f, synonyms=self.config.synonyms or None) for f in fields]
        results = rt.retrieve_all(
            text,
            queries,
            catalog=self.catalog,
            ner_backend=self.ner_backend,
            gateway=self.gateway,
            routes=self.routes_table(),
            language=language,
        )
        return [r.to_dict() for r in results]
