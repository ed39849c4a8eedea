"""JSON-over-HTTP service consumed by the companion UI.

Stateless except for an in-memory upload store with a TTL; every endpoint
shares the same core operations as the CLI, so equal inputs produce
JSON-equal outputs on both paths.  Errors use {"error": {code, message}}.
"""

from __future__ import annotations

import json
import logging
import threading
import time
import uuid

from fastapi import FastAPI, Request, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import __version__
from . import evaluation as ev
from . import gateway as gwmod
from . import imaging
from . import textextract as tx
from .config import ConfigError, RunConfig, Wiring

log = logging.getLogger("docfields.service")


class StoredDocument:
    def __init__(self, data: bytes, filename: str, fmt: imaging.DocumentFormat):
        self.data = data
        self.filename = filename
        self.format = fmt
        self.created = time.monotonic()
        self.extracted: tx.ExtractedText | None = None


class DocumentStore:
    """Upload store keyed by id, purged after the configured TTL."""

    def __init__(self, ttl_seconds: float):
        self.ttl = ttl_seconds
        self._docs: dict[str, StoredDocument] = {}
        self._lock = threading.Lock()

    def put(self, doc: StoredDocument) -> str:
        doc_id = uuid.uuid4().hex
        with self._lock:
            self._purge()
            self._docs[doc_id] = doc
        return doc_id

    def get(self, doc_id: str) -> StoredDocument | None:
        with self._lock:
            self._purge()
            return self._docs.get(doc_id)

    def _purge(self) -> None:
        now = time.monotonic()
        expired = [k for k, d in self._docs.items() if now - d.created > self.ttl]
        for k in expired:
            del self._docs[k]


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": {"code": code, "message": message}})


class ExtractRequest(BaseModel):
    doc_id: str | None = None
    text: str | None = None
    config_overrides: dict | None = None


class RetrieveRequest(BaseModel):
    doc_id: str | None = None
    text: str | None = None
    fields: list[str]


class EvaluateRequest(BaseModel):
    corpus_path: str


def create_app(config: RunConfig | None = None) -> FastAPI:
    config = config or RunConfig()
    wiring = Wiring.from_config(config)
    store = DocumentStore(config.service.document_ttl_seconds)
    app = FastAPI(title="docfields", version=__version__)
    # Local desk tool: the companion UI may be served from any origin.
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"])

    @app.middleware("http")
    async def request_log(request: Request, call_next):
        start = time.monotonic()
        response = await call_next(request)
        log.info(
            "%s",
            json.dumps(
                {
                    "method": request.method,
                    "path": request.url.path,
                    "status": response.status_code,
                    "ms": round((time.monotonic() - start) * 1000, 2),
                }
            ),
        )
        return response

    def _extract_for(req_doc_id: str | None, req_text: str | None, local_wiring: Wiring):
        if req_text is not None:
            document = tx.Document(format=imaging.DocumentFormat.PLAIN_TEXT, text=req_text)
            return local_wiring.extract(document), None
        if not req_doc_id:
            return None, _error(400, "bad_request", "either doc_id or text is required")
        stored = store.get(req_doc_id)
        if stored is None:
            return None, _error(404, "not_found", f"no document {req_doc_id}")
        if stored.extracted is None or local_wiring is not wiring:
            document = local_wiring.load(stored.data, stored.filename)
            extracted = local_wiring.extract(document)
            if local_wiring is wiring:
                stored.extracted = extracted
            return extracted, None
        return stored.extracted, None

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/documents")
    async def upload(file: UploadFile):
        data = await file.read()
        if not data:
            return _error(400, "bad_request", "empty upload")
        try:
            fmt = imaging.detect_format(data, file.filename or "")
        except imaging.UnsupportedFormat as exc:
            return _error(415, "unsupported_format", str(exc))
        doc_id = store.put(StoredDocument(data, file.filename or "", fmt))
        return {"doc_id": doc_id, "format": fmt.value}

    @app.post("/extract-text")
    def extract_text_endpoint(req: ExtractRequest):
        local_wiring = wiring
        if req.config_overrides:
            try:
                merged = config.to_dict()
                merged.update(req.config_overrides)
                local_wiring = Wiring.from_config(RunConfig.from_dict(merged))
            except ConfigError as exc:
                return _error(400, "config", str(exc))
        try:
            extracted, err = _extract_for(req.doc_id, req.text, local_wiring)
        except (imaging.AdapterUnavailable, tx.EngineError, imaging.RasterizeError) as exc:
            return _error(503, "adapter", str(exc))
        except gwmod.GatewayError as exc:
            return _error(502, "gateway", str(exc))
        except imaging.DecodeError as exc:
            return _error(422, "decode", str(exc))
        if err is not None:
            return err
        return {
            "text": extracted.text,
            "language": extracted.language,
            "stages_applied": extracted.stages_applied,
            "warnings": extracted.warnings,
        }

    @app.post("/retrieve")
    def retrieve_endpoint(req: RetrieveRequest):
        if not req.fields:
            return _error(400, "bad_request", "fields must be non-empty")
        try:
            extracted, err = _extract_for(req.doc_id, req.text, wiring)
        except (imaging.AdapterUnavailable, tx.EngineError, imaging.RasterizeError) as exc:
            return _error(503, "adapter", str(exc))
        except gwmod.GatewayError as exc:
            return _error(502, "gateway", str(exc))
        except imaging.DecodeError as exc:
            return _error(422, "decode", str(exc))
        if err is not None:
            return err
        return wiring.retrieve(extracted.text, req.fields, language=extracted.language)

    @app.post("/evaluate")
    def evaluate_endpoint(req: EvaluateRequest):
        if not config.service.allow_evaluate:
            return _error(403, "forbidden", "evaluate endpoint is disabled")
        try:
            corpus = ev.load_corpus(req.corpus_path)
            report = ev.evaluate_corpus(
                corpus,
                stages=config.stages,
                preprocess_config=config.preprocessing,
                ocr_adapter=wiring.ocr_adapter,
                gateway=wiring.gateway,
                catalog=wiring.catalog,
                ner_backend=wiring.ner_backend,
                routes=wiring.routes_table(),
                options=config.evaluation,
                run_config_digest=config.digest(),
                rasterizer_cmd=config.rasterizer_cmd,
            )
        except (OSError, ValueError, KeyError) as exc:
            return _error(400, "corpus", f"cannot evaluate corpus: {exc}")
        except ev.ZeroDocuments as exc:
            return _error(400, "corpus", str(exc))
        return json.loads(report.to_json())

    return app
