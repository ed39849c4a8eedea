"""Shared chat-completion client with an offline replay mode.

The gateway renders fixed prompt templates, talks to any endpoint speaking
the common chat-completions wire format (messages in, choices out), and can
replay recorded prompt/response pairs from a transcript so every pipeline
path is testable without network access.  A transcript miss is an error;
nothing is ever fabricated.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import requests


class GatewayError(Exception):
    pass


class UnboundPlaceholder(GatewayError):
    pass


class HttpError(GatewayError):
    def __init__(self, status: int, body_excerpt: str):
        super().__init__(f"endpoint returned HTTP {status}: {body_excerpt}")
        self.status = status
        self.body_excerpt = body_excerpt


class TranscriptMiss(GatewayError):
    def __init__(self, digest: str):
        super().__init__(f"no transcript entry for prompt digest {digest}")
        self.digest = digest


class GatewayTimeout(GatewayError):
    pass


_PLACEHOLDER = re.compile(r"\{(\w+)\}")

TEMPLATES: dict[str, str] = {
    "correct_and_format": 'Correct spelling mistakes and format the following text below. Text: "{text}"',
    "correct_only": 'Correct spelling mistakes in the following text if there are any. Text: "{text}"',
    "correct_no_format": 'Correct spelling mistakes in the following text if there are any, do NOT format the text. Text: "{text}"',
    "retrieve_field": 'Extract {user_input} from the following text below.\nText: "{text}" {user_input}:',
}


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    body: str

    def placeholders(self) -> list[str]:
        return _PLACEHOLDER.findall(self.body)


def get_template(template_id: str) -> PromptTemplate:
    try:
        return PromptTemplate(template_id, TEMPLATES[template_id])
    except KeyError:
        raise KeyError(f"unknown prompt template {template_id!r}") from None


def render(template: PromptTemplate | str, bindings: dict[str, str]) -> str:
    """Substitute every placeholder byte-exactly; bound values are not rescanned."""
    if isinstance(template, str):
        template = get_template(template)
    missing = [name for name in template.placeholders() if name not in bindings]
    if missing:
        raise UnboundPlaceholder(f"unbound placeholders in {template.id}: {', '.join(missing)}")
    return _PLACEHOLDER.sub(lambda m: bindings[m.group(1)], template.body)


@dataclass
class CompletionParams:
    model_id: str = "gpt-3.5-turbo"
    temperature: float = 0.1
    max_tokens: int = 2048

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class Transcript:
    """Exact prompt-digest -> response map, persisted as JSONL."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path else None
        self.entries: dict[str, str] = {}
        self._lock = threading.Lock()
        if self.path and self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                obj = json.loads(line)
                self.entries[obj["digest"]] = obj["response"]

    def lookup(self, prompt: str) -> str:
        digest = prompt_digest(prompt)
        try:
            return self.entries[digest]
        except KeyError:
            raise TranscriptMiss(digest) from None

    def record(self, prompt: str, response: str) -> None:
        digest = prompt_digest(prompt)
        with self._lock:
            old = self.entries.get(digest)
            if old is not None and old != response:
                warnings.warn(f"transcript entry {digest[:12]} overwritten; last write wins")
            self.entries[digest] = response
            if self.path:
                try:
                    with self.path.open("a", encoding="utf-8") as fh:
                        fh.write(json.dumps({"digest": digest, "prompt": prompt, "response": response}) + "\n")
                except OSError as exc:
                    raise IOError(f"cannot persist transcript: {exc}") from exc

    def __len__(self) -> int:
        return len(self.entries)


class LlmGateway:
    """Completion client; mode is "replay" (transcript) or "live" (HTTP).

    Live mode posts {model, temperature, max_tokens, messages} with bearer
    auth and retries up to 3 times on 429/5xx with exponential backoff,
    honoring Retry-After.  The in-flight semaphore caps concurrency.
    """

    def __init__(
        self,
        mode: str = "replay",
        transcript: Transcript | None = None,
        endpoint_url: str = "",
        api_key: str = "",
        params: CompletionParams | None = None,
        timeout: float = 60.0,
        max_retries: int = 3,
        backoff: float = 1.0,
        max_in_flight: int = 4,
        sleeper=time.sleep,
    ):
        if mode not in ("replay", "live"):
            raise ValueError(f"unknown gateway mode {mode!r}")
        if mode == "live" and not endpoint_url:
            raise ValueError("live mode requires an endpoint URL")
        self.mode = mode
        self.transcript = transcript if transcript is not None else Transcript()
        self.endpoint_url = endpoint_url
        self.api_key = api_key
        self.params = params or CompletionParams()
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self._sleep = sleeper
        self._slots = threading.Semaphore(max_in_flight)
        self._stats_lock = threading.Lock()
        self.calls = 0

    def complete(self, prompt: str, params: CompletionParams | None = None) -> str:
        with self._stats_lock:
            self.calls += 1
        if self.mode == "replay":
            return self.transcript.lookup(prompt)
        with self._slots:
            return self._complete_live(prompt, params or self.params)

    def _complete_live(self, prompt: str, params: CompletionParams) -> str:
        payload = {
            "model": params.model_id,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
            "messages": [{"role": "user", "content": prompt}],
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        attempt = 0
        while True:
            try:
                resp = requests.post(self.endpoint_url, json=payload, headers=headers, timeout=self.timeout)
            except requests.Timeout as exc:
                raise GatewayTimeout(f"no response within {self.timeout}s") from exc
            except requests.RequestException as exc:
                raise GatewayError(f"request failed: {exc}") from exc
            if resp.status_code == 200:
                try:
                    return resp.json()["choices"][0]["message"]["content"]
                except (KeyError, IndexError, ValueError) as exc:
                    raise GatewayError(f"malformed completion response: {exc}") from exc
            retryable = resp.status_code == 429 or resp.status_code >= 500
            if not retryable or attempt >= self.max_retries:
                raise HttpError(resp.status_code, resp.text[:200])
            delay = self.backoff * (2**attempt)
            retry_after = resp.headers.get("Retry-After")
            if resp.status_code == 429 and retry_after:
                try:
                    delay = max(delay, float(retry_after))
                except ValueError:
                    pass
            self._sleep(delay)
            attempt += 1

    def record(self, prompt: str, response: str) -> None:
        self.transcript.record(prompt, response)
