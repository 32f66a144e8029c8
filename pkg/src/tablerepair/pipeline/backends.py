"""Model backends: OpenAI-style chat HTTP endpoints, recorded replays, fixed strings."""

from __future__ import annotations

import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Literal, Mapping, Optional

import httpx

from ..errors import (
    BackendError,
    ConfigError,
    ExhaustedRetries,
    HttpStatus,
    ReplayMiss,
    Timeout,
)
from ..tasks import dumps, iter_jsonl
from .prompts import PromptPair

log = logging.getLogger(__name__)

BackendKind = Literal["http", "replay", "fixed"]
_RETRYABLE_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}


@dataclass(frozen=True)
class BackendSpec:
    kind: BackendKind
    name: str = "model"
    endpoint: Optional[str] = None
    model_name: str = ""
    max_concurrency: int = 4
    timeout: float = 120.0
    retries: int = 3
    replay_path: Optional[str] = None
    fixed_response: Optional[str] = None
    temperature: float = 0.0
    api_key_env: Optional[str] = None
    backoff_base: float = 1.0
    # http only: append every completion to this file in replay format
    record_path: Optional[str] = None

    def __post_init__(self) -> None:
        if self.kind not in ("http", "replay", "fixed"):
            raise ConfigError(f"backend {self.name!r}: unknown kind {self.kind!r}")
        if self.max_concurrency < 1:
            raise ConfigError(f"backend {self.name!r}: max_concurrency must be >= 1")
        if self.kind == "http" and not self.endpoint:
            raise ConfigError(f"backend {self.name!r}: http backend needs an endpoint")
        if self.kind == "replay" and not self.replay_path:
            raise ConfigError(f"backend {self.name!r}: replay backend needs replay_path")
        if self.kind == "fixed" and self.fixed_response is None:
            raise ConfigError(f"backend {self.name!r}: fixed backend needs fixed_response")

    @classmethod
    def from_mapping(cls, name: str, d: Mapping[str, Any]) -> "BackendSpec":
        if "api_key" in d:
            raise ConfigError(
                f"backend {name!r}: API keys are read from the environment, not config files"
            )
        known = set(cls.__dataclass_fields__) - {"name"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"backend {name!r}: unknown keys {sorted(unknown)}")
        if "kind" not in d:
            raise ConfigError(f"backend {name!r}: missing 'kind'")
        return cls(name=name, **d)

    @property
    def key_variable(self) -> str:
        if self.api_key_env:
            return self.api_key_env
        return re.sub(r"[^A-Za-z0-9]", "_", self.name).upper() + "_API_KEY"


@dataclass(frozen=True)
class Completion:
    text: str
    latency: float


class Backend:
    """Callable model endpoint; concurrency is capped per backend instance."""

    def __init__(self, spec: BackendSpec):
        self.spec = spec
        self._slots = threading.BoundedSemaphore(spec.max_concurrency)

    def complete(self, prompt: PromptPair, task_id: Optional[str] = None) -> Completion:
        with self._slots:
            return self._complete(prompt, task_id)

    def _complete(self, prompt: PromptPair, task_id: Optional[str]) -> Completion:
        raise NotImplementedError

    def close(self) -> None:
        pass


class FixedBackend(Backend):
    def _complete(self, prompt, task_id):
        return Completion(self.spec.fixed_response, 0.0)


class ReplayBackend(Backend):
    """Recorded responses keyed by prompt hash or by task id.

    Replay files are JSONL with ``{"key": ..., "response": ..., "latency": ...}``
    per line; ``latency`` is optional and reproduced as recorded.
    """

    def __init__(self, spec: BackendSpec):
        super().__init__(spec)
        self.entries: dict[str, Completion] = {}
        for rec in iter_jsonl(spec.replay_path):
            self.entries[str(rec["key"])] = Completion(rec["response"], float(rec.get("latency", 0.0)))

    def _complete(self, prompt, task_id):
        hit = self.entries.get(prompt.key())
        if hit is None and task_id is not None:
            hit = self.entries.get(task_id)
        if hit is None:
            raise ReplayMiss(f"no recorded response for task {task_id!r} / prompt {prompt.key()[:12]}")
        return hit


def write_replay(path: str | os.PathLike, responses: Mapping[str, str], latency: float = 0.0) -> None:
    """Write a replay file mapping keys (task ids or prompt hashes) to responses."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for key, text in responses.items():
            fh.write(dumps({"key": key, "response": text, "latency": latency}) + "\n")


class HttpBackend(Backend):
    def __init__(self, spec: BackendSpec, client: Optional[httpx.Client] = None):
        super().__init__(spec)
        self.url = _chat_url(spec.endpoint)
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(spec.key_variable)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self.client = client or httpx.Client(timeout=spec.timeout, headers=headers)
        self._record_lock = threading.Lock()

    def _post(self, prompt: PromptPair) -> str:
        payload = {
            "model": self.spec.model_name,
            "messages": prompt.messages(),
            "temperature": self.spec.temperature,
        }
        try:
            resp = self.client.post(self.url, json=payload)
        except httpx.TimeoutException as exc:
            raise Timeout(f"{self.spec.name}: request timed out") from exc
        except httpx.TransportError as exc:
            raise BackendError(f"{self.spec.name}: {exc}") from exc
        if resp.status_code != 200:
            raise HttpStatus(resp.status_code, resp.text[:500])
        try:
            return resp.json()["choices"][0]["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"{self.spec.name}: malformed completion response") from exc

    def _complete(self, prompt, task_id):
        attempts = 1 + max(0, self.spec.retries)
        last: Optional[BackendError] = None
        for attempt in range(attempts):
            if attempt:
                delay = self.spec.backoff_base * 2 ** (attempt - 1)
                log.warning("%s: retry %d/%d in %.1fs (%s)", self.spec.name, attempt, attempts - 1, delay, last)
                time.sleep(delay)
            start = time.perf_counter()
            try:
                text = self._post(prompt)
            except HttpStatus as exc:
                if exc.code not in _RETRYABLE_STATUS:
                    raise
                last = exc
                continue
            except BackendError as exc:
                last = exc
                continue
            out = Completion(text, time.perf_counter() - start)
            self._record(prompt, task_id, out)
            return out
        if attempts == 1:
            raise last
        raise ExhaustedRetries(f"{self.spec.name}: {attempts} attempts failed, last error: {last}") from last

    def _record(self, prompt: PromptPair, task_id: Optional[str], out: Completion) -> None:
        if not self.spec.record_path:
            return
        line = dumps({"key": prompt.key(), "task_id": task_id, "response": out.text, "latency": out.latency})
        with self._record_lock, open(self.spec.record_path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")

    def close(self) -> None:
        self.client.close()


def _chat_url(endpoint: str) -> str:
    endpoint = endpoint.rstrip("/")
    if endpoint.endswith("/chat/completions"):
        return endpoint
    return endpoint + "/chat/completions"


_KINDS = {"fixed": FixedBackend, "replay": ReplayBackend, "http": HttpBackend}


def make_backend(spec: BackendSpec | Backend) -> Backend:
    if isinstance(spec, Backend):
        return spec
    return _KINDS[spec.kind](spec)


def complete(backend: BackendSpec | Backend, prompt: PromptPair, task_id: Optional[str] = None) -> str:
    """Send one prompt and return the model's text."""
    owned = not isinstance(backend, Backend)
    b = make_backend(backend)
    try:
        return b.complete(prompt, task_id).text
    finally:
        if owned:
            b.close()


def parse_inline_backend(text: str, name: Optional[str] = None) -> BackendSpec:
    """``replay:PATH``, ``fixed:TEXT`` or ``http:URL[#model]`` shorthand."""
    kind, sep, rest = text.partition(":")
    if not sep:
        raise ConfigError(f"cannot interpret backend {text!r}")
    name = name or kind
    if kind == "replay":
        return BackendSpec("replay", name=name, replay_path=rest)
    if kind == "fixed":
        return BackendSpec("fixed", name=name, fixed_response=rest)
    if kind == "http":
        url, _, model = rest.partition("#")
        return BackendSpec("http", name=name, endpoint=url, model_name=model)
    raise ConfigError(f"unknown backend kind {kind!r}")
