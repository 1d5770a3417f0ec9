"""Prompt templating and LLM invocation backends (HTTP, replay, record)."""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import os
import re
import tempfile
import threading
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Optional, Protocol, Union

import httpx

log = logging.getLogger(__name__)

STAGE_TEMPLATE_IDS = ("bootstrap", "expand", "refine", "populate")
STAGE_VARIABLES = {
    "bootstrap": ("namespace", "descriptions"),
    "expand": ("namespace", "ontology", "descriptions"),
    "refine": ("namespace", "ontology"),
    "populate": ("ontology", "subject_iri", "product_id", "description"),
}
API_KEY_ENV = "KGFORGE_API_KEY"
SYSTEM_PROMPT = (
    "You are an ontology engineering agent for e-commerce product data. "
    "Answer with RDF in Turtle syntax inside a single fenced code block."
)

_PLACEHOLDER = re.compile(r"\{\{\s*([A-Za-z_][A-Za-z0-9_]*)\s*\}\}")


class AgentError(RuntimeError):
    """Base class for invocation failures."""


class HttpError(AgentError):
    def __init__(self, status: int, body: str):
        super().__init__(f"HTTP {status}: {body[:200]}")
        self.status = status
        self.body = body


class AgentTimeout(AgentError, TimeoutError):
    pass


class MissingFixture(AgentError):
    def __init__(self, digest: str):
        super().__init__(f"no recorded response for request digest {digest}")
        self.digest = digest


class MissingVariable(KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"template variable {self.name!r} was not supplied"


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    body: str

    @property
    def placeholders(self) -> set[str]:
        return set(_PLACEHOLDER.findall(self.body))

    def check(self, required=None) -> None:
        required = STAGE_VARIABLES.get(self.id, ()) if required is None else required
        missing = set(required) - self.placeholders
        if missing:
            raise ValueError(f"template {self.id!r} lacks placeholders: {sorted(missing)}")


def render_prompt(t: PromptTemplate, variables: dict[str, str]) -> str:
    extra = set(variables) - t.placeholders
    if extra:
        log.warning("template %s ignores unknown variables: %s", t.id, ", ".join(sorted(extra)))

    def substitute(m: re.Match) -> str:
        name = m.group(1)
        if name not in variables:
            raise MissingVariable(name)
        return str(variables[name])

    # one pass: substituted values are never re-scanned for placeholders
    return _PLACEHOLDER.sub(substitute, t.body)


def load_templates(directory: Union[str, Path, None] = None) -> dict[str, PromptTemplate]:
    """Load ``<id>.txt`` for every stage from ``directory`` or the bundled prompts."""
    templates = {}
    for template_id in STAGE_TEMPLATE_IDS:
        if directory is None:
            body = resources.files("kgforge.prompts").joinpath(f"{template_id}.txt").read_text(encoding="utf-8")
        else:
            body = (Path(directory) / f"{template_id}.txt").read_text(encoding="utf-8")
        tmpl = PromptTemplate(template_id, body)
        tmpl.check()
        templates[template_id] = tmpl
    return templates


@dataclass(frozen=True)
class AgentRequest:
    template_id: str
    rendered_prompt: str
    temperature: float = 0.0
    max_output_tokens: int = 4096

    @property
    def digest(self) -> str:
        # unit separators keep field boundaries unambiguous
        canonical = "\x1f".join(
            [
                "kgforge-request-v1",
                self.template_id,
                self.rendered_prompt,
                repr(float(self.temperature)),
                str(int(self.max_output_tokens)),
            ]
        )
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def to_dict(self) -> dict:
        return {
            "template_id": self.template_id,
            "rendered_prompt": self.rendered_prompt,
            "params": {"temperature": self.temperature, "max_output_tokens": self.max_output_tokens},
            "digest": self.digest,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AgentRequest":
        params = d.get("params", {})
        return cls(d["template_id"], d["rendered_prompt"], params.get("temperature", 0.0), params.get("max_output_tokens", 4096))


class BackendKind(str, enum.Enum):
    HTTP = "http"
    REPLAY = "replay"


@dataclass(frozen=True)
class AgentResponse:
    text: str
    backend: BackendKind
    latency_ms: Optional[float] = None


class Backend(Protocol):
    def invoke(self, req: AgentRequest) -> AgentResponse: ...


class HttpBackend:
    """OpenAI-compatible chat-completions client."""

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: Optional[str] = None,
        *,
        timeout: float = 120.0,
        retries: int = 3,
        backoff: float = 1.0,
        max_inflight: int = 4,
        system_prompt: str = SYSTEM_PROMPT,
        transport: Optional[httpx.BaseTransport] = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.system_prompt = system_prompt
        self._slots = threading.BoundedSemaphore(max_inflight)
        self._client = httpx.Client(timeout=timeout, transport=transport)

    @classmethod
    def from_env(cls, base_url: str, model: str, **kw) -> "HttpBackend":
        key = os.environ.get(API_KEY_ENV)
        if not key:
            raise AgentError(f"environment variable {API_KEY_ENV} is not set")
        return cls(base_url, model, key, **kw)

    def payload(self, req: AgentRequest) -> dict:
        return {
            "model": self.model,
            "messages": [
                {"role": "system", "content": self.system_prompt},
                {"role": "user", "content": req.rendered_prompt},
            ],
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
        }

    def invoke(self, req: AgentRequest) -> AgentResponse:
        body = self.payload(req)
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        last: Optional[AgentError] = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            start = time.perf_counter()
            try:
                with self._slots:
                    resp = self._client.post(f"{self.base_url}/chat/completions", json=body, headers=headers)
            except httpx.TimeoutException as exc:
                last = AgentTimeout(f"no response within {self.timeout}s: {exc}")
                continue
            except httpx.TransportError as exc:
                last = HttpError(0, str(exc))
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = HttpError(resp.status_code, resp.text)
                continue
            if resp.status_code >= 400:
                raise HttpError(resp.status_code, resp.text)
            try:
                text = resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError):
                raise HttpError(resp.status_code, f"unexpected response body: {resp.text[:200]}") from None
            latency = (time.perf_counter() - start) * 1000.0
            return AgentResponse(text or "", BackendKind.HTTP, latency)
        assert last is not None
        raise last

    def close(self) -> None:
        self._client.close()


class FixtureStore:
    """One JSON file per request digest; writes are atomic."""

    def __init__(self, directory: Union[str, Path]):
        self.directory = Path(directory)

    def path(self, digest: str) -> Path:
        return self.directory / f"{digest}.json"

    def get(self, digest: str) -> Optional[dict]:
        try:
            return json.loads(self.path(digest).read_text(encoding="utf-8"))
        except FileNotFoundError:
            return None

    def put(self, req: AgentRequest, text: str) -> Path:
        self.directory.mkdir(parents=True, exist_ok=True)
        record = {"request": req.to_dict(), "response": {"text": text}}
        data = json.dumps(record, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
        target = self.path(req.digest)
        fd, tmp = tempfile.mkstemp(dir=self.directory, prefix=".tmp-", suffix=".json")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(data)
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return target

    def __len__(self) -> int:
        return sum(1 for _ in self.directory.glob("*.json")) if self.directory.exists() else 0


class ReplayBackend:
    def __init__(self, fixtures_dir: Union[str, Path]):
        self.store = FixtureStore(fixtures_dir)

    def invoke(self, req: AgentRequest) -> AgentResponse:
        record = self.store.get(req.digest)
        if record is None:
            raise MissingFixture(req.digest)
        return AgentResponse(record["response"]["text"], BackendKind.REPLAY)


class RecordBackend:
    """Calls a live backend and persists every exchange for later replay."""

    def __init__(self, live: Backend, fixtures_dir: Union[str, Path]):
        self.live = live
        self.store = FixtureStore(fixtures_dir)

    def invoke(self, req: AgentRequest) -> AgentResponse:
        resp = self.live.invoke(req)
        self.store.put(req, resp.text)
        return resp


class CallableBackend:
    """Adapts a plain function ``AgentRequest -> str`` (scripted agents, stubs)."""

    def __init__(self, fn: Callable[[AgentRequest], str]):
        self.fn = fn

    def invoke(self, req: AgentRequest) -> AgentResponse:
        return AgentResponse(self.fn(req), BackendKind.HTTP)


@dataclass
class Gateway:
    """Binds a backend to the stage templates and sampling parameters."""

    backend: Backend
    templates: dict[str, PromptTemplate] = field(default_factory=load_templates)
    temperature: float = 0.0
    max_output_tokens: int = 4096

    def request(self, template_id: str, variables: dict[str, str], feedback: Optional[str] = None) -> AgentRequest:
        prompt = render_prompt(self.templates[template_id], variables)
        if feedback:
            prompt += (
                "\n\nYour previous answer could not be used:\n"
                f"{feedback}\n"
                "Reply again with the corrected Turtle only."
            )
        return AgentRequest(template_id, prompt, self.temperature, self.max_output_tokens)

    def invoke(self, req: AgentRequest) -> AgentResponse:
        return invoke(req, self.backend)


def invoke(req: AgentRequest, backend: Backend) -> AgentResponse:
    return backend.invoke(req)
