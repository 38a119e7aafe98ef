"""Chat-completion client with a content-addressed record/replay store."""

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
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Mapping

import httpx

from .errors import AuthMissing, CassetteMiss, ConfigInvalid, InputTooLarge, NoCodeBlock, ProviderError

log = logging.getLogger(__name__)

CHARS_PER_TOKEN = 4
RETRY_STATUSES = frozenset({429, 500, 502, 503, 504})


class Mode(str, enum.Enum):
    LIVE = "LIVE"
    RECORD = "RECORD"
    REPLAY = "REPLAY"

    @classmethod
    def parse(cls, value: str) -> "Mode":
        return cls(value.upper())


@dataclass(frozen=True)
class ModelSpec:
    provider_id: str
    model_name: str
    endpoint: str
    api_key_env: str
    input_token_limit: int
    output_token_limit: int
    # None leaves the parameter out; some reasoning models reject it
    temperature: float | None = 0.0
    requests_per_minute: float = 60.0


_SPEC_FIELDS = set(ModelSpec.__dataclass_fields__)


def load_providers(path) -> dict[str, ModelSpec]:
    """Read a providers file (JSON list, or {"models": [...]}) keyed by model name."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot read providers file {path}: {exc}") from None
    entries = data.get("models", []) if isinstance(data, dict) else data
    specs = {}
    for i, raw in enumerate(entries):
        unknown = set(raw) - _SPEC_FIELDS
        if unknown:
            raise ConfigInvalid(f"providers[{i}]: unknown field {sorted(unknown)[0]!r}")
        try:
            spec = ModelSpec(**raw)
        except TypeError as exc:
            raise ConfigInvalid(f"providers[{i}]: {exc}") from None
        specs[spec.model_name] = spec
    return specs


def estimate_tokens(text: str) -> int:
    return (len(text) + CHARS_PER_TOKEN - 1) // CHARS_PER_TOKEN


def prompt_hash(model_name: str, prompt: str) -> str:
    h = hashlib.sha256()
    h.update(model_name.encode("utf-8"))
    h.update(b"\0")
    h.update(prompt.encode("utf-8"))
    return h.hexdigest()


@dataclass
class CompletionRecord:
    prompt_hash: str
    model_name: str
    raw_response: str
    extracted_code: str | None = None
    timestamp: str = ""
    token_counts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CompletionRecord":
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


class CassetteStore:
    """One JSON file per (model, prompt) under ``<root>/<provider>/<hash>.json``."""

    def __init__(self, root):
        self.root = Path(root)

    def path(self, provider_id: str, digest: str) -> Path:
        return self.root / provider_id / f"{digest}.json"

    def get(self, provider_id: str, digest: str) -> CompletionRecord | None:
        p = self.path(provider_id, digest)
        if not p.is_file():
            return None
        return CompletionRecord.from_dict(json.loads(p.read_text(encoding="utf-8")))

    def put(self, provider_id: str, record: CompletionRecord) -> Path:
        p = self.path(provider_id, record.prompt_hash)
        p.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=p.parent, prefix=".tmp-", suffix=".json")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(record.to_dict(), fh, indent=2, sort_keys=True)
                fh.write("\n")
            os.replace(tmp, p)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return p


class RateLimiter:
    """Token bucket; ``acquire`` blocks until a request slot is free."""

    def __init__(self, per_minute: float, clock: Callable[[], float] = time.monotonic, sleep=time.sleep):
        self.rate = per_minute / 60.0
        self.capacity = max(1.0, per_minute / 60.0)
        self.tokens = self.capacity
        self._clock = clock
        self._sleep = sleep
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        if self.rate <= 0:
            return
        while True:
            with self._lock:
                now = self._clock()
                self.tokens = min(self.capacity, self.tokens + (now - self._last) * self.rate)
                self._last = now
                if self.tokens >= 1:
                    self.tokens -= 1
                    return
                wait = (1 - self.tokens) / self.rate
            self._sleep(wait)


class LLMClient:
    """Shareable across threads. REPLAY never creates an HTTP client."""

    def __init__(
        self,
        mode: Mode = Mode.REPLAY,
        cassettes: CassetteStore | None = None,
        transport: httpx.BaseTransport | None = None,
        env: Mapping[str, str] | None = None,
        max_attempts: int = 3,
        backoff: float = 1.0,
        request_timeout: float = 600.0,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if mode in (Mode.REPLAY, Mode.RECORD) and cassettes is None:
            raise ConfigInvalid(f"{mode.value} mode needs a cassette directory")
        self.mode = mode
        self.cassettes = cassettes
        self.transport = transport
        self.env = os.environ if env is None else env
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.request_timeout = request_timeout
        self._sleep = sleep
        self._http: httpx.Client | None = None
        self._limiters: dict[str, RateLimiter] = {}
        self._lock = threading.Lock()

    def close(self) -> None:
        if self._http is not None:
            self._http.close()
            self._http = None

    def complete(self, model: ModelSpec, prompt: str) -> str:
        tokens = estimate_tokens(prompt)
        if tokens > model.input_token_limit:
            raise InputTooLarge(
                f"~{tokens} tokens exceeds {model.model_name} limit {model.input_token_limit}"
            )
        digest = prompt_hash(model.model_name, prompt)

        if self.mode is Mode.REPLAY:
            record = self.cassettes.get(model.provider_id, digest)
            if record is None:
                raise CassetteMiss(f"no cassette for {model.model_name} prompt {digest[:12]}")
            return record.raw_response

        text, usage = self._call(model, prompt)
        if self.mode is Mode.RECORD:
            try:
                code = extract_code_block(text)
            except NoCodeBlock:
                code = None
            self.cassettes.put(
                model.provider_id,
                CompletionRecord(
                    prompt_hash=digest,
                    model_name=model.model_name,
                    raw_response=text,
                    extracted_code=code,
                    timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
                    token_counts=usage,
                ),
            )
        return text

    def _client(self) -> httpx.Client:
        with self._lock:
            if self._http is None:
                self._http = httpx.Client(transport=self.transport, timeout=self.request_timeout)
            return self._http

    def _limiter(self, model: ModelSpec) -> RateLimiter:
        with self._lock:
            if model.provider_id not in self._limiters:
                self._limiters[model.provider_id] = RateLimiter(model.requests_per_minute)
            return self._limiters[model.provider_id]

    def _call(self, model: ModelSpec, prompt: str) -> tuple[str, dict]:
        key = self.env.get(model.api_key_env)
        if not key:
            raise AuthMissing(f"environment variable {model.api_key_env} is not set")
        payload = {"model": model.model_name, "messages": [{"role": "user", "content": prompt}]}
        if model.temperature is not None:
            payload["temperature"] = model.temperature
        headers = {"Authorization": f"Bearer {key}"}
        client = self._client()
        last: ProviderError | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                self._sleep(self.backoff * 2 ** (attempt - 1))
            self._limiter(model).acquire()
            try:
                resp = client.post(model.endpoint, json=payload, headers=headers)
            except httpx.TransportError as exc:
                last = ProviderError(f"transport error: {exc}", status=None, body=str(exc))
                continue
            if resp.status_code in RETRY_STATUSES:
                last = ProviderError(status=resp.status_code, body=resp.text)
                log.warning("%s returned %d (attempt %d)", model.model_name, resp.status_code, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise ProviderError(status=resp.status_code, body=resp.text)
            try:
                body = resp.json()
                text = body["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError):
                raise ProviderError("malformed response", status=resp.status_code, body=resp.text) from None
            return text or "", dict(body.get("usage") or {})
        raise last


# response parsing

_STRATEGY_RE = re.compile(r"<repair_strategy\s*>(.*?)(?:</repair_strategy\s*>|\Z)", re.DOTALL)
_FENCE = "```"


def split_repair_strategy(raw: str) -> tuple[str | None, str]:
    """Separate a ``<repair_strategy>`` section from the rest of a response."""
    m = _STRATEGY_RE.search(raw)
    if m is None:
        return None, raw
    return m.group(1).strip(), raw[: m.start()] + raw[m.end() :]


def extract_code_block(raw: str) -> str:
    """Contents of the first fenced block; an unterminated fence runs to the end."""
    _, rest = split_repair_strategy(raw)
    lines = rest.splitlines()
    start = None
    for i, line in enumerate(lines):
        if line.lstrip().startswith(_FENCE):
            start = i
            break
    if start is None:
        raise NoCodeBlock("response contains no fenced code block")
    body = []
    for line in lines[start + 1 :]:
        if line.lstrip().startswith(_FENCE):
            break
        body.append(line)
    code = "\n".join(body)
    if not code.strip():
        raise NoCodeBlock("fenced code block is empty")
    return code
