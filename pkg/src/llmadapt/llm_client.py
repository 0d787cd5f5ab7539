"""Chat-completion HTTP client with retries and a record/replay cache."""
from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import requests

logger = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant")


class LLMClientError(RuntimeError):
    """Base class for transport errors."""


class LLMTimeoutError(LLMClientError):
    pass


class LLMHTTPError(LLMClientError):
    def __init__(self, status: int, body: str = ""):
        super().__init__(f"HTTP {status}: {body[:200]}")
        self.status = status


class LLMResponseError(LLMClientError):
    """The body was not a chat-completion response."""


class CacheMissError(LLMClientError):
    pass


class MissingAPIKeyError(LLMClientError):
    pass


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if not self.content:
            raise ValueError("message content must be non-empty")

    def to_dict(self) -> dict:
        return {"role": self.role, "content": self.content}


@dataclass(frozen=True)
class ClientConfig:
    base_url: str = "https://api.openai.com/v1"
    model_name: str = "gpt-4"
    temperature: float = 0.0
    timeout: float = 30.0
    max_retries: int = 2
    api_key_env_var: str = "OPENAI_API_KEY"
    cache_mode: str = "off"
    cache_path: str | None = None
    backoff: float = 0.5

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be nonnegative")
        if self.cache_mode not in ("off", "record", "replay"):
            raise ValueError(f"cache_mode must be off, record or replay, got {self.cache_mode!r}")
        if self.cache_mode != "off" and not self.cache_path:
            raise ValueError("cache_path is required when caching")


def _as_messages(messages) -> list[ChatMessage]:
    return [m if isinstance(m, ChatMessage) else ChatMessage(m["role"], m["content"]) for m in messages]


def request_key(model: str, temperature: float, messages) -> str:
    """Stable hash over model, temperature and the ordered message list."""
    payload = {
        "model": model,
        "temperature": temperature,
        "messages": [m.to_dict() for m in _as_messages(messages)],
    }
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class ResponseCache:
    """Line-delimited JSON file of ``{key, request, response, timestamp}``."""

    def __init__(self, path):
        self.path = Path(path)
        self._entries: dict[str, str] = {}
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    rec = json.loads(line)
                    self._entries[rec["key"]] = rec["response"]

    def get(self, key: str) -> str | None:
        return self._entries.get(key)

    def append(self, key: str, request: dict, response: str) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        rec = {"key": key, "request": request, "response": response, "timestamp": time.time()}
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
        self._entries[key] = response

    def __len__(self) -> int:
        return len(self._entries)


class ChatClient:
    """One request in flight at a time; the instance may be shared across threads."""

    def __init__(self, config: ClientConfig = ClientConfig(), session: requests.Session | None = None):
        self.config = config
        self.session = session or requests.Session()
        self.cache = ResponseCache(config.cache_path) if config.cache_mode != "off" else None
        self._lock = threading.Lock()
        self.network_calls = 0

    @property
    def url(self) -> str:
        return self.config.base_url.rstrip("/") + "/chat/completions"

    def complete(self, messages) -> str:
        msgs = _as_messages(messages)
        cfg = self.config
        key = request_key(cfg.model_name, cfg.temperature, msgs)
        with self._lock:
            if cfg.cache_mode == "replay":
                cached = self.cache.get(key)
                if cached is None:
                    raise CacheMissError(f"no cached response for request {key[:12]}")
                return cached

            api_key = os.environ.get(cfg.api_key_env_var)
            if not api_key:
                raise MissingAPIKeyError(f"environment variable {cfg.api_key_env_var} is not set")
            body = {
                "model": cfg.model_name,
                "messages": [m.to_dict() for m in msgs],
                "temperature": cfg.temperature,
            }
            text = self._post_with_retries(body, api_key)
            if cfg.cache_mode == "record":
                self.cache.append(key, body, text)
            return text

    def _post_with_retries(self, body: dict, api_key: str) -> str:
        headers = {"Authorization": f"Bearer {api_key}", "Content-Type": "application/json"}
        attempts = 1 + self.config.max_retries
        last: LLMClientError | None = None
        for attempt in range(attempts):
            if attempt:
                time.sleep(self.config.backoff * 2 ** (attempt - 1))
            self.network_calls += 1
            try:
                resp = self.session.post(self.url, json=body, headers=headers, timeout=self.config.timeout)
            except requests.Timeout:
                last = LLMTimeoutError(f"request timed out after {self.config.timeout}s")
                logger.warning("attempt %d/%d: %s", attempt + 1, attempts, last)
                continue
            except requests.RequestException as exc:
                raise LLMClientError(f"transport failure: {exc.__class__.__name__}") from None
            if resp.status_code >= 500:
                last = LLMHTTPError(resp.status_code, resp.text)
                logger.warning("attempt %d/%d: %s", attempt + 1, attempts, last)
                continue
            if resp.status_code >= 300:
                raise LLMHTTPError(resp.status_code, resp.text)
            return _extract_content(resp)
        raise last


def _extract_content(resp: requests.Response) -> str:
    try:
        data = resp.json()
        content = data["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise LLMResponseError(f"malformed completion body: {resp.text[:200]!r}") from exc
    if not isinstance(content, str):
        raise LLMResponseError("completion content is not text")
    return content
