"""Language-model backends: an OpenAI-compatible chat client and deterministic mocks."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Protocol, Sequence

import httpx

log = logging.getLogger(__name__)


class BackendError(RuntimeError):
    """The model backend could not produce a response."""


@dataclass(frozen=True)
class ModelExchange:
    system_prompt: str
    user_prompt: str
    response: str
    model_id: str
    latency: float  # seconds
    retries: int
    purpose: str = "trading"
    day_index: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)


class Backend(Protocol):
    model_id: str

    def complete(
        self, system_prompt: str, user_prompt: str, *, purpose: str = "trading", day_index: int | None = None
    ) -> ModelExchange: ...


def prompt_sha256(system_prompt: str, user_prompt: str) -> str:
    return hashlib.sha256(f"{system_prompt}\n\n{user_prompt}".encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class BackendConfig:
    endpoint: str  # full chat-completions URL
    model: str
    temperature: float = 0.0
    timeout: float = 60.0
    max_retries: int = 3
    backoff_base: float = 1.0
    backoff_max: float = 30.0
    rate_limit_per_minute: float | None = None
    max_concurrency: int = 4
    api_key_env: str = "OPENAI_API_KEY"
    seed: int | None = None

    @classmethod
    def from_file(cls, path: str | Path) -> "BackendConfig":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"{path}: unknown backend config key(s) {', '.join(sorted(unknown))}")
        return cls(**obj)


class RateLimiter:
    """Spaces calls at least ``60 / per_minute`` seconds apart."""

    def __init__(self, per_minute: float, clock=time.monotonic, sleep=time.sleep):
        self.interval = 60.0 / per_minute
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next = 0.0

    def wait(self) -> None:
        with self._lock:
            now = self._clock()
            start = max(now, self._next)
            self._next = start + self.interval
        if start > now:
            self._sleep(start - now)


_registry_lock = threading.Lock()
_limiters: dict[str, RateLimiter] = {}
_slots: dict[int, threading.BoundedSemaphore] = {}


def _limiter_for(endpoint: str, per_minute: float) -> RateLimiter:
    with _registry_lock:
        if endpoint not in _limiters:
            _limiters[endpoint] = RateLimiter(per_minute)
        return _limiters[endpoint]


def _slots_for(n: int) -> threading.BoundedSemaphore:
    with _registry_lock:
        return _slots.setdefault(n, threading.BoundedSemaphore(n))


RETRYABLE_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}


class ChatBackend:
    """Chat-completion client with bounded exponential-backoff retries.

    Shared state (per-endpoint rate limiters, the concurrency cap) is
    process-wide, so several runs may use separate instances concurrently.
    """

    def __init__(
        self,
        config: BackendConfig,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.config = config
        self.model_id = config.model
        self._sleep = sleep
        self._client = httpx.Client(timeout=config.timeout, transport=transport)
        self._limiter = (
            _limiter_for(config.endpoint, config.rate_limit_per_minute) if config.rate_limit_per_minute else None
        )
        self._slots = _slots_for(config.max_concurrency)

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _payload(self, system_prompt: str, user_prompt: str) -> dict:
        payload = {
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [
                {"role": "system", "content": system_prompt},
                {"role": "user", "content": user_prompt},
            ],
        }
        if self.config.seed is not None:
            payload["seed"] = self.config.seed
        return payload

    def complete(self, system_prompt, user_prompt, *, purpose="trading", day_index=None) -> ModelExchange:
        payload = self._payload(system_prompt, user_prompt)
        started = time.perf_counter()
        last_error = "no attempt made"
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                delay = min(self.config.backoff_base * 2 ** (attempt - 1), self.config.backoff_max)
                log.warning("backend retry %d/%d in %.1fs: %s", attempt, self.config.max_retries, delay, last_error)
                self._sleep(delay)
            if self._limiter:
                self._limiter.wait()
            try:
                with self._slots:
                    resp = self._client.post(self.config.endpoint, json=payload, headers=self._headers())
            except httpx.TransportError as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                continue
            if resp.status_code in RETRYABLE_STATUS:
                last_error = f"HTTP {resp.status_code}"
                continue
            if resp.status_code >= 400:
                raise BackendError(f"HTTP {resp.status_code} from {self.config.endpoint}: {resp.text[:200]}")
            try:
                content = resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError):
                raise BackendError(f"unexpected response body from {self.config.endpoint}") from None
            return ModelExchange(
                system_prompt=system_prompt,
                user_prompt=user_prompt,
                response=content or "",
                model_id=self.model_id,
                latency=time.perf_counter() - started,
                retries=attempt,
                purpose=purpose,
                day_index=day_index,
            )
        raise BackendError(f"gave up after {self.config.max_retries} retries: {last_error}")

    def close(self) -> None:
        self._client.close()


def render_action_response(action: float, rationale: str = "Scripted decision.") -> str:
    """The documented response template the action parser reads back."""
    return f"Reasoning: {rationale}\nAction: {action!r}"


@dataclass
class MockBackend:
    """Deterministic stand-in for a hosted model.

    Lookup order: an exact prompt hash, then (for trading prompts) the scripted
    action for the day index, then a default. Analyst prompts without a hash
    match are echoed back, which keeps reports a pure function of their inputs.
    """

    responses_by_hash: Mapping[str, str] = field(default_factory=dict)
    actions_by_day: Mapping[int, float] = field(default_factory=dict)
    default_action: float = 0.0
    fail_from_day: int | None = None
    model_id: str = "mock"
    calls: int = 0

    @classmethod
    def scripted(cls, actions: Sequence[float], **kwargs) -> "MockBackend":
        return cls(actions_by_day=dict(enumerate(actions)), **kwargs)

    @classmethod
    def from_jsonl(cls, path: str | Path, **kwargs) -> "MockBackend":
        by_hash, by_day = {}, {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
                if "prompt_sha256" in obj:
                    by_hash[obj["prompt_sha256"]] = obj["response"]
                elif "day_index" in obj:
                    by_day[int(obj["day_index"])] = float(obj["action"])
                else:
                    raise ValueError(f"{path}:{lineno}: expected prompt_sha256 or day_index")
        return cls(responses_by_hash=by_hash, actions_by_day=by_day, **kwargs)

    def complete(self, system_prompt, user_prompt, *, purpose="trading", day_index=None) -> ModelExchange:
        self.calls += 1
        if self.fail_from_day is not None and day_index is not None and day_index >= self.fail_from_day:
            raise BackendError(f"mock outage on day {day_index}")
        key = prompt_sha256(system_prompt, user_prompt)
        if key in self.responses_by_hash:
            response = self.responses_by_hash[key]
        elif purpose == "trading":
            response = render_action_response(self.actions_by_day.get(day_index, self.default_action))
        else:
            response = f"[{purpose} analysis]\n{user_prompt}"
        return ModelExchange(system_prompt, user_prompt, response, self.model_id, 0.0, 0, purpose, day_index)
