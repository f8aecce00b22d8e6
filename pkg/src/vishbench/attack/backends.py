"""LLM backends: an OpenAI-compatible chat client and an offline mock."""
from __future__ import annotations

import logging
import os
import random
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

import httpx
import numpy as np

from ..errors import ConfigError, GenerationError, ProtocolError
from .prompt import extract_transcript

log = logging.getLogger(__name__)

RETRY_STATUS = {408, 409, 429, 500, 502, 503, 504}


@dataclass(frozen=True)
class Price:
    input_per_1M_tokens: float = 0.0
    output_per_1M_tokens: float = 0.0

    def cost(self, prompt_tokens: int, completion_tokens: int) -> float:
        return prompt_tokens * self.input_per_1M_tokens / 1e6 + completion_tokens * self.output_per_1M_tokens / 1e6


@dataclass(frozen=True)
class LlmBackendConfig:
    base_url: str
    model_name: str
    api_key_env: str = "OPENAI_API_KEY"
    temperature: float = 0.7
    max_output_tokens: int = 2048
    request_timeout: float = 120.0
    max_retries: int = 5
    price: Price = field(default_factory=Price)
    backoff_base: float = 1.0
    backoff_factor: float = 2.0

    def __post_init__(self):
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if self.price.input_per_1M_tokens < 0 or self.price.output_per_1M_tokens < 0:
            raise ConfigError("prices must be >= 0")
        if self.max_output_tokens < 1:
            raise ConfigError("max_output_tokens must be >= 1")


@dataclass(frozen=True)
class Completion:
    text: str
    prompt_tokens: int
    completion_tokens: int
    latency: float


class Backend(Protocol):
    model_name: str
    temperature: float
    max_output_tokens: int
    price: Price

    def complete(self, prompt: str) -> Completion: ...


def _retry_after(resp: httpx.Response) -> float | None:
    value = resp.headers.get("retry-after")
    if value is None:
        return None
    try:
        return max(0.0, float(value))
    except ValueError:
        return None


def parse_chat_response(body) -> tuple[str, int, int]:
    """Pull ``(content, prompt_tokens, completion_tokens)`` out of a chat-completions body."""
    try:
        content = body["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        raise ProtocolError("response lacks choices[0].message.content") from None
    if not isinstance(content, str) or not content.strip():
        raise ProtocolError("response content is empty")
    usage = body.get("usage") or {}
    try:
        pt, ct = int(usage.get("prompt_tokens", 0)), int(usage.get("completion_tokens", 0))
    except (TypeError, ValueError):
        raise ProtocolError("usage token counts are not integers") from None
    if not usage:
        log.warning("response carried no usage block; token counts recorded as 0")
    return content, pt, ct


class OpenAIChatBackend:
    """``POST {base_url}/chat/completions`` with exponential backoff.

    Retries transport errors and retryable statuses; a ``Retry-After``
    header overrides the computed delay.
    """

    def __init__(
        self,
        config: LlmBackendConfig,
        *,
        api_key: str | None = None,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
    ):
        self.config = config
        key = api_key if api_key is not None else os.environ.get(config.api_key_env)
        if key is None:
            raise ConfigError(f"environment variable {config.api_key_env} is not set")
        self.client = httpx.Client(
            timeout=config.request_timeout,
            headers={"Authorization": f"Bearer {key}"},
            transport=transport,
        )
        self.url = config.base_url.rstrip("/") + "/chat/completions"
        self._sleep = sleep
        self._rng = rng or random.Random()

    model_name = property(lambda self: self.config.model_name)
    temperature = property(lambda self: self.config.temperature)
    max_output_tokens = property(lambda self: self.config.max_output_tokens)
    price = property(lambda self: self.config.price)

    def _delay(self, attempt: int) -> float:
        c = self.config
        base = c.backoff_base * c.backoff_factor ** attempt
        return base + self._rng.uniform(0, c.backoff_base)

    def complete(self, prompt: str) -> Completion:
        c = self.config
        body = {
            "model": c.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": c.temperature,
            "max_tokens": c.max_output_tokens,
        }
        last_error = "no attempt made"
        for attempt in range(c.max_retries + 1):
            wait = None
            t0 = time.perf_counter()
            try:
                resp = self.client.post(self.url, json=body)
            except httpx.TransportError as exc:
                last_error = f"{type(exc).__name__}: {exc}"
            else:
                latency = time.perf_counter() - t0
                if resp.is_success:
                    try:
                        payload = resp.json()
                    except ValueError:
                        raise ProtocolError("response body is not JSON") from None
                    text, pt, ct = parse_chat_response(payload)
                    return Completion(text, pt, ct, latency)
                last_error = f"HTTP {resp.status_code}"
                if resp.status_code not in RETRY_STATUS:
                    raise GenerationError(f"{c.model_name}: {last_error}: {resp.text[:200]}")
                wait = _retry_after(resp)
            if attempt == c.max_retries:
                break
            delay = wait if wait is not None else self._delay(attempt)
            log.info("%s: %s, retrying in %.2fs", c.model_name, last_error, delay)
            self._sleep(delay)
        raise GenerationError(f"{c.model_name}: giving up after {c.max_retries + 1} attempts ({last_error})")


# -- offline mock -------------------------------------------------------------

SYNONYMS: dict[str, tuple[str, ...]] = {
    "account": ("profile", "file"),
    "transfer": ("move", "send"),
    "prosecutor": ("attorney", "official"),
    "police": ("authorities", "officials"),
    "bank": ("branch", "institution"),
    "loan": ("financing", "advance"),
    "refund": ("reimbursement", "return"),
    "card": ("payment method", "plastic"),
    "password": ("passcode", "login details"),
    "verify": ("confirm", "check"),
    "urgent": ("timely", "pressing"),
    "fraud": ("irregularity", "issue"),
    "security": ("safety", "protection"),
    "deposit": ("payment", "lodgement"),
    "investigation": ("review", "inquiry"),
    "warrant": ("document", "order"),
    "suspicious": ("unusual", "odd"),
    "credit": ("balance", "standing"),
    "otp": ("code", "number"),
    "remittance": ("payment", "sending"),
}

FILLER_SENTENCES = (
    "by the way how was your weekend",
    "the weather has been lovely lately",
    "I hope your family is doing well",
    "thanks for taking the time to chat",
    "let me grab a coffee first",
    "we should have lunch sometime",
    "did you see that movie everyone talks about",
    "my friend just got back from holiday",
)


def mock_generate(prompt: str, seed: int = 0, *, every: int = 8) -> str:
    """Deterministic stand-in for an LLM rewrite.

    Words found in the synonym table are swapped for a seeded choice of
    paraphrase; one filler sentence is inserted at a seeded position inside
    each window of ``every`` tokens.  Other tokens pass through unchanged.
    """
    tokens = extract_transcript(prompt).split()
    rng = np.random.default_rng(seed)
    out: list[str] = []
    slot = -1
    for i, tok in enumerate(tokens):
        if i % every == 0:
            slot = i + int(rng.integers(0, every))
        options = SYNONYMS.get(tok.lower())
        out.append(options[int(rng.integers(len(options)))] if options else tok)
        if i == slot:
            out.append(FILLER_SENTENCES[int(rng.integers(len(FILLER_SENTENCES)))])
    return " ".join(out)


class MockBackend:
    """Offline backend; ``mode="identity"`` echoes the transcript unchanged.

    Latency is simulated from the token count so records are reproducible.
    """

    temperature = 0.0
    max_output_tokens = 4096

    def __init__(self, seed: int = 0, *, mode: str = "perturb", every: int = 8,
                 latency_per_token: float = 0.001, name: str | None = None):
        if mode not in ("perturb", "identity"):
            raise ConfigError(f"unknown mock mode {mode!r}")
        self.seed, self.mode, self.every = seed, mode, every
        self.latency_per_token = latency_per_token
        self.model_name = name or f"mock-{mode}-{seed}"
        self.price = Price()
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, prompt: str) -> Completion:
        with self._lock:
            self.calls += 1
        if self.mode == "identity":
            text = extract_transcript(prompt)
        else:
            text = mock_generate(prompt, self.seed, every=self.every)
        pt, ct = len(prompt.split()), len(text.split())
        return Completion(text, pt, ct, round(ct * self.latency_per_token, 9))
