"""Chat-completion access with a deterministic offline mock.

The live backend speaks the de-facto OpenAI-compatible chat-completions
protocol over HTTPS, configured entirely through environment variables
(GPUDSE_LLM_BASE_URL, GPUDSE_LLM_API_KEY, GPUDSE_LLM_MODEL). Transient
failures retry up to 3 times with exponential backoff. The mock backend
replays scripted replies so every exploration and benchmark path runs
without network access.
"""

from __future__ import annotations

import json
import os
import re
import time
from dataclasses import dataclass, field
from typing import Callable

import requests

ENV_BASE_URL = "GPUDSE_LLM_BASE_URL"
ENV_API_KEY = "GPUDSE_LLM_API_KEY"
ENV_MODEL = "GPUDSE_LLM_MODEL"

MAX_RETRIES = 3


class LlmError(Exception):
    pass


class Timeout(LlmError):
    pass


class AuthFailure(LlmError):
    pass


class RateLimited(LlmError):
    pass


class MalformedResponse(LlmError):
    pass


class ParseError(LlmError):
    def __init__(self, reason: str, position: int = 0):
        super().__init__(f"at offset {position}: {reason}")
        self.reason = reason
        self.position = position


@dataclass(frozen=True)
class ChatRequest:
    system_prompt: str
    messages: tuple[tuple[str, str], ...]  # (role, text)
    temperature: float = 0.0
    max_tokens: int = 1024
    model_name: str = ""

    def __post_init__(self):
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must lie in [0, 2]")


@dataclass
class MockBackend:
    """Scripted replies in order; exceptions in the script are raised once
    each, exercising the retry policy deterministically."""

    script: list = field(default_factory=list)
    requests_seen: list = field(default_factory=list)
    retries_logged: int = 0

    def send(self, req: ChatRequest) -> str:
        self.requests_seen.append(req)
        if not self.script:
            raise MalformedResponse("mock script exhausted")
        item = self.script.pop(0)
        if isinstance(item, Exception):
            raise item
        return str(item)


class HttpBackend:
    """OpenAI-compatible /chat/completions client."""

    def __init__(self, base_url: str | None = None, api_key: str | None = None,
                 model: str | None = None, timeout_s: float = 60.0,
                 session: requests.Session | None = None):
        self.base_url = (base_url or os.environ.get(ENV_BASE_URL, "")).rstrip("/")
        self.api_key = api_key or os.environ.get(ENV_API_KEY, "")
        self.model = model or os.environ.get(ENV_MODEL, "")
        self.timeout_s = timeout_s
        self.session = session or requests.Session()
        if not self.base_url:
            raise LlmError(f"no endpoint configured; set {ENV_BASE_URL}")

    def send(self, req: ChatRequest) -> str:
        payload = {
            "model": req.model_name or self.model,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
            "messages": [{"role": "system", "content": req.system_prompt}]
            + [{"role": role, "content": text} for role, text in req.messages],
        }
        headers = {"Authorization": f"Bearer {self.api_key}", "Content-Type": "application/json"}
        try:
            resp = self.session.post(
                f"{self.base_url}/chat/completions", json=payload,
                headers=headers, timeout=self.timeout_s,
            )
        except requests.Timeout as exc:
            raise Timeout(str(exc)) from exc
        except requests.RequestException as exc:
            raise MalformedResponse(str(exc)) from exc
        if resp.status_code in (401, 403):
            raise AuthFailure(f"HTTP {resp.status_code}")
        if resp.status_code == 429:
            raise RateLimited("HTTP 429")
        if resp.status_code >= 500:
            raise Timeout(f"HTTP {resp.status_code}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError) as exc:
            raise MalformedResponse(f"unexpected response shape: {exc}") from exc


def complete(req: ChatRequest, backend, sleep: Callable[[float], None] = time.sleep) -> str:
    """Send a request, retrying transient failures (timeouts, rate limits)
    up to MAX_RETRIES with exponential backoff. Auth and malformed-response
    failures are terminal immediately."""
    delay = 0.5
    attempt = 0
    while True:
        try:
            return backend.send(req)
        except (Timeout, RateLimited):
            attempt += 1
            if attempt > MAX_RETRIES:
                raise
            if hasattr(backend, "retries_logged"):
                backend.retries_logged += 1
            sleep(delay)
            delay *= 2


_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


def extract_json_block(text: str) -> tuple[str, int]:
    """The fenced JSON block if present, else the first {...} span.
    Returns (payload, offset into text)."""
    m = _FENCE_RE.search(text)
    if m:
        return m.group(1).strip(), m.start(1)
    start = text.find("{")
    if start < 0:
        raise ParseError("no JSON object found", 0)
    depth = 0
    for i in range(start, len(text)):
        if text[i] == "{":
            depth += 1
        elif text[i] == "}":
            depth -= 1
            if depth == 0:
                return text[start : i + 1], start
    raise ParseError("unbalanced braces in JSON object", start)


def serialize_directive(directive) -> str:
    doc = {
        "target_bottleneck": directive.target_bottleneck,
        "boosts": [[p, s] for p, s in directive.boosts],
        "tradeoff": list(directive.tradeoff) if directive.tradeoff else None,
        "rationale": directive.rationale,
    }
    return json.dumps(doc, sort_keys=True)


def parse_directive(text: str, spec):
    """Parse a directive payload (fenced or bare JSON) into a
    StrategyDirective, validating parameter and resource names against the
    design space. Raises ParseError with position and reason."""
    from .loop import StrategyDirective
    from .perfmodel import RESOURCES
    from .space import PARAM_NAMES

    if not text or not text.strip():
        raise ParseError("empty reply", 0)
    payload, offset = extract_json_block(text)
    try:
        doc = json.loads(payload)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", offset + exc.pos) from exc
    if not isinstance(doc, dict):
        raise ParseError("payload must be a JSON object", offset)

    target = doc.get("target_bottleneck")
    if target not in RESOURCES:
        raise ParseError(f"unknown resource {target!r}", offset)
    raw_boosts = doc.get("boosts")
    if not isinstance(raw_boosts, list) or not raw_boosts:
        raise ParseError("boosts must be a non-empty list", offset)
    boosts = []
    for item in raw_boosts:
        try:
            param, steps = item
        except (TypeError, ValueError):
            raise ParseError(f"boost entry {item!r} is not a [parameter, steps] pair", offset)
        if param not in PARAM_NAMES:
            raise ParseError(f"unknown parameter {param!r}", offset)
        if not isinstance(steps, int) or steps == 0:
            raise ParseError(f"boost steps for {param} must be a nonzero integer", offset)
        boosts.append((param, steps))
    tradeoff = None
    raw_tr = doc.get("tradeoff")
    if raw_tr is not None:
        try:
            param, steps = raw_tr
        except (TypeError, ValueError):
            raise ParseError(f"tradeoff {raw_tr!r} is not a [parameter, steps] pair", offset)
        if param not in PARAM_NAMES:
            raise ParseError(f"unknown parameter {param!r}", offset)
        if not isinstance(steps, int) or steps == 0:
            raise ParseError(f"tradeoff steps for {param} must be a nonzero integer", offset)
        tradeoff = (param, steps)
    named = [p for p, _ in boosts] + ([tradeoff[0]] if tradeoff else [])
    if len(named) != len(set(named)):
        raise ParseError("parameters in a directive must be distinct", offset)
    return StrategyDirective(
        target_bottleneck=target,
        boosts=tuple(boosts),
        tradeoff=tradeoff,
        aggressiveness=len(named),
        rationale=str(doc.get("rationale", "")),
    )


def parse_sign_table(text: str) -> dict:
    """Parse an influence sign table reply into {param: {metric: sign_str}}."""
    payload, offset = extract_json_block(text)
    try:
        doc = json.loads(payload)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", offset + exc.pos) from exc
    table = doc.get("influences")
    if not isinstance(table, dict):
        raise ParseError("missing 'influences' object", offset)
    return table


def parse_answer_index(text: str, n_options: int = 4) -> int:
    """Extract an option choice (letter or number) from a reply."""
    m = re.search(r"\b([A-D])\b", text.strip(), re.IGNORECASE)
    if m:
        idx = ord(m.group(1).upper()) - ord("A")
        if idx < n_options:
            return idx
    m = re.search(r"\b([0-3])\b", text)
    if m:
        return int(m.group(1))
    raise ParseError("no option letter found in reply", 0)
