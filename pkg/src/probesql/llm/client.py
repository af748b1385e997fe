"""Chat-completion client with live, record, and replay modes."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, asdict

from ..errors import EndpointError, ReplayMiss
from .cassette import Cassette, fingerprint
from .templates import render_prompt, verify_templates

ENV_ENDPOINT = "PROBESQL_ENDPOINT"
ENV_API_KEY = "PROBESQL_API_KEY"
ENV_MODEL = "PROBESQL_MODEL"


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 0.0
    n_samples: int = 1
    max_tokens: int = 1024
    seed: int | None = None

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class LlmRequest:
    template_id: str
    bindings: dict[str, str] = field(default_factory=dict)
    sampling: SamplingParams = field(default_factory=SamplingParams)

    def prompt(self) -> str:
        return render_prompt(self.template_id, self.bindings)

    def fingerprint(self) -> str:
        return fingerprint(self.template_id, self.bindings, self.sampling.to_dict())


@dataclass
class LlmResponse:
    completions: list[str]
    backend: str                     # "live" or "replay"
    fingerprint: str = ""
    prompt_tokens: int = 0
    completion_tokens: int = 0

    @property
    def text(self) -> str:
        return self.completions[0] if self.completions else ""


class HttpBackend:
    """OpenAI-style chat-completions endpoint; configured from env vars."""

    def __init__(self, endpoint: str | None = None, api_key: str | None = None,
                 model: str | None = None, timeout_s: float = 120.0):
        self.endpoint = endpoint or os.environ.get(ENV_ENDPOINT, "")
        self.api_key = api_key or os.environ.get(ENV_API_KEY, "")
        self.model = model or os.environ.get(ENV_MODEL, "")
        self.timeout_s = timeout_s
        if not self.endpoint:
            raise EndpointError(0, f"no endpoint configured (set {ENV_ENDPOINT})")

    def complete(self, prompt: str, request: LlmRequest) -> tuple[list[str], dict]:
        import requests

        url = self.endpoint.rstrip("/") + "/chat/completions"
        payload: dict = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": request.sampling.temperature,
            "n": request.sampling.n_samples,
            "max_tokens": request.sampling.max_tokens,
        }
        if request.sampling.seed is not None:
            payload["seed"] = request.sampling.seed
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            response = requests.post(url, json=payload, headers=headers,
                                     timeout=self.timeout_s)
        except requests.RequestException as exc:
            raise EndpointError(0, str(exc)) from exc
        if response.status_code != 200:
            raise EndpointError(response.status_code, response.text)
        body = response.json()
        completions = [choice["message"]["content"] or ""
                       for choice in body.get("choices", [])]
        usage = body.get("usage", {})
        return completions, usage


class CallableBackend:
    """Adapter for scripted/in-process backends (tests, fixture building)."""

    def __init__(self, fn):
        self.fn = fn

    def complete(self, prompt: str, request: LlmRequest) -> tuple[list[str], dict]:
        result = self.fn(prompt, request)
        completions = [result] if isinstance(result, str) else list(result)
        if len(completions) == 1 and request.sampling.n_samples > 1:
            completions = completions * request.sampling.n_samples
        return completions, {}


class LlmClient:
    """Mode-aware completion client.

    record: live calls, responses appended to the cassette.
    replay: cassette only; a miss is a hard error so replayed runs are
    guaranteed reproducible.
    live:   no cassette involved.
    """

    def __init__(self, mode: str = "replay", backend=None,
                 cassette: Cassette | None = None):
        if mode not in ("live", "record", "replay"):
            raise ValueError(f"unknown mode {mode!r}")
        if mode in ("live", "record") and backend is None:
            backend = HttpBackend()
        if mode in ("record", "replay") and cassette is None:
            raise ValueError(f"{mode} mode requires a cassette")
        verify_templates()
        self.mode = mode
        self.backend = backend
        self.cassette = cassette
        self.calls: list[tuple[str, str]] = []   # (template_id, fingerprint) log

    def complete(self, request: LlmRequest) -> LlmResponse:
        key = request.fingerprint()
        self.calls.append((request.template_id, key))
        if self.mode == "replay":
            completions = self.cassette.get(key)
            if completions is None:
                raise ReplayMiss(key, request.template_id)
            return LlmResponse(completions=list(completions), backend="replay",
                               fingerprint=key)
        prompt = request.prompt()
        completions, usage = self.backend.complete(prompt, request)
        if self.mode == "record":
            self.cassette.append(key, request.template_id, dict(request.bindings),
                                 request.sampling.to_dict(), completions)
        return LlmResponse(
            completions=completions, backend="live", fingerprint=key,
            prompt_tokens=usage.get("prompt_tokens", 0),
            completion_tokens=usage.get("completion_tokens", 0))
