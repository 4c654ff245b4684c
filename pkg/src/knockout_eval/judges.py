"""Judge backends and the scoring function built on top of them.

A backend turns a rendered prompt into raw text. :class:`Judge` composes a
backend with the prompt templates and the score parser, which is the scoring
function the tournament engine calls.
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
import random
import threading
import time
from dataclasses import dataclass
from typing import Callable, Mapping, Protocol

import httpx

from .errors import EndpointRejected, MissingLatentQuality, TransportError
from .models import CandidateAnswer, EvaluationItem
from .parsing import ParsedScores, parse_individual, parse_pairwise, parse_with_retry
from .prompts import (
    PromptTemplate,
    TemplateKind,
    default_templates,
    format_points,
    render_prompt,
    template_kind_for,
)

logger = logging.getLogger(__name__)

API_KEY_ENV = "LLM_API_KEY"


@dataclass(frozen=True)
class JudgeConfig:
    backend: str = "oracle"  # "remote" | "oracle"
    model_id: str = "simulated-oracle"
    temperature: float = 0.1
    max_retries: int = 3
    endpoint_url: str | None = None
    oracle_noise_sigma: float = 0.0
    oracle_position_bias: float = 0.0
    oracle_seed: int = 0
    max_in_flight: int = 4
    timeout: float = 120.0
    backoff_base: float = 1.0
    backoff_cap: float = 30.0

    def __post_init__(self) -> None:
        if self.backend not in ("remote", "oracle"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.oracle_noise_sigma < 0:
            raise ValueError("oracle_noise_sigma must be >= 0")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.backend == "remote" and not self.endpoint_url:
            raise ValueError("remote backend needs endpoint_url")


@dataclass(frozen=True)
class MatchContext:
    """What a simulated judge needs to know beyond the prompt text."""

    item: EvaluationItem
    first: CandidateAnswer
    second: CandidateAnswer | None
    kind: TemplateKind


class JudgeBackend(Protocol):
    model_id: str

    @property
    def cache_identity(self) -> str: ...

    def complete(self, prompt: str, context: MatchContext | None = None, attempt: int = 0) -> str: ...


def round_to_half(value: float) -> float:
    """Nearest multiple of 0.5, ties rounded up."""
    return math.floor(value * 2 + 0.5) / 2


def stable_seed(*parts: object) -> int:
    h = hashlib.sha256("\x1f".join(str(p) for p in parts).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "big")


_ORACLE_FORMATS = {
    TemplateKind.INDIVIDUAL_EXAM_EN: "Explanation: Simulated assessment.  Score: {a}/{m}",
    TemplateKind.INDIVIDUAL_EXAM_DE: "Begründung: Simulierte Bewertung.   Punktzahl: {a}/{m}",
    TemplateKind.INDIVIDUAL_MT: "Explanation: Simulated assessment.  Score: {a}/{m}",
    TemplateKind.PAIRWISE_EXAM_EN: "Explanation: Simulated assessment.  Answer 1: {a}/{m}  Answer 2: {b}/{m}",
    TemplateKind.PAIRWISE_EXAM_DE: "Begründung: Simulierte Bewertung.   Antwort 1: {a}/{m} Antwort 2: {b}/{m}.",
    TemplateKind.PAIRWISE_MT: "Explanation: Simulated assessment.    Translation 1: {a}/{m}   Translation 2: {b}/{m}",
}


def format_oracle_output(kind: TemplateKind, scores: tuple[float, ...], max_points: float) -> str:
    """Judge text in the output format requested by the template of ``kind``."""
    comma = kind.german
    rendered = [format_points(s, decimal_comma=comma) for s in scores]
    return _ORACLE_FORMATS[kind].format(
        a=rendered[0],
        b=rendered[1] if len(rendered) > 1 else "",
        m=format_points(max_points, decimal_comma=comma),
    )


class OracleBackend:
    """Deterministic simulated judge driven by each answer's latent quality.

    Each listed answer scores ``latent + bias * [listed first] + N(0, sigma)``,
    rounded to the half-point grid and clamped to the item scale. Noise is a
    pure function of (seed, prompt bytes, answer ids), so the same ordering
    always yields the same text and concurrency cannot change results.
    """

    def __init__(self, sigma: float = 0.0, position_bias: float = 0.0, seed: int = 0,
                 model_id: str = "simulated-oracle"):
        self.sigma = sigma
        self.position_bias = position_bias
        self.seed = seed
        self.model_id = model_id
        self.calls = 0
        self._lock = threading.Lock()

    @property
    def cache_identity(self) -> str:
        return f"{self.model_id}|oracle|sigma={self.sigma!r}|bias={self.position_bias!r}|seed={self.seed}"

    def scores_for(self, prompt: str, context: MatchContext) -> tuple[float, ...]:
        listed = [context.first] if context.second is None else [context.first, context.second]
        for ans in listed:
            if ans.latent_quality is None:
                raise MissingLatentQuality(f"answer {ans.id!r} of item {context.item.id!r} has no latent_quality")
        rng = random.Random(stable_seed(self.seed, context.item.id, *(a.id for a in listed), prompt))
        top = context.item.max_points
        out = []
        for position, ans in enumerate(listed):
            noise = rng.gauss(0.0, self.sigma) if self.sigma > 0 else 0.0
            bonus = self.position_bias if (position == 0 and len(listed) == 2) else 0.0
            raw = round_to_half(ans.latent_quality + bonus + noise)
            out.append(min(max(raw, 0.0), top))
        return tuple(out)

    def complete(self, prompt: str, context: MatchContext | None = None, attempt: int = 0) -> str:
        if context is None:
            raise MissingLatentQuality("the simulated judge needs the match context")
        with self._lock:
            self.calls += 1
        return format_oracle_output(context.kind, self.scores_for(prompt, context), context.item.max_points)


class RemoteBackend:
    """Client for an OpenAI-compatible ``/chat/completions`` endpoint."""

    def __init__(
        self,
        endpoint_url: str,
        model_id: str,
        *,
        temperature: float = 0.1,
        max_retries: int = 3,
        max_in_flight: int = 4,
        timeout: float = 120.0,
        backoff_base: float = 1.0,
        backoff_cap: float = 30.0,
        api_key: str | None = None,
        sleep: Callable[[float], None] = time.sleep,
        client: httpx.Client | None = None,
    ):
        self.url = endpoint_url.rstrip("/") + "/chat/completions"
        self.model_id = model_id
        self.temperature = temperature
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.backoff_cap = backoff_cap
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._lock = threading.Lock()
        self.calls = 0
        key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        self._client = client or httpx.Client(timeout=timeout, headers=headers)

    @property
    def cache_identity(self) -> str:
        return self.model_id

    def close(self) -> None:
        self._client.close()

    def _backoff(self, attempt: int) -> float:
        return min(self.backoff_base * (2 ** attempt), self.backoff_cap)

    def complete(self, prompt: str, context: MatchContext | None = None, attempt: int = 0) -> str:
        payload = {
            "model": self.model_id,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        }
        last: str = ""
        for i in range(self.max_retries + 1):
            if i:
                self._sleep(self._backoff(i - 1))
            with self._lock:
                self.calls += 1
            try:
                with self._slots:
                    resp = self._client.post(self.url, json=payload)
            except httpx.TransportError as exc:
                last = f"{type(exc).__name__}: {exc}"
                logger.warning("judge request failed (%s), attempt %d/%d", last, i + 1, self.max_retries + 1)
                continue
            if resp.status_code >= 500 or resp.status_code == 429:
                last = f"HTTP {resp.status_code}: {resp.text[:200]}"
                logger.warning("judge endpoint returned %s, attempt %d/%d", last, i + 1, self.max_retries + 1)
                continue
            if resp.status_code >= 400:
                raise EndpointRejected(resp.status_code, resp.text)
            try:
                return resp.json()["choices"][0]["message"]["content"] or ""
            except (ValueError, KeyError, IndexError, TypeError):
                raise EndpointRejected(resp.status_code, resp.text) from None
        raise TransportError(f"judge endpoint unreachable after {self.max_retries + 1} attempt(s): {last}")


def build_backend(config: JudgeConfig) -> JudgeBackend:
    if config.backend == "oracle":
        return OracleBackend(
            sigma=config.oracle_noise_sigma,
            position_bias=config.oracle_position_bias,
            seed=config.oracle_seed,
            model_id=config.model_id,
        )
    return RemoteBackend(
        config.endpoint_url or "",
        config.model_id,
        temperature=config.temperature,
        max_retries=config.max_retries,
        max_in_flight=config.max_in_flight,
        timeout=config.timeout,
        backoff_base=config.backoff_base,
        backoff_cap=config.backoff_cap,
    )


class Judge:
    """Scoring function: render prompt, ask the backend, parse (with retries)."""

    def __init__(
        self,
        backend: JudgeBackend,
        templates: Mapping[TemplateKind, PromptTemplate] | None = None,
        max_parse_retries: int = 2,
    ):
        self.backend = backend
        self.templates = templates or default_templates()
        self.max_parse_retries = max_parse_retries

    @property
    def model_id(self) -> str:
        return self.backend.model_id

    def _ask(self, prompt: str, context: MatchContext, parse: Callable[[str], ParsedScores]) -> ParsedScores:
        return parse_with_retry(
            lambda attempt: self.backend.complete(prompt, context, attempt),
            parse,
            self.max_parse_retries,
        )

    def score_individual(self, item: EvaluationItem, answer: CandidateAnswer) -> ParsedScores:
        kind = template_kind_for(item, pairwise=False)
        prompt = render_prompt(kind, item, answer, None, self.templates)
        context = MatchContext(item, answer, None, kind)
        return self._ask(prompt, context, lambda raw: parse_individual(raw, item.max_points))

    def score_pair(self, item: EvaluationItem, first: CandidateAnswer, second: CandidateAnswer) -> ParsedScores:
        kind = template_kind_for(item, pairwise=True)
        prompt = render_prompt(kind, item, first, second, self.templates)
        context = MatchContext(item, first, second, kind)
        return self._ask(prompt, context, lambda raw: parse_pairwise(raw, item.max_points, item.task_kind))
