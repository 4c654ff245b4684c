"""Score extraction from raw judge text."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Callable

from .errors import NoScoreFound, ScoreOutOfRange, ScoreParseError, UnscorableResponse
from .models import TaskKind

logger = logging.getLogger(__name__)

_NUM = r"(-?\d+(?:[.,]\d+)?)"
_INDIVIDUAL = re.compile(
    r"\b(?:score|punktzahl)\s*:?[\s*]*" + _NUM + r"(?:\s*/\s*" + _NUM + r")?",
    re.IGNORECASE,
)
_EXPLANATION = re.compile(r"(?:explanation|begr[üu]ndung)\s*:\s*(.*)", re.IGNORECASE | re.DOTALL)

_PAIR_LABELS = {
    TaskKind.EXAM_GRADING: r"(?:answer|antwort)",
    TaskKind.TRANSLATION: r"translation",
}


def _pair_pattern(label: str, index: int) -> re.Pattern[str]:
    return re.compile(rf"\b{label}\s*{index}\s*[*]*\s*:[\s*]*{_NUM}", re.IGNORECASE)


_PAIR_PATTERNS = {
    kind: (_pair_pattern(label, 1), _pair_pattern(label, 2)) for kind, label in _PAIR_LABELS.items()
}


@dataclass(frozen=True)
class ParsedScores:
    scores: tuple[float, ...]
    explanation: str | None = None
    raw_text: str = ""
    attempts: int = 1


def _to_float(token: str) -> float:
    return float(token.replace(",", "."))


def _checked(value: float, max_points: float) -> float:
    if not 0 <= value <= max_points:
        raise ScoreOutOfRange(value, max_points)
    return value


def _explanation(raw_text: str, cut: int) -> str | None:
    m = _EXPLANATION.search(raw_text[:cut])
    if not m:
        return None
    text = m.group(1).strip()
    return text or None


def parse_individual(raw_text: str, max_points: float) -> ParsedScores:
    """Return the last ``Score: X/Y`` (or ``Punktzahl: X/Y``) verdict in the text."""
    matches = list(_INDIVIDUAL.finditer(raw_text))
    if not matches:
        raise NoScoreFound(f"no score found in judge output: {raw_text[:200]!r}")
    last = matches[-1]
    value = _checked(_to_float(last.group(1)), max_points)
    return ParsedScores((value,), _explanation(raw_text, last.start()), raw_text)


def parse_pairwise(raw_text: str, max_points: float, task_kind: TaskKind) -> ParsedScores:
    """Extract both labelled scores, returned in label order."""
    first_pat, second_pat = _PAIR_PATTERNS[TaskKind(task_kind)]
    found = []
    for pat in (first_pat, second_pat):
        hits = list(pat.finditer(raw_text))
        if not hits:
            raise NoScoreFound(f"missing labelled score in judge output: {raw_text[:200]!r}")
        found.append(hits[-1])
    scores = tuple(_checked(_to_float(m.group(1)), max_points) for m in found)
    cut = min(m.start() for m in found)
    return ParsedScores(scores, _explanation(raw_text, cut), raw_text)


def parse_with_retry(
    complete_fn: Callable[[int], str],
    parse_fn: Callable[[str], ParsedScores],
    max_retries: int,
) -> ParsedScores:
    """Call the judge until its output parses, at most ``max_retries + 1`` times.

    ``complete_fn`` receives the zero-based attempt number so callers (the
    response cache in particular) can tell a retry from the first request.
    """
    if max_retries < 0:
        raise ValueError("max_retries must be >= 0")
    raw_texts: list[str] = []
    last_error: ScoreParseError | None = None
    for attempt in range(max_retries + 1):
        raw = complete_fn(attempt)
        raw_texts.append(raw)
        try:
            parsed = parse_fn(raw)
        except ScoreParseError as exc:
            logger.debug("unparseable judge output on attempt %d: %s", attempt + 1, exc)
            last_error = exc
            continue
        return ParsedScores(parsed.scores, parsed.explanation, raw, attempt + 1)
    raise UnscorableResponse(raw_texts, last_error)
