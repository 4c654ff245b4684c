"""Core data types: items, answers, score ledgers, matches and results."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Literal, Mapping, Union

from .errors import UnknownAnswer, ValidationError

CHAMPION: Literal["champion"] = "champion"
EliminationRound = Union[int, Literal["champion"]]


class TaskKind(str, Enum):
    EXAM_GRADING = "exam"
    TRANSLATION = "translation"


class Difficulty(str, Enum):
    EASY = "Easy"
    MEDIUM = "Medium"
    HARD = "Hard"


class Method(str, Enum):
    INDIVIDUAL = "individual"
    NAIVE_PAIRWISE = "naive-pairwise"
    KNOCKOUT = "knockout"
    KNOCKOUT_DEBIASED = "knockout-debiased"

    @property
    def is_knockout(self) -> bool:
        return self in (Method.KNOCKOUT, Method.KNOCKOUT_DEBIASED)

    @property
    def debiased(self) -> bool:
        return self is Method.KNOCKOUT_DEBIASED


_LANGUAGE_ALIASES = {
    "en": "en", "eng": "en", "english": "en",
    "de": "de", "deu": "de", "ger": "de", "german": "de", "deutsch": "de",
}


def normalize_language(tag: str) -> str:
    """Map language names/tags to a lowercase tag; "en" and "de" are canonical."""
    key = tag.strip().lower()
    return _LANGUAGE_ALIASES.get(key, key)


def _check_score(value: float, max_points: float, what: str) -> None:
    if not (isinstance(value, (int, float)) and math.isfinite(value)):
        raise ValidationError(f"{what} must be a finite number, got {value!r}")
    if not 0 <= value <= max_points:
        raise ValidationError(f"{what}={value} outside [0, {max_points}]")


@dataclass(frozen=True)
class CandidateAnswer:
    id: str
    text: str
    human_score: float | None = None
    latent_quality: float | None = None


@dataclass(frozen=True)
class EvaluationItem:
    """A question (or MT source sentence) together with its candidate answers."""

    id: str
    prompt_text: str
    max_points: float
    answers: tuple[CandidateAnswer, ...]
    task_kind: TaskKind = TaskKind.EXAM_GRADING
    language: str = "en"
    difficulty: Difficulty | None = None
    exam_id: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "answers", tuple(self.answers))
        object.__setattr__(self, "task_kind", TaskKind(self.task_kind))
        object.__setattr__(self, "language", normalize_language(self.language))
        if self.difficulty is not None:
            object.__setattr__(self, "difficulty", Difficulty(self.difficulty))
        if not (isinstance(self.max_points, (int, float)) and self.max_points > 0):
            raise ValidationError(f"item {self.id}: max_points must be > 0, got {self.max_points!r}")
        if self.task_kind is TaskKind.TRANSLATION and self.max_points != 100:
            raise ValidationError(f"item {self.id}: translation items are scored out of 100")
        seen: set[str] = set()
        for ans in self.answers:
            if ans.id in seen:
                raise ValidationError(f"item {self.id}: duplicate answer id {ans.id!r}")
            seen.add(ans.id)
            if ans.human_score is not None:
                _check_score(ans.human_score, self.max_points, f"human_score of {ans.id}")

    def answer(self, answer_id: str) -> CandidateAnswer:
        for ans in self.answers:
            if ans.id == answer_id:
                return ans
        raise UnknownAnswer(answer_id)

    @property
    def is_german(self) -> bool:
        return self.language == "de"


@dataclass(frozen=True)
class ScoreEntry:
    round_index: int
    match_id: str
    score: float


class ScoreLedger:
    """Per-answer record of every score received during a tournament.

    The engine is the only writer; once a result is returned the ledger is
    treated as read-only.
    """

    def __init__(self, max_points: float, answer_ids: Iterable[str] = ()):
        self.max_points = max_points
        self._entries: dict[str, list[ScoreEntry]] = {a: [] for a in answer_ids}
        self.elimination_round: dict[str, EliminationRound] = {}

    def add(self, answer_id: str, entry: ScoreEntry) -> None:
        if entry.round_index < 1:
            raise ValidationError(f"round_index must be >= 1, got {entry.round_index}")
        _check_score(entry.score, self.max_points, f"ledger score for {answer_id}")
        self._entries.setdefault(answer_id, []).append(entry)

    def entries(self, answer_id: str) -> tuple[ScoreEntry, ...]:
        try:
            return tuple(self._entries[answer_id])
        except KeyError:
            raise UnknownAnswer(answer_id) from None

    def answer_ids(self) -> list[str]:
        return list(self._entries)

    def __contains__(self, answer_id: object) -> bool:
        return answer_id in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def canonicalize(self) -> None:
        for entries in self._entries.values():
            entries.sort(key=lambda e: (e.round_index, e.match_id))

    def to_dict(self) -> dict:
        return {
            a: {
                "entries": [
                    {"round_index": e.round_index, "match_id": e.match_id, "score": e.score}
                    for e in entries
                ],
                "elimination_round": self.elimination_round.get(a),
            }
            for a, entries in self._entries.items()
        }


def final_average(ledger: ScoreLedger, answer_id: str) -> float:
    """Mean of every score the answer received over the tournament."""
    entries = ledger.entries(answer_id)
    if not entries:
        raise ValidationError(f"answer {answer_id!r} has no ledger entries")
    return math.fsum(e.score for e in entries) / len(entries)


@dataclass(frozen=True)
class Ordering:
    """One judge call within a match: who was listed first, what came back."""

    presented: tuple[str, str]
    raw_text: str
    scores: tuple[float, float]  # in presentation order
    attempts: int = 1


@dataclass(frozen=True)
class MatchRecord:
    match_id: str
    round_index: int
    first_answer_id: str
    second_answer_id: str
    orderings: tuple[Ordering, ...]
    final_scores: tuple[float, float]
    winner_id: str

    def __post_init__(self) -> None:
        if len(self.orderings) not in (1, 2):
            raise ValidationError("a match has one (biased) or two (debiased) orderings")
        if self.winner_id not in (self.first_answer_id, self.second_answer_id):
            raise ValidationError(f"winner {self.winner_id!r} did not play in {self.match_id}")

    def to_dict(self) -> dict:
        return {
            "match_id": self.match_id,
            "round_index": self.round_index,
            "first_answer_id": self.first_answer_id,
            "second_answer_id": self.second_answer_id,
            "orderings": [
                {
                    "presented": list(o.presented),
                    "raw_text": o.raw_text,
                    "scores": list(o.scores),
                    "attempts": o.attempts,
                }
                for o in self.orderings
            ],
            "final_scores": list(self.final_scores),
            "winner_id": self.winner_id,
        }


@dataclass(frozen=True)
class Judgment:
    """A single individual-assessment call."""

    answer_id: str
    raw_text: str
    score: float
    attempts: int = 1


@dataclass
class AssessmentResult:
    item_id: str
    method: Method
    final_scores: dict[str, float | None]
    seed: int
    ledger: ScoreLedger | None = None
    matches: list[MatchRecord] = field(default_factory=list)
    judgments: list[Judgment] = field(default_factory=list)
    champion_id: str | None = None
    judge_call_count: int = 0

    def elimination_round(self, answer_id: str) -> EliminationRound | None:
        if self.ledger is None:
            return None
        return self.ledger.elimination_round.get(answer_id)

    def n_scores(self, answer_id: str) -> int:
        if self.ledger is not None and answer_id in self.ledger:
            return len(self.ledger.entries(answer_id))
        return 1 if self.final_scores.get(answer_id) is not None else 0

    def scored(self) -> dict[str, float]:
        return {a: s for a, s in self.final_scores.items() if s is not None}

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "method": self.method.value,
            "seed": self.seed,
            "champion_id": self.champion_id,
            "judge_call_count": self.judge_call_count,
            "final_scores": dict(self.final_scores),
            "ledger": self.ledger.to_dict() if self.ledger is not None else None,
            "matches": [m.to_dict() for m in self.matches],
            "judgments": [
                {"answer_id": j.answer_id, "raw_text": j.raw_text, "score": j.score, "attempts": j.attempts}
                for j in self.judgments
            ],
        }


def human_scores(items: Iterable[EvaluationItem]) -> dict[tuple[str, str], float]:
    """(item_id, answer_id) -> human score, for answers that carry one."""
    out: dict[tuple[str, str], float] = {}
    for item in items:
        for ans in item.answers:
            if ans.human_score is not None:
                out[(item.id, ans.id)] = ans.human_score
    return out


def items_by_id(items: Iterable[EvaluationItem]) -> Mapping[str, EvaluationItem]:
    return {item.id: item for item in items}
