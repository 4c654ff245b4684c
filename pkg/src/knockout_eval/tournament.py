"""Knockout assessment and the individual / naive-pairwise baselines.

Each round the surviving answers are shuffled with a permutation keyed by
(seed, round) and paired consecutively; an odd survivor count leaves the
last shuffled answer unmatched and it advances without a score. Every match
score is appended to the answer's ledger, and an answer's final score is the
mean of its ledger once the tournament has a single survivor.
"""

from __future__ import annotations

import logging
import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence, TypeVar

from .errors import TooFewAnswers, UnscorableResponse
from .judges import Judge, stable_seed
from .models import (
    CHAMPION,
    AssessmentResult,
    CandidateAnswer,
    EvaluationItem,
    Judgment,
    MatchRecord,
    Method,
    Ordering,
    ScoreEntry,
    ScoreLedger,
    final_average,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True)
class EngineConfig:
    method: Method = Method.KNOCKOUT
    seed: int = 0
    max_parse_retries: int = 2
    match_workers: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "method", Method(self.method))
        if self.max_parse_retries < 0:
            raise ValueError("max_parse_retries must be >= 0")
        if self.match_workers < 1:
            raise ValueError("match_workers must be >= 1")


def item_seed(seed: int, item_id: str) -> int:
    """Per-question sub-seed so pairings differ between questions of one run."""
    return stable_seed("item", seed, item_id)


def pair_round(
    surviving_answer_ids: Sequence[str], round_index: int, seed: int
) -> tuple[list[tuple[str, str]], str | None]:
    ids = sorted(surviving_answer_ids)
    if len(ids) < 2:
        raise TooFewAnswers(f"need at least 2 answers to pair, got {len(ids)}")
    random.Random(stable_seed("round", seed, round_index)).shuffle(ids)
    pairs = [(ids[k], ids[k + 1]) for k in range(0, len(ids) - 1, 2)]
    bye = ids[-1] if len(ids) % 2 else None
    return pairs, bye


def _winner(first_id: str, second_id: str, scores: tuple[float, float]) -> str:
    # ties go to the second-listed answer
    return first_id if scores[0] > scores[1] else second_id


def advance(match: MatchRecord) -> str:
    return _winner(match.first_answer_id, match.second_answer_id, match.final_scores)


def run_match(
    item: EvaluationItem,
    first: CandidateAnswer,
    second: CandidateAnswer,
    judge: Judge,
    debiased: bool,
    *,
    match_id: str = "m",
    round_index: int = 1,
) -> MatchRecord:
    """One question-level match; debiased mode also asks with the order swapped."""
    if first.id == second.id:
        raise ValueError("an answer cannot play itself")
    forward = judge.score_pair(item, first, second)
    orderings = [Ordering((first.id, second.id), forward.raw_text, forward.scores, forward.attempts)]
    final = (forward.scores[0], forward.scores[1])
    if debiased:
        backward = judge.score_pair(item, second, first)
        orderings.append(Ordering((second.id, first.id), backward.raw_text, backward.scores, backward.attempts))
        final = ((forward.scores[0] + backward.scores[1]) / 2, (forward.scores[1] + backward.scores[0]) / 2)
    return MatchRecord(
        match_id=match_id,
        round_index=round_index,
        first_answer_id=first.id,
        second_answer_id=second.id,
        orderings=tuple(orderings),
        final_scores=final,
        winner_id=_winner(first.id, second.id, final),
    )


def _map(fn: Callable[[T], R], jobs: Sequence[T], workers: int) -> list[R]:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


def _calls(matches: Sequence[MatchRecord]) -> int:
    return sum(o.attempts for m in matches for o in m.orderings)


def _play_round(
    item: EvaluationItem,
    pairs: list[tuple[str, str]],
    round_index: int,
    judge: Judge,
    config: EngineConfig,
) -> list[MatchRecord]:
    def play(job: tuple[int, tuple[str, str]]) -> MatchRecord:
        k, (a, b) = job
        return run_match(
            item, item.answer(a), item.answer(b), judge, config.method.debiased,
            match_id=f"r{round_index:02d}-m{k:03d}", round_index=round_index,
        )

    return _map(play, list(enumerate(pairs)), config.match_workers)


def _with_retries(judge: Judge, config: EngineConfig) -> Judge:
    if judge.max_parse_retries == config.max_parse_retries:
        return judge
    return Judge(judge.backend, judge.templates, config.max_parse_retries)


def run_knockout(item: EvaluationItem, judge: Judge, config: EngineConfig) -> AssessmentResult:
    judge = _with_retries(judge, config)
    method = config.method if config.method.is_knockout else Method.KNOCKOUT
    ids = [a.id for a in item.answers]
    ledger = ScoreLedger(item.max_points, ids)
    matches: list[MatchRecord] = []
    sub_seed = item_seed(config.seed, item.id)

    def result(champion: str | None) -> AssessmentResult:
        ledger.canonicalize()
        finals = {a: (final_average(ledger, a) if ledger.entries(a) else None) for a in ids}
        return AssessmentResult(
            item_id=item.id, method=method, final_scores=finals, seed=config.seed,
            ledger=ledger, matches=list(matches), champion_id=champion,
            judge_call_count=_calls(matches),
        )

    survivors = list(ids)
    round_index = 1
    while len(survivors) > 1:
        pairs, bye = pair_round(survivors, round_index, sub_seed)
        try:
            records = _play_round(item, pairs, round_index, judge, config)
        except UnscorableResponse as exc:
            exc.partial_result = result(None)
            raise
        advancing = []
        for rec in records:
            matches.append(rec)
            for answer_id, score in zip((rec.first_answer_id, rec.second_answer_id), rec.final_scores):
                ledger.add(answer_id, ScoreEntry(round_index, rec.match_id, score))
            winner = advance(rec)
            loser = rec.second_answer_id if winner == rec.first_answer_id else rec.first_answer_id
            ledger.elimination_round[loser] = round_index
            advancing.append(winner)
        if bye is not None:
            advancing.append(bye)
        survivors = advancing
        round_index += 1

    champion = survivors[0] if survivors else None
    if champion is not None:
        ledger.elimination_round[champion] = CHAMPION
    return result(champion)


def run_individual(item: EvaluationItem, judge: Judge, config: EngineConfig) -> AssessmentResult:
    judge = _with_retries(judge, config)
    judgments: list[Judgment] = []

    def score(answer: CandidateAnswer) -> Judgment:
        parsed = judge.score_individual(item, answer)
        return Judgment(answer.id, parsed.raw_text, parsed.scores[0], parsed.attempts)

    try:
        judgments = _map(score, list(item.answers), config.match_workers)
    except UnscorableResponse as exc:
        exc.partial_result = AssessmentResult(item.id, Method.INDIVIDUAL, {}, config.seed)
        raise
    return AssessmentResult(
        item_id=item.id,
        method=Method.INDIVIDUAL,
        final_scores={j.answer_id: j.score for j in judgments},
        seed=config.seed,
        judgments=judgments,
        judge_call_count=sum(j.attempts for j in judgments),
    )


def run_naive_pairwise(item: EvaluationItem, judge: Judge, config: EngineConfig) -> AssessmentResult:
    """A single round of pairings; the bye answer (odd N) stays unscored."""
    judge = _with_retries(judge, config)
    ids = [a.id for a in item.answers]
    pairs, _bye = pair_round(ids, 1, item_seed(config.seed, item.id))
    ledger = ScoreLedger(item.max_points, ids)
    try:
        matches = _play_round(item, pairs, 1, judge, config)
    except UnscorableResponse as exc:
        exc.partial_result = AssessmentResult(item.id, Method.NAIVE_PAIRWISE, {}, config.seed, ledger=ledger)
        raise
    finals: dict[str, float | None] = {a: None for a in ids}
    for rec in matches:
        for answer_id, score in zip((rec.first_answer_id, rec.second_answer_id), rec.final_scores):
            ledger.add(answer_id, ScoreEntry(1, rec.match_id, score))
            finals[answer_id] = score
    return AssessmentResult(
        item_id=item.id,
        method=Method.NAIVE_PAIRWISE,
        final_scores=finals,
        seed=config.seed,
        ledger=ledger,
        matches=matches,
        judge_call_count=_calls(matches),
    )


def run_assessment(item: EvaluationItem, judge: Judge, config: EngineConfig) -> AssessmentResult:
    if config.method is Method.INDIVIDUAL:
        return run_individual(item, judge, config)
    if config.method is Method.NAIVE_PAIRWISE:
        return run_naive_pairwise(item, judge, config)
    return run_knockout(item, judge, config)


def expected_rounds(n: int) -> int:
    return math.ceil(math.log2(n)) if n >= 2 else 0
