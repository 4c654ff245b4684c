"""Agreement metrics between judge scores and human reference scores.

Aggregation conventions (used by reports):

* question level: mean of per-question Pearson correlations;
* exam level: mean of per-exam correlations, each pooled over all answers of
  that exam's questions;
* whole dataset: one correlation pooled over every scored answer.

Undefined correlations (fewer than two points or zero variance) are never
coerced to zero; they are skipped in averages and counted as exclusions.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DegenerateInput, MissingLabel
from .models import AssessmentResult, EvaluationItem, human_scores

HumanScores = Mapping[tuple[str, str], float]


class Grouping(str, Enum):
    QUESTION_LEVEL = "question"
    EXAM_LEVEL = "exam"
    WHOLE_DATASET = "whole"
    BY_DIFFICULTY = "difficulty"
    BY_LANGUAGE = "language"
    BY_ELIMINATION_ROUND = "elimination"


@dataclass(frozen=True)
class CorrelationReport:
    method: str
    grouping: Grouping
    group: str | None
    pearson_r: float | None
    n: int
    n_groups: int = 1
    n_excluded: int = 0

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "grouping": self.grouping.value,
            "group": self.group,
            "pearson_r": self.pearson_r,
            "n": self.n,
            "n_groups": self.n_groups,
            "n_excluded": self.n_excluded,
        }


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation; raises DegenerateInput when undefined."""
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise ValueError(f"inputs must be 1-D and equally long, got {xa.shape} and {ya.shape}")
    if xa.size < 2:
        raise DegenerateInput(f"pearson needs at least 2 points, got {xa.size}")
    if np.all(xa == xa[0]) or np.all(ya == ya[0]):
        raise DegenerateInput("pearson undefined for zero-variance input")
    xc = xa - xa.mean()
    yc = ya - ya.mean()
    r = float(np.dot(xc, yc) / math.sqrt(float(np.dot(xc, xc)) * float(np.dot(yc, yc))))
    return min(1.0, max(-1.0, r))


def try_pearson(x: Sequence[float], y: Sequence[float]) -> float | None:
    try:
        return pearson(x, y)
    except DegenerateInput:
        return None


def _pair_credit(pred: Sequence[float], human: Sequence[float], tie_credit: float) -> tuple[float, int]:
    credit = 0.0
    total = 0
    for i, j in itertools.combinations(range(len(pred)), 2):
        dh = human[i] - human[j]
        if dh == 0:
            continue
        total += 1
        dp = pred[i] - pred[j]
        if dp == 0:
            credit += tie_credit
        elif (dp > 0) == (dh > 0):
            credit += 1.0
    return credit, total


def _aligned(pred, human) -> tuple[list[float], list[float]]:
    if isinstance(pred, Mapping):
        if not isinstance(human, Mapping):
            raise TypeError("pred and human must both be mappings or both sequences")
        keys = sorted(set(pred) & set(human))
        return [pred[k] for k in keys], [human[k] for k in keys]
    pred, human = list(pred), list(human)
    if len(pred) != len(human):
        raise ValueError("pred and human differ in length")
    return pred, human


def pairwise_ranking_accuracy(pred, human, *, tie_credit: float = 0.0) -> float:
    """Fraction of human-distinguishable answer pairs the judge orders correctly.

    Accepts two equally long sequences or two mappings keyed by answer id.
    Pairs with tied human scores are skipped; predicted ties earn
    ``tie_credit`` (0 by default, 0.5 for the lenient variant).
    """
    p, h = _aligned(pred, human)
    if len(p) < 2:
        raise DegenerateInput("ranking accuracy needs at least 2 answers")
    credit, total = _pair_credit(p, h, tie_credit)
    if total == 0:
        raise DegenerateInput("no answer pair has distinct human scores")
    return credit / total


def _points(results: Iterable[AssessmentResult], human: HumanScores):
    """Yield (result, answer_id, predicted, human) for every comparable answer."""
    for res in results:
        for answer_id, score in res.final_scores.items():
            if score is None:
                continue
            ref = human.get((res.item_id, answer_id))
            if ref is not None:
                yield res, answer_id, score, ref


@dataclass(frozen=True)
class EliminationSplit:
    first_round_r: float | None
    later_rounds_r: float | None
    n_first: int
    n_later: int

    @property
    def difference(self) -> float | None:
        if self.first_round_r is None or self.later_rounds_r is None:
            return None
        return self.later_rounds_r - self.first_round_r


def elimination_split(
    results: Iterable[AssessmentResult], human: HumanScores, *, strict: bool = True
) -> EliminationSplit:
    """Correlation of answers knocked out in round one versus everyone else.

    With ``strict`` a degenerate partition raises DegenerateInput; otherwise
    its correlation is reported as None.
    """
    first: tuple[list[float], list[float]] = ([], [])
    later: tuple[list[float], list[float]] = ([], [])
    for res, answer_id, score, ref in _points(results, human):
        if not res.method.is_knockout:
            raise ValueError(f"elimination split needs knockout results, got {res.method.value}")
        rnd = res.elimination_round(answer_id)
        if rnd is None:
            continue
        bucket = first if rnd == 1 else later
        bucket[0].append(score)
        bucket[1].append(ref)
    rs = []
    for name, (xs, ys) in (("first round", first), ("later rounds", later)):
        try:
            rs.append(pearson(xs, ys))
        except DegenerateInput as exc:
            if strict:
                raise DegenerateInput(f"{name} partition: {exc}") from exc
            rs.append(None)
    return EliminationSplit(rs[0], rs[1], len(first[0]), len(later[0]))


def _label(item: EvaluationItem, grouping: Grouping) -> str:
    if grouping is Grouping.BY_DIFFICULTY:
        if item.difficulty is None:
            raise MissingLabel(f"item {item.id!r} has no difficulty label")
        return item.difficulty.value
    if grouping is Grouping.BY_LANGUAGE:
        return item.language
    if grouping is Grouping.EXAM_LEVEL:
        if item.exam_id is None:
            raise MissingLabel(f"item {item.id!r} has no exam id")
        return item.exam_id
    raise ValueError(grouping)


def _require_labels(items: Iterable[EvaluationItem], grouping: Grouping) -> None:
    if grouping is Grouping.BY_DIFFICULTY:
        missing = [it.id for it in items if it.difficulty is None]
    elif grouping is Grouping.EXAM_LEVEL:
        missing = [it.id for it in items if it.exam_id is None]
    else:
        return
    if missing:
        raise MissingLabel(f"{grouping.value} label missing on items: {', '.join(missing)}")


def _mean_of_defined(values: list[float | None]) -> tuple[float | None, int, int]:
    defined = [v for v in values if v is not None]
    excluded = len(values) - len(defined)
    mean = math.fsum(defined) / len(defined) if defined else None
    return mean, len(defined), excluded


def grouped_report(
    results: Sequence[AssessmentResult],
    items: Mapping[str, EvaluationItem],
    grouping: Grouping,
    *,
    human: HumanScores | None = None,
    method: str | None = None,
) -> list[CorrelationReport]:
    """Correlation reports for one method's results under ``grouping``."""
    grouping = Grouping(grouping)
    human = human if human is not None else human_scores(items.values())
    if method is None:
        method = results[0].method.value if results else ""

    if grouping is Grouping.BY_ELIMINATION_ROUND:
        split = elimination_split(results, human, strict=False)
        return [
            CorrelationReport(method, grouping, "first", split.first_round_r, split.n_first),
            CorrelationReport(method, grouping, "later", split.later_rounds_r, split.n_later),
        ]

    if grouping is Grouping.WHOLE_DATASET:
        pts = list(_points(results, human))
        r = try_pearson([p[2] for p in pts], [p[3] for p in pts])
        return [CorrelationReport(method, grouping, None, r, len(pts), 1, int(r is None))]

    if grouping is Grouping.QUESTION_LEVEL:
        per_q = []
        total = 0
        for res in results:
            pts = list(_points([res], human))
            total += len(pts)
            per_q.append(try_pearson([p[2] for p in pts], [p[3] for p in pts]))
        mean, n_def, n_exc = _mean_of_defined(per_q)
        return [CorrelationReport(method, grouping, None, mean, total, n_def, n_exc)]

    _require_labels([items[res.item_id] for res in results], grouping)
    buckets: dict[str, tuple[list[float], list[float]]] = defaultdict(lambda: ([], []))
    for res in results:
        label = _label(items[res.item_id], grouping)
        bucket = buckets[label]
        for _res, _a, score, ref in _points([res], human):
            bucket[0].append(score)
            bucket[1].append(ref)

    if grouping is Grouping.EXAM_LEVEL:
        per_exam = [try_pearson(xs, ys) for _, (xs, ys) in sorted(buckets.items())]
        mean, n_def, n_exc = _mean_of_defined(per_exam)
        n = sum(len(xs) for xs, _ in buckets.values())
        return [CorrelationReport(method, grouping, None, mean, n, n_def, n_exc)]

    out = []
    for label, (xs, ys) in sorted(buckets.items()):
        r = try_pearson(xs, ys)
        out.append(CorrelationReport(method, grouping, label, r, len(xs), 1, int(r is None)))
    return out


def pooled_ranking_accuracy(
    results: Sequence[AssessmentResult],
    human: HumanScores,
    *,
    items: Mapping[str, EvaluationItem] | None = None,
    level: Grouping = Grouping.QUESTION_LEVEL,
    tie_credit: float = 0.0,
) -> tuple[float | None, int]:
    """Ranking accuracy pooled over answer pairs; returns (accuracy, pair count).

    At question level only answers to the same question are paired; at exam
    level every pair of answers within one exam counts.
    """
    groups: dict[str, tuple[list[float], list[float]]] = defaultdict(lambda: ([], []))
    for res, _a, score, ref in _points(results, human):
        key = res.item_id
        if level is Grouping.EXAM_LEVEL:
            if items is None:
                raise ValueError("exam-level ranking accuracy needs the items")
            key = _label(items[res.item_id], Grouping.EXAM_LEVEL)
        groups[key][0].append(score)
        groups[key][1].append(ref)
    credit = 0.0
    total = 0
    for xs, ys in groups.values():
        c, t = _pair_credit(xs, ys, tie_credit)
        credit += c
        total += t
    return (credit / total if total else None), total


def overall_mean(cells: Iterable[float | None]) -> tuple[float | None, int]:
    """Arithmetic mean of table cells (the "Overall" column); returns (mean, n_excluded)."""
    mean, _n, excluded = _mean_of_defined(list(cells))
    return mean, excluded
