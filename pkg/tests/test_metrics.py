import math

import pytest

from conftest import make_item, oracle_judge
from knockout_eval.errors import DegenerateInput, MissingLabel
from knockout_eval.metrics import (
    Grouping,
    elimination_split,
    grouped_report,
    overall_mean,
    pairwise_ranking_accuracy,
    pearson,
    pooled_ranking_accuracy,
    try_pearson,
)
from knockout_eval.models import AssessmentResult, Method, ScoreEntry, ScoreLedger, human_scores, items_by_id
from knockout_eval.tournament import EngineConfig, run_knockout

# value computed by a hand-written textbook formula before the implementation existed
PEARSON_1235_2245 = 0.9433700705169153


def test_pearson_examples():
    assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0, abs=1e-15)
    assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0, abs=1e-15)
    assert pearson([1, 2, 3, 5], [2, 2, 4, 5]) == pytest.approx(PEARSON_1235_2245, abs=1e-12)
    assert PEARSON_1235_2245 == pytest.approx(29 / math.sqrt(945), abs=1e-15)


def test_pearson_degenerate():
    with pytest.raises(DegenerateInput):
        pearson([1], [2])
    with pytest.raises(DegenerateInput):
        pearson([3, 3, 3], [1, 2, 3])
    with pytest.raises(ValueError):
        pearson([1, 2], [1, 2, 3])
    assert try_pearson([0.1] * 5, [1, 2, 3, 4, 5]) is None


def test_ranking_accuracy_examples():
    assert pairwise_ranking_accuracy([1, 2, 3], [10, 20, 30]) == 1.0
    assert pairwise_ranking_accuracy([3, 2, 1], [10, 20, 30]) == 0.0
    # (1,2) predicted tie, (1,3) and (2,3) inverted: nothing is credited
    assert pairwise_ranking_accuracy([5, 5, 1], [10, 20, 30]) == 0.0
    assert pairwise_ranking_accuracy([5, 5, 1], [10, 20, 30], tie_credit=0.5) == pytest.approx(1 / 6)


def test_ranking_accuracy_skips_human_ties():
    assert pairwise_ranking_accuracy([1, 2, 3], [10, 10, 30]) == 1.0
    with pytest.raises(DegenerateInput):
        pairwise_ranking_accuracy([1, 2, 3], [7, 7, 7])
    assert pairwise_ranking_accuracy({"a": 1, "b": 2, "c": 9}, {"b": 5, "a": 4}) == 1.0


def result(item_id, finals, method=Method.KNOCKOUT, rounds=None):
    ledger = ScoreLedger(100, finals)
    for k, (aid, v) in enumerate(finals.items()):
        if v is not None:
            ledger.add(aid, ScoreEntry(1, f"m{k}", v))
    if rounds:
        ledger.elimination_round.update(rounds)
    return AssessmentResult(item_id, method, finals, 0, ledger=ledger)


def test_single_group_matches_pearson():
    item = make_item([0, 0, 0, 0], human=[1, 3, 2, 6], item_id="q1")
    res = result("q1", {"a00": 2.0, "a01": 3.0, "a02": 1.0, "a03": 7.0})
    items = items_by_id([item])
    for grouping in (Grouping.WHOLE_DATASET, Grouping.QUESTION_LEVEL):
        [rep] = grouped_report([res], items, grouping)
        assert rep.pearson_r == pearson([2, 3, 1, 7], [1, 3, 2, 6])
        assert rep.n == 4


def test_difficulty_groups():
    easy = make_item([0] * 4, human=[1, 2, 3, 4], item_id="e", difficulty="Easy", ids=list("abcd"))
    hard = make_item([0] * 4, human=[1, 2, 3, 4], item_id="h", difficulty="Hard", ids=list("abcd"))
    items = items_by_id([easy, hard])
    results = [
        result("e", {"a": 1.0, "b": 2.0, "c": 3.0, "d": 4.0}),
        result("h", {"a": 1.0, "b": 2.0, "c": 2.0, "d": 1.0}),
    ]
    reps = {r.group: r for r in grouped_report(results, items, Grouping.BY_DIFFICULTY)}
    assert reps["Easy"].pearson_r == pytest.approx(1.0)
    assert reps["Hard"].pearson_r == pytest.approx(0.0, abs=1e-12)


def test_missing_difficulty_names_items():
    items = items_by_id([make_item([1, 2], human=[1, 2], item_id="qq7")])
    with pytest.raises(MissingLabel, match="qq7"):
        grouped_report([result("qq7", {"a00": 1.0, "a01": 2.0})], items, Grouping.BY_DIFFICULTY)


def test_question_and_exam_level():
    q1 = make_item([0] * 3, human=[1, 2, 3], item_id="q1", exam_id="x", ids=list("abc"))
    q2 = make_item([0] * 3, human=[1, 2, 3], item_id="q2", exam_id="x", ids=list("abc"))
    q3 = make_item([0] * 3, human=[5, 5, 5], item_id="q3", exam_id="y", ids=list("abc"))
    items = items_by_id([q1, q2, q3])
    results = [
        result("q1", {"a": 1.0, "b": 2.0, "c": 3.0}),
        result("q2", {"a": 3.0, "b": 2.0, "c": 1.0}),
        result("q3", {"a": 1.0, "b": 2.0, "c": 3.0}),
    ]
    [ql] = grouped_report(results, items, Grouping.QUESTION_LEVEL)
    assert ql.pearson_r == pytest.approx(0.0) and ql.n_groups == 2 and ql.n_excluded == 1
    [el] = grouped_report(results, items, Grouping.EXAM_LEVEL)
    pooled_x = try_pearson([1, 2, 3, 3, 2, 1], [1, 2, 3, 1, 2, 3])
    assert el.pearson_r == pytest.approx(pooled_x) and el.n_excluded == 1


def test_unscored_answers_are_skipped():
    item = make_item([0] * 3, human=[1, 2, 3], item_id="q")
    res = result("q", {"a00": 1.0, "a01": None, "a02": 3.0}, Method.NAIVE_PAIRWISE)
    [rep] = grouped_report([res], items_by_id([item]), Grouping.WHOLE_DATASET)
    assert rep.n == 2 and rep.pearson_r == pytest.approx(1.0)


def test_elimination_split_constructed():
    human = {("q", a): h for a, h in zip("abcdefgh", [1, 2, 3, 4, 5, 6, 7, 8])}
    rounds = {"a": 1, "b": 1, "c": 1, "d": 1, "e": 2, "f": 2, "g": 3, "h": "champion"}
    finals = {"a": 4.0, "b": 1.0, "c": 3.0, "d": 2.0, "e": 5.0, "f": 6.0, "g": 7.0, "h": 8.0}
    split = elimination_split([result("q", finals, rounds=rounds)], human)
    assert split.later_rounds_r == pytest.approx(1.0)
    assert split.first_round_r < split.later_rounds_r
    assert (split.n_first, split.n_later) == (4, 4)


def test_elimination_split_degenerate():
    # a single two-answer bracket leaves one point on each side of the split
    item = make_item([1.0, 6.0], human=[1, 6], item_id="q")
    res = run_knockout(item, oracle_judge(), EngineConfig())
    with pytest.raises(DegenerateInput):
        elimination_split([res], human_scores([item]))
    split = elimination_split([res], human_scores([item]), strict=False)
    assert split.first_round_r is None and split.later_rounds_r is None
    assert split.difference is None


def test_elimination_split_champions_count_as_later():
    items = [make_item([float(k), float(k + 3)], human=[k, k + 3], item_id=f"q{k}") for k in range(4)]
    results = [run_knockout(it, oracle_judge(), EngineConfig()) for it in items]
    split = elimination_split(results, human_scores(items))
    assert (split.n_first, split.n_later) == (4, 4)
    assert split.first_round_r == pytest.approx(1.0) and split.later_rounds_r == pytest.approx(1.0)


def test_pooled_ranking_accuracy():
    q1 = make_item([0] * 2, human=[1, 2], item_id="q1", exam_id="x", ids=list("ab"))
    q2 = make_item([0] * 2, human=[1, 2], item_id="q2", exam_id="x", ids=list("ab"))
    results = [result("q1", {"a": 1.0, "b": 2.0}), result("q2", {"a": 5.0, "b": 0.0})]
    human = human_scores([q1, q2])
    assert pooled_ranking_accuracy(results, human) == (0.5, 2)
    acc, pairs = pooled_ranking_accuracy(results, human, items=items_by_id([q1, q2]), level=Grouping.EXAM_LEVEL)
    # only (q1.a, q1.b) is ordered correctly among the four human-distinct pairs
    assert pairs == 4 and acc == pytest.approx(0.25)


def test_overall_mean():
    assert overall_mean([0.2, None, 0.4]) == (pytest.approx(0.3), 1)
    assert overall_mean([None]) == (None, 1)
