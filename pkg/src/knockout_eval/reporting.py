"""Run artefacts (scores.csv, matches.json, manifest.json) and analysis reports."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import IdMismatch
from .metrics import Grouping, elimination_split, grouped_report, overall_mean, pooled_ranking_accuracy
from .models import (
    AssessmentResult,
    EvaluationItem,
    Judgment,
    MatchRecord,
    Method,
    Ordering,
    ScoreEntry,
    ScoreLedger,
    TaskKind,
    human_scores,
)

SCORES_COLUMNS = ("item_id", "answer_id", "method", "final_score", "elimination_round", "n_scores")
DECIMALS = 4
REPORT_FORMATS = ("json", "csv", "markdown")

AGGREGATION_NOTES = {
    "question": "mean over questions of the per-question Pearson correlation",
    "exam": "mean over exams of the Pearson correlation pooled over each exam's answers",
    "whole": "Pearson correlation pooled over every scored answer",
    "overall": "arithmetic mean of the row's defined cells",
    "undefined": "correlations with <2 points or zero variance are null and excluded from means",
    "ranking_accuracy": "pairs with tied human scores skipped; predicted ties count as wrong",
}


def dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, indent=2, sort_keys=True) + "\n"


def atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# run artefacts ------------------------------------------------------------

def _fmt_num(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def scores_csv(results: Iterable[AssessmentResult], items: Mapping[str, EvaluationItem]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SCORES_COLUMNS)
    for res in results:
        order = [a.id for a in items[res.item_id].answers] if res.item_id in items else list(res.final_scores)
        for answer_id in order:
            score = res.final_scores.get(answer_id)
            if score is None:
                continue
            rnd = res.elimination_round(answer_id)
            writer.writerow([res.item_id, answer_id, res.method.value, _fmt_num(score),
                             "" if rnd is None else rnd, res.n_scores(answer_id)])
    return buf.getvalue()


def matches_doc(results: Iterable[AssessmentResult]) -> dict:
    out = []
    for res in results:
        doc = res.to_dict()
        doc["unscored"] = [a for a, s in res.final_scores.items() if s is None]
        out.append(doc)
    return {"items": out}


def write_run_outputs(out_dir: Path, results: Sequence[AssessmentResult], items: Mapping[str, EvaluationItem],
                      manifest: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    atomic_write(out_dir / "scores.csv", scores_csv(results, items))
    atomic_write(out_dir / "matches.json", dumps(matches_doc(results)))
    atomic_write(out_dir / "manifest.json", dumps(manifest))


def _ledger_from(doc: dict | None, max_points: float) -> ScoreLedger | None:
    if doc is None:
        return None
    ledger = ScoreLedger(max_points, doc)
    for answer_id, rec in doc.items():
        for e in rec["entries"]:
            ledger.add(answer_id, ScoreEntry(e["round_index"], e["match_id"], e["score"]))
        if rec.get("elimination_round") is not None:
            ledger.elimination_round[answer_id] = rec["elimination_round"]
    return ledger


def _result_from(doc: dict, max_points: float) -> AssessmentResult:
    matches = [
        MatchRecord(
            match_id=m["match_id"], round_index=m["round_index"],
            first_answer_id=m["first_answer_id"], second_answer_id=m["second_answer_id"],
            orderings=tuple(
                Ordering(tuple(o["presented"]), o["raw_text"], tuple(o["scores"]), o.get("attempts", 1))
                for o in m["orderings"]
            ),
            final_scores=tuple(m["final_scores"]), winner_id=m["winner_id"],
        )
        for m in doc["matches"]
    ]
    return AssessmentResult(
        item_id=doc["item_id"],
        method=Method(doc["method"]),
        final_scores=dict(doc["final_scores"]),
        seed=doc["seed"],
        ledger=_ledger_from(doc.get("ledger"), max_points),
        matches=matches,
        judgments=[Judgment(j["answer_id"], j["raw_text"], j["score"], j.get("attempts", 1))
                   for j in doc.get("judgments", [])],
        champion_id=doc.get("champion_id"),
        judge_call_count=doc.get("judge_call_count", 0),
    )


@dataclass
class RunResults:
    directory: Path
    manifest: dict
    results: list[AssessmentResult]

    @property
    def method(self) -> Method:
        return Method(self.manifest["method"])

    @property
    def model_id(self) -> str:
        return self.manifest.get("model_id", "")


def load_run(results_dir: str | Path, items: Mapping[str, EvaluationItem] | None = None) -> RunResults:
    d = Path(results_dir)
    manifest = json.loads((d / "manifest.json").read_text(encoding="utf-8"))
    doc = json.loads((d / "matches.json").read_text(encoding="utf-8"))
    results = []
    for item_doc in doc["items"]:
        item = (items or {}).get(item_doc["item_id"])
        # ledger scores were range-checked when the run wrote them
        results.append(_result_from(item_doc, item.max_points if item else float("inf")))
    return RunResults(d, manifest, results)


# reports ------------------------------------------------------------------

def _round(value: float | None) -> float | None:
    return None if value is None else round(value, DECIMALS)


def check_alignment(runs: Sequence[RunResults], items: Mapping[str, EvaluationItem]) -> None:
    orphans = []
    for run in runs:
        for res in run.results:
            item = items.get(res.item_id)
            known = {a.id for a in item.answers} if item else set()
            orphans.extend((res.item_id, a) for a in res.final_scores if a not in known)
    if orphans:
        raise IdMismatch(sorted(set(orphans)))


def default_groupings(items: Sequence[EvaluationItem]) -> list[Grouping]:
    if any(it.task_kind is TaskKind.TRANSLATION for it in items):
        return [Grouping.WHOLE_DATASET, Grouping.BY_ELIMINATION_ROUND]
    groups = [Grouping.QUESTION_LEVEL]
    if all(it.exam_id is not None for it in items):
        groups.append(Grouping.EXAM_LEVEL)
    groups += [Grouping.WHOLE_DATASET]
    if all(it.difficulty is not None for it in items):
        groups.append(Grouping.BY_DIFFICULTY)
    groups += [Grouping.BY_LANGUAGE, Grouping.BY_ELIMINATION_ROUND]
    return groups


def _row_labels(runs: Sequence[RunResults]) -> list[str]:
    methods = [r.method.value for r in runs]
    models = [r.model_id for r in runs]
    labels = []
    for run, m in zip(runs, methods):
        if methods.count(m) > 1 or len(set(models)) > 1:
            labels.append(f"{m} [{run.model_id}]")
        else:
            labels.append(m)
    if len(set(labels)) != len(labels):
        labels = [f"{lab} #{i + 1}" for i, lab in enumerate(labels)]
    return labels


_CORRELATION_COLUMNS = (Grouping.QUESTION_LEVEL, Grouping.EXAM_LEVEL, Grouping.WHOLE_DATASET)


def build_report(
    runs: Sequence[RunResults],
    items: Sequence[EvaluationItem],
    groupings: Sequence[Grouping] | None = None,
    *,
    dataset_info: dict | None = None,
) -> dict:
    by_id = {it.id: it for it in items}
    check_alignment(runs, by_id)
    groupings = [Grouping(g) for g in (groupings or default_groupings(items))]
    human = human_scores(items)
    labels = _row_labels(runs)
    is_exam = all(it.task_kind is TaskKind.EXAM_GRADING for it in items)

    report: dict = {
        "dataset": dataset_info or {},
        "notes": AGGREGATION_NOTES,
        "runs": [
            {
                "label": label,
                "method": run.method.value,
                "model_id": run.model_id,
                "seed": run.manifest.get("seed"),
                "template_hashes": run.manifest.get("template_hashes", {}),
            }
            for label, run in zip(labels, runs)
        ],
        "groupings": [g.value for g in groupings],
    }

    cols = [g for g in _CORRELATION_COLUMNS if g in groupings]
    corr_rows = []
    for label, run in zip(labels, runs):
        cells = {}
        for g in cols:
            rep = grouped_report(run.results, by_id, g, human=human, method=run.method.value)[0]
            cells[g.value] = {"pearson_r": _round(rep.pearson_r), "n": rep.n,
                              "n_groups": rep.n_groups, "n_excluded": rep.n_excluded}
        overall, excluded = overall_mean(c["pearson_r"] for c in cells.values())
        corr_rows.append({"label": label, "cells": cells, "overall": _round(overall), "overall_excluded": excluded})
    report["correlation"] = {"columns": [g.value for g in cols], "rows": corr_rows}

    for g, key in ((Grouping.BY_DIFFICULTY, "by_difficulty"), (Grouping.BY_LANGUAGE, "by_language")):
        if g not in groupings or not is_exam:
            continue
        rows = []
        for label, run in zip(labels, runs):
            reps = grouped_report(run.results, by_id, g, human=human, method=run.method.value)
            rows.append({"label": label, "cells": {r.group: {"pearson_r": _round(r.pearson_r), "n": r.n} for r in reps}})
        report[key] = {"columns": sorted({c for r in rows for c in r["cells"]}), "rows": rows}

    if Grouping.BY_ELIMINATION_ROUND in groupings:
        rows = []
        for label, run in zip(labels, runs):
            if not run.method.is_knockout:
                continue
            split = elimination_split(run.results, human, strict=False)
            rows.append({
                "label": label,
                "first_round": _round(split.first_round_r),
                "later_rounds": _round(split.later_rounds_r),
                "difference": _round(split.difference),
                "n_first": split.n_first,
                "n_later": split.n_later,
            })
        report["elimination_split"] = {"rows": rows}

    pra_levels = [Grouping.QUESTION_LEVEL] + ([Grouping.EXAM_LEVEL] if Grouping.EXAM_LEVEL in groupings else [])
    pra_rows = []
    for label, run in zip(labels, runs):
        cells = {}
        for level in pra_levels:
            acc, pairs = pooled_ranking_accuracy(run.results, human, items=by_id, level=level)
            cells[level.value] = {"accuracy": _round(acc), "pairs": pairs}
        overall, excluded = overall_mean(c["accuracy"] for c in cells.values())
        pra_rows.append({"label": label, "cells": cells, "overall": _round(overall)})
    report["ranking_accuracy"] = {"columns": [g.value for g in pra_levels], "rows": pra_rows}
    return report


# rendering ----------------------------------------------------------------

def _md_num(value: float | None, *, signed: bool = False) -> str:
    if value is None:
        return "n/a"
    return f"{value:+.{DECIMALS}f}" if signed else f"{value:.{DECIMALS}f}"


def _md_table(header: list[str], rows: list[list[str]]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return "\n".join(lines)


_COLUMN_TITLES = {"question": "Question-Level", "exam": "Exam-Level", "whole": "Whole Dataset"}


def report_markdown(report: dict) -> str:
    parts = ["# Assessment report", ""]
    ds = report.get("dataset") or {}
    if ds:
        parts.append(f"Dataset: `{ds.get('name', '')}` ({ds.get('format', '')}), sha256 `{ds.get('sha256', '')}`")
        parts.append("")
    parts.append(_md_table(
        ["Run", "Method", "Model", "Seed"],
        [[r["label"], r["method"], r["model_id"], str(r["seed"])] for r in report["runs"]],
    ))

    corr = report["correlation"]
    if corr["columns"]:
        parts += ["", "## Pearson correlation with human scores", ""]
        header = ["Method"] + [_COLUMN_TITLES[c] for c in corr["columns"]] + ["Overall"]
        rows = [[r["label"]] + [_md_num(r["cells"][c]["pearson_r"]) for c in corr["columns"]] + [_md_num(r["overall"])]
                for r in corr["rows"]]
        parts.append(_md_table(header, rows))

    for key, title in (("by_difficulty", "By difficulty"), ("by_language", "By language")):
        if key in report:
            tab = report[key]
            parts += ["", f"## {title}", ""]
            rows = [[r["label"]] + [_md_num(r["cells"].get(c, {}).get("pearson_r")) for c in tab["columns"]]
                    for r in tab["rows"]]
            parts.append(_md_table(["Method"] + tab["columns"], rows))

    if "elimination_split" in report and report["elimination_split"]["rows"]:
        parts += ["", "## Answers graded once versus multiple times", ""]
        rows = [[r["label"], _md_num(r["first_round"]), _md_num(r["later_rounds"]), _md_num(r["difference"], signed=True)]
                for r in report["elimination_split"]["rows"]]
        parts.append(_md_table(["Method", "First Round", "Later Rounds", "Difference"], rows))

    pra = report["ranking_accuracy"]
    parts += ["", "## Pairwise ranking accuracy", ""]
    rows = [[r["label"]] + [_md_num(r["cells"][c]["accuracy"]) for c in pra["columns"]] + [_md_num(r["overall"])]
            for r in pra["rows"]]
    parts.append(_md_table(["Method"] + [_COLUMN_TITLES[c] for c in pra["columns"]] + ["Overall"], rows))

    parts += ["", "## Aggregation", ""]
    parts += [f"- {k}: {v}" for k, v in report["notes"].items()]
    return "\n".join(parts) + "\n"


def report_csv(report: dict) -> str:
    """Long format: one row per (table, row label, column, metric)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["table", "label", "column", "metric", "value"])
    for r in report["correlation"]["rows"]:
        for c, cell in r["cells"].items():
            w.writerow(["correlation", r["label"], c, "pearson_r", _fmt_num(cell["pearson_r"])])
        w.writerow(["correlation", r["label"], "overall", "pearson_r", _fmt_num(r["overall"])])
    for key in ("by_difficulty", "by_language"):
        for r in report.get(key, {}).get("rows", []):
            for c, cell in r["cells"].items():
                w.writerow([key, r["label"], c, "pearson_r", _fmt_num(cell["pearson_r"])])
    for r in report.get("elimination_split", {}).get("rows", []):
        for c in ("first_round", "later_rounds", "difference"):
            w.writerow(["elimination_split", r["label"], c, "pearson_r", _fmt_num(r[c])])
    for r in report["ranking_accuracy"]["rows"]:
        for c, cell in r["cells"].items():
            w.writerow(["ranking_accuracy", r["label"], c, "accuracy", _fmt_num(cell["accuracy"])])
        w.writerow(["ranking_accuracy", r["label"], "overall", "accuracy", _fmt_num(r["overall"])])
    return buf.getvalue()


def write_report(report: dict, out_dir: Path, formats: Iterable[str] = REPORT_FORMATS, stem: str = "report") -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        if fmt == "json":
            path, text = out_dir / f"{stem}.json", dumps(report)
        elif fmt == "csv":
            path, text = out_dir / f"{stem}.csv", report_csv(report)
        elif fmt in ("markdown", "md"):
            path, text = out_dir / f"{stem}.md", report_markdown(report)
        else:
            raise ValueError(f"unknown report format {fmt!r}")
        atomic_write(path, text)
        written.append(path)
    return written


__all__ = [
    "RunResults",
    "build_report",
    "load_run",
    "report_csv",
    "report_markdown",
    "scores_csv",
    "write_report",
    "write_run_outputs",
]
