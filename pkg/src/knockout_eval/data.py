"""Dataset loaders for exam-grading JSON and machine-translation TSV files.

Exam JSON (``schema_version`` 1)::

    {"schema_version": 1, "exam_id": "...", "language": "en",
     "questions": [{"id": "...", "text": "...", "max_points": 6,
                    "difficulty": "Easy",
                    "answers": [{"examinee_id": "...", "text": "...",
                                 "human_score": 4.5, "latent_quality": 4.0}]}]}

``difficulty``, ``human_score`` and ``latent_quality`` are optional; the last
one is only consumed by the simulated judge.

MT TSV: a header row with ``source_id, language_pair, source, translation,
system_id, human_score`` and optionally ``latent_quality``. Rows sharing a
``source_id`` form one item scored out of 100.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Iterable

from .errors import DuplicateAnswerId, EmptyAfterFiltering, SchemaError, ValidationError
from .models import CandidateAnswer, Difficulty, EvaluationItem, TaskKind, normalize_language

logger = logging.getLogger(__name__)

EXAM_SCHEMA_VERSION = 1
DEFAULT_MT_LANGUAGES = frozenset({"en", "de", "fr", "it", "pt", "hi", "es", "th"})
MT_COLUMNS = ("source_id", "language_pair", "source", "translation", "system_id", "human_score")
MT_OPTIONAL_COLUMNS = ("latent_quality",)


@dataclass
class DatasetFile:
    format: str  # "exam-json" | "mt-tsv"
    path: Path
    items: list[EvaluationItem]
    rows_read: int = 0
    rows_dropped: int = 0
    duplicates_removed: int = 0
    score_conflicts: int = 0


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# exam json ----------------------------------------------------------------

def _require(obj: dict, key: str, where: str) -> Any:
    if not isinstance(obj, dict):
        raise SchemaError("expected an object", field=where)
    if key not in obj:
        raise SchemaError("missing required field", field=f"{where}.{key}" if where else key)
    return obj[key]


def _number(value: Any, field: str, *, optional: bool = False) -> float | None:
    if value is None and optional:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise SchemaError(f"expected a number, got {value!r}", field=field)
    return float(value)


def _string(value: Any, field: str) -> str:
    if not isinstance(value, str):
        raise SchemaError(f"expected a string, got {type(value).__name__}", field=field)
    return value


def read_exam_dataset(path: str | Path) -> DatasetFile:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc
    version = _require(doc, "schema_version", "")
    if version != EXAM_SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {version!r}", field="schema_version")
    exam_id = _string(_require(doc, "exam_id", ""), "exam_id")
    language = normalize_language(_string(_require(doc, "language", ""), "language"))
    questions = _require(doc, "questions", "")
    if not isinstance(questions, list):
        raise SchemaError("expected a list", field="questions")

    items = []
    seen_q: set[str] = set()
    n_rows = 0
    for qi, q in enumerate(questions):
        where = f"questions[{qi}]"
        qid = _string(_require(q, "id", where), f"{where}.id")
        if qid in seen_q:
            raise SchemaError(f"duplicate question id {qid!r}", field=f"{where}.id")
        seen_q.add(qid)
        text = _string(_require(q, "text", where), f"{where}.text")
        max_points = _number(_require(q, "max_points", where), f"{where}.max_points")
        if max_points <= 0:
            raise SchemaError("max_points must be > 0", field=f"{where}.max_points")
        difficulty = q.get("difficulty")
        if difficulty is not None:
            try:
                difficulty = Difficulty(difficulty)
            except ValueError:
                raise SchemaError(
                    f"difficulty must be one of Easy/Medium/Hard, got {difficulty!r}",
                    field=f"{where}.difficulty",
                ) from None
        raw_answers = _require(q, "answers", where)
        if not isinstance(raw_answers, list):
            raise SchemaError("expected a list", field=f"{where}.answers")
        answers = []
        seen_a: set[str] = set()
        for ai, a in enumerate(raw_answers):
            aw = f"{where}.answers[{ai}]"
            aid = _string(_require(a, "examinee_id", aw), f"{aw}.examinee_id")
            if aid in seen_a:
                raise DuplicateAnswerId(f"duplicate examinee id {aid!r} in question {qid!r}", field=f"{aw}.examinee_id")
            seen_a.add(aid)
            human = _number(a.get("human_score"), f"{aw}.human_score", optional=True)
            if human is not None and not 0 <= human <= max_points:
                raise SchemaError(f"human_score {human} outside [0, {max_points}]", field=f"{aw}.human_score")
            latent = _number(a.get("latent_quality"), f"{aw}.latent_quality", optional=True)
            answers.append(CandidateAnswer(aid, _string(_require(a, "text", aw), f"{aw}.text"), human, latent))
            n_rows += 1
        items.append(
            EvaluationItem(
                id=qid, prompt_text=text, max_points=max_points, answers=tuple(answers),
                task_kind=TaskKind.EXAM_GRADING, language=language, difficulty=difficulty,
                exam_id=exam_id,
            )
        )
    return DatasetFile("exam-json", path, items, rows_read=n_rows)


def load_exam_dataset(path: str | Path) -> list[EvaluationItem]:
    return read_exam_dataset(path).items


def dump_exam_dataset(items: Iterable[EvaluationItem], path: str | Path) -> None:
    items = list(items)
    exam_ids = {it.exam_id for it in items}
    languages = {it.language for it in items}
    if len(exam_ids) > 1 or len(languages) > 1:
        raise ValueError("an exam file holds items of a single exam and language")
    doc = {
        "schema_version": EXAM_SCHEMA_VERSION,
        "exam_id": next(iter(exam_ids), None) or "",
        "language": next(iter(languages), "en"),
        "questions": [
            {
                "id": it.id,
                "text": it.prompt_text,
                "max_points": it.max_points,
                "difficulty": it.difficulty.value if it.difficulty else None,
                "answers": [
                    {k: v for k, v in (
                        ("examinee_id", a.id), ("text", a.text),
                        ("human_score", a.human_score), ("latent_quality", a.latent_quality),
                    ) if v is not None or k in ("examinee_id", "text")}
                    for a in it.answers
                ],
            }
            for it in items
        ],
    }
    Path(path).write_text(json.dumps(doc, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


# mt tsv -------------------------------------------------------------------

def _pair_languages(pair: str) -> tuple[str, str]:
    parts = pair.replace("_", "-").split("-")
    if len(parts) != 2 or not all(parts):
        raise ValueError(pair)
    return normalize_language(parts[0]), normalize_language(parts[1])


def _dedup(item_id: str, rows: list[tuple[int | None, CandidateAnswer]]):
    """First occurrence of each translation text wins; returns (kept, removed, conflicts)."""
    kept: dict[str, tuple[int | None, CandidateAnswer]] = {}
    removed = conflicts = 0
    for line, ans in rows:
        first = kept.get(ans.text)
        if first is None:
            kept[ans.text] = (line, ans)
            continue
        removed += 1
        if first[1].human_score != ans.human_score:
            conflicts += 1
            logger.info(
                "item %s: identical translations from %s and %s scored %s vs %s; keeping %s",
                item_id, first[1].id, ans.id, first[1].human_score, ans.human_score, first[1].human_score,
            )
    if removed:
        logger.info("item %s: removed %d duplicate translation(s), %d with conflicting scores",
                    item_id, removed, conflicts)
    return list(kept.values()), removed, conflicts


def dedup_identical_translations(item: EvaluationItem) -> EvaluationItem:
    """Keep one answer per distinct translation text (the first occurrence)."""
    if item.task_kind is not TaskKind.TRANSLATION:
        raise ValueError(f"item {item.id!r} is not a translation item")
    kept, removed, _ = _dedup(item.id, [(None, a) for a in item.answers])
    if not removed:
        return item
    return replace(item, answers=tuple(a for _, a in kept))


def read_mt_dataset(path: str | Path, allowed_languages: Iterable[str] | None = DEFAULT_MT_LANGUAGES) -> DatasetFile:
    path = Path(path)
    allowed = None if allowed_languages is None else {normalize_language(x) for x in allowed_languages}
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty file", line=1) from None
        missing = [c for c in MT_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"missing columns {missing}", line=1, field=missing[0])
        col = {name: header.index(name) for name in MT_COLUMNS + MT_OPTIONAL_COLUMNS if name in header}

        groups: dict[str, dict] = {}
        rows_read = dropped = 0
        for lineno, row in enumerate(reader, start=2):
            if not row or row == [""]:
                continue
            if len(row) != len(header):
                raise SchemaError(f"expected {len(header)} columns, got {len(row)}", line=lineno)
            rows_read += 1
            rec = {name: row[i] for name, i in col.items()}
            try:
                src_lang, tgt_lang = _pair_languages(rec["language_pair"])
            except ValueError:
                raise SchemaError(f"bad language pair {rec['language_pair']!r}", line=lineno, field="language_pair") from None
            if allowed is not None and not {src_lang, tgt_lang} <= allowed:
                dropped += 1
                continue
            human = _tsv_number(rec["human_score"], lineno, "human_score")
            if human is not None and not 0 <= human <= 100:
                raise SchemaError(f"human_score {human} outside [0, 100]", line=lineno, field="human_score")
            latent = _tsv_number(rec.get("latent_quality", ""), lineno, "latent_quality")
            g = groups.setdefault(rec["source_id"], {
                "source": rec["source"], "pair": rec["language_pair"], "lang": tgt_lang, "answers": [], "line": lineno,
            })
            if g["source"] != rec["source"] or g["pair"] != rec["language_pair"]:
                raise SchemaError(
                    f"source_id {rec['source_id']!r} reused with a different source or language pair",
                    line=lineno, field="source_id",
                )
            g["answers"].append((lineno, CandidateAnswer(rec["system_id"], rec["translation"], human, latent)))

    items = []
    dup_removed = conflicts = 0
    for source_id, g in groups.items():
        kept, removed, clashes = _dedup(source_id, g["answers"])
        dup_removed += removed
        conflicts += clashes
        seen: set[str] = set()
        for line, ans in kept:
            if ans.id in seen:
                raise DuplicateAnswerId(
                    f"system {ans.id!r} appears twice for source {source_id!r}", line=line, field="system_id"
                )
            seen.add(ans.id)
        try:
            items.append(EvaluationItem(
                id=source_id, prompt_text=g["source"], max_points=100,
                answers=tuple(a for _, a in kept), task_kind=TaskKind.TRANSLATION, language=g["lang"],
            ))
        except ValidationError as exc:
            raise SchemaError(str(exc), line=g["line"]) from exc
    if not items:
        raise EmptyAfterFiltering(f"{path}: no rows left after language filtering ({dropped} dropped)")
    if dropped:
        logger.info("%s: dropped %d row(s) outside the allowed languages", path, dropped)
    return DatasetFile("mt-tsv", path, items, rows_read, dropped, dup_removed, conflicts)


def _tsv_number(text: str | None, lineno: int, field: str) -> float | None:
    if text is None or text.strip() == "":
        return None
    try:
        value = float(text)
    except ValueError:
        raise SchemaError(f"expected a number, got {text!r}", line=lineno, field=field) from None
    if not math.isfinite(value):
        raise SchemaError(f"expected a finite number, got {text!r}", line=lineno, field=field)
    return value


def load_mt_dataset(path: str | Path, allowed_languages: Iterable[str] | None = DEFAULT_MT_LANGUAGES) -> list[EvaluationItem]:
    return read_mt_dataset(path, allowed_languages).items


def dump_mt_dataset(items: Iterable[EvaluationItem], path: str | Path, language_pairs: dict[str, str] | None = None) -> None:
    """Write items as TSV. ``language_pairs`` maps item id to its pair; default ``en-<item language>``."""
    items = list(items)
    pairs = language_pairs or {}
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        has_latent = any(a.latent_quality is not None for it in items for a in it.answers)
        header = list(MT_COLUMNS) + (["latent_quality"] if has_latent else [])
        fh.write("\t".join(header) + "\n")
        for it in items:
            for a in it.answers:
                fields = [
                    it.id, pairs.get(it.id, f"en-{it.language}"), it.prompt_text, a.text, a.id,
                    "" if a.human_score is None else repr(a.human_score),
                ]
                if has_latent:
                    fields.append("" if a.latent_quality is None else repr(a.latent_quality))
                if any(("\t" in f or "\n" in f or "\r" in f) for f in fields):
                    raise ValueError(f"item {it.id}: TSV fields cannot contain tabs or newlines")
                fh.write("\t".join(fields) + "\n")


def read_dataset(path: str | Path, fmt: str, allowed_languages: Iterable[str] | None = DEFAULT_MT_LANGUAGES) -> DatasetFile:
    if fmt == "exam-json":
        return read_exam_dataset(path)
    if fmt == "mt-tsv":
        return read_mt_dataset(path, allowed_languages)
    raise ValueError(f"unknown dataset format {fmt!r}")
