"""Prompt templates for individual and pairwise grading.

Templates live as UTF-8 text files named ``<TemplateKind>.txt``; the bundled
set sits in ``templates/`` and a directory passed as ``prompt_dir`` overrides
any kind it contains. Placeholders use ``{name}`` syntax and are substituted
in a single pass, so braces inside answer text are left untouched.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Mapping

from .errors import TemplateMismatch, ValidationError
from .models import CandidateAnswer, EvaluationItem, TaskKind


class TemplateKind(str, Enum):
    INDIVIDUAL_EXAM_EN = "IndividualExamEN"
    PAIRWISE_EXAM_EN = "PairwiseExamEN"
    INDIVIDUAL_EXAM_DE = "IndividualExamDE"
    PAIRWISE_EXAM_DE = "PairwiseExamDE"
    INDIVIDUAL_MT = "IndividualMT"
    PAIRWISE_MT = "PairwiseMT"

    @property
    def pairwise(self) -> bool:
        return self.value.startswith("Pairwise")

    @property
    def german(self) -> bool:
        return self.value.endswith("DE")

    @property
    def translation(self) -> bool:
        return self.value.endswith("MT")


_PROMPT_SLOTS = ("question", "source")
_FIRST_SLOTS = ("answer1", "tgt", "tgt1")
_SECOND_SLOTS = ("answer2", "tgt2")
_ALL_SLOTS = _PROMPT_SLOTS + _FIRST_SLOTS + _SECOND_SLOTS + ("maxpoints",)
_PLACEHOLDER = re.compile(r"\{(" + "|".join(_ALL_SLOTS) + r")\}")


@dataclass(frozen=True)
class PromptTemplate:
    kind: TemplateKind
    body: str

    def __post_init__(self) -> None:
        found = set(_PLACEHOLDER.findall(self.body))
        has_second = bool(found & set(_SECOND_SLOTS))
        if not found & set(_FIRST_SLOTS):
            raise ValidationError(f"template {self.kind.value} has no answer placeholder")
        if has_second != self.kind.pairwise:
            raise ValidationError(
                f"template {self.kind.value}: second-answer placeholder "
                f"{'missing' if self.kind.pairwise else 'not allowed'}"
            )

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.body.encode("utf-8")).hexdigest()


def format_points(value: float, *, decimal_comma: bool = False) -> str:
    """Render a score the way judges usually write it: ``7`` or ``7.5``."""
    if float(value).is_integer():
        text = str(int(value))
    else:
        text = repr(float(value))
    return text.replace(".", ",") if decimal_comma else text


def load_templates(prompt_dir: str | Path | None = None) -> dict[TemplateKind, PromptTemplate]:
    bundled = resources.files("knockout_eval") / "templates"
    out: dict[TemplateKind, PromptTemplate] = {}
    for kind in TemplateKind:
        body = None
        if prompt_dir is not None:
            override = Path(prompt_dir) / f"{kind.value}.txt"
            if override.is_file():
                body = override.read_text(encoding="utf-8")
        if body is None:
            body = (bundled / f"{kind.value}.txt").read_text(encoding="utf-8")
        out[kind] = PromptTemplate(kind, body)
    return out


_DEFAULT_TEMPLATES: dict[TemplateKind, PromptTemplate] | None = None


def default_templates() -> dict[TemplateKind, PromptTemplate]:
    global _DEFAULT_TEMPLATES
    if _DEFAULT_TEMPLATES is None:
        _DEFAULT_TEMPLATES = load_templates()
    return _DEFAULT_TEMPLATES


def template_hashes(templates: Mapping[TemplateKind, PromptTemplate]) -> dict[str, str]:
    return {k.value: t.sha256 for k, t in sorted(templates.items(), key=lambda kv: kv[0].value)}


def template_kind_for(item: EvaluationItem, pairwise: bool) -> TemplateKind:
    """MT items always use the English MT prompts; exam items follow item.language."""
    if item.task_kind is TaskKind.TRANSLATION:
        return TemplateKind.PAIRWISE_MT if pairwise else TemplateKind.INDIVIDUAL_MT
    if item.is_german:
        return TemplateKind.PAIRWISE_EXAM_DE if pairwise else TemplateKind.INDIVIDUAL_EXAM_DE
    return TemplateKind.PAIRWISE_EXAM_EN if pairwise else TemplateKind.INDIVIDUAL_EXAM_EN


def render_prompt(
    kind: TemplateKind,
    item: EvaluationItem,
    first: CandidateAnswer,
    second: CandidateAnswer | None = None,
    templates: Mapping[TemplateKind, PromptTemplate] | None = None,
) -> str:
    kind = TemplateKind(kind)
    if kind.pairwise and second is None:
        raise TemplateMismatch(f"{kind.value} needs two answers")
    if not kind.pairwise and second is not None:
        raise TemplateMismatch(f"{kind.value} takes a single answer")
    if (item.task_kind is TaskKind.TRANSLATION) != kind.translation:
        raise TemplateMismatch(f"{kind.value} does not fit a {item.task_kind.value} item")
    if not kind.translation and kind.german != item.is_german:
        raise TemplateMismatch(f"{kind.value} does not match item language {item.language!r}")

    body = (templates or default_templates())[kind].body
    values = {slot: item.prompt_text for slot in _PROMPT_SLOTS}
    values.update({slot: first.text for slot in _FIRST_SLOTS})
    if second is not None:
        values.update({slot: second.text for slot in _SECOND_SLOTS})
    values["maxpoints"] = format_points(item.max_points)
    return _PLACEHOLDER.sub(lambda m: values[m.group(1)], body)
