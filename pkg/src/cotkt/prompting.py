"""Prompt rendering from text templates.

Two template families exist per task kind: ``cot_extraction`` asks a teacher
model for a step-by-step explanation plus an answer/confidence line, and
``confidence_inference`` asks a student model for the answer/confidence line
alone. Templates are plain UTF-8 files with ``{question}`` and ``{options}``
placeholders, shipped under ``cotkt/templates/`` and overridable through a
directory passed by the caller. Rendering is pure string substitution, so a
given (item, template) pair always produces identical bytes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Sequence

from .datasets import Option, TaskItem
from .errors import FileMissing

ANCHOR = "Answer and Confidence (0-100):"

COT_EXTRACTION = "cot_extraction"
CONFIDENCE_INFERENCE = "confidence_inference"
TEMPLATE_IDS = (COT_EXTRACTION, CONFIDENCE_INFERENCE)


@dataclass(frozen=True)
class RenderedPrompt:
    """A fully rendered prompt tied back to its item and template."""

    text: str
    template_id: str
    item_id: str


def render_options(options: Sequence[Option]) -> str:
    """Single-line option list: ``A. Positive B. Negative``."""
    return " ".join(f"{o.label}. {o.text}" for o in options)


@lru_cache(maxsize=None)
def _template_text(template_id: str, task_kind: str, templates_dir: str | None) -> str:
    name = f"{template_id}_{task_kind}.txt"
    if templates_dir is not None:
        path = Path(templates_dir) / name
        if not path.exists():
            raise FileMissing(str(path))
        raw = path.read_text(encoding="utf-8")
    else:
        ref = resources.files(__package__).joinpath("templates", name)
        try:
            raw = ref.read_text(encoding="utf-8")
        except FileNotFoundError as exc:
            raise FileMissing(name) from exc
    return raw.rstrip("\n")


def _render(template_id: str, item: TaskItem, templates_dir: str | None) -> RenderedPrompt:
    template = _template_text(template_id, item.task_kind, templates_dir)
    # Plain replacement keeps braces and brackets in the question intact.
    text = template.replace("{question}", item.question).replace(
        "{options}", render_options(item.options)
    )
    return RenderedPrompt(text=text, template_id=template_id, item_id=item.id)


def render_cot_prompt(item: TaskItem, *, templates_dir: str | Path | None = None) -> RenderedPrompt:
    """Render the teacher prompt asking for an explanation and an answer."""
    return _render(COT_EXTRACTION, item, str(templates_dir) if templates_dir else None)


def render_inference_prompt(item: TaskItem, *, templates_dir: str | Path | None = None) -> RenderedPrompt:
    """Render the student prompt asking only for answer and confidence."""
    return _render(CONFIDENCE_INFERENCE, item, str(templates_dir) if templates_dir else None)
