"""Dataset ingestion: normalize heterogeneous QA/sentiment files into one shape.

Every source file (CSV, TSV, or JSONL) becomes a list of :class:`TaskItem`
values: a question, lettered options starting at ``A``, and a gold label that
is one of those letters. A :class:`DatasetSpec` describes how to get there
(which columns hold what, how raw labels map to letters). Canonical item files
written by :func:`write_items_jsonl` reload bit-compatibly via
:func:`read_items_jsonl`, so a run directory is self-contained.
"""

from __future__ import annotations

import csv
import json
import logging
import random
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from .errors import FileMissing, MalformedRow, NTooLarge, UnknownLabel
from .fileio import read_jsonl, write_jsonl_atomic

logger = logging.getLogger(__name__)

TASK_KINDS = ("multiple_choice", "sentiment")
FORMATS = ("jsonl", "csv", "tsv")

_CANONICAL_FIELDS = ("id", "question", "gold_label", "options")


@dataclass(frozen=True)
class Option:
    """One answer option: a single capital letter and its text."""

    label: str
    text: str


@dataclass(frozen=True)
class TaskItem:
    """A normalized task item; validated on construction."""

    id: str
    task_kind: str
    question: str
    options: tuple[Option, ...]
    gold_label: str
    source: str

    def __post_init__(self) -> None:
        if self.task_kind not in TASK_KINDS:
            raise ValueError(f"unknown task_kind {self.task_kind!r}")
        if not self.question.strip():
            raise ValueError("question is empty")
        if not self.options:
            raise ValueError("no options")
        labels = [o.label for o in self.options]
        expected = list(string.ascii_uppercase[: len(labels)])
        if labels != expected:
            raise ValueError(
                f"option labels must be consecutive letters from A, got {labels}"
            )
        if self.gold_label not in labels:
            raise ValueError(f"gold label {self.gold_label!r} not among options")

    @property
    def option_labels(self) -> tuple[str, ...]:
        return tuple(o.label for o in self.options)

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "task_kind": self.task_kind,
            "question": self.question,
            "options": [{"label": o.label, "text": o.text} for o in self.options],
            "gold_label": self.gold_label,
            "source": self.source,
        }

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "TaskItem":
        options = tuple(Option(o["label"], o["text"]) for o in obj["options"])
        return cls(
            id=str(obj["id"]),
            task_kind=obj["task_kind"],
            question=obj["question"],
            options=options,
            gold_label=obj["gold_label"],
            source=obj.get("source", ""),
        )


@dataclass(frozen=True)
class DatasetSpec:
    """How to read one source file into TaskItems.

    column_map maps source column names to canonical fields ("question",
    "gold_label", optional "id" and "options"). label_map rewrites raw gold
    values into option letters. Sentiment datasets declare their fixed options
    here; multiple-choice datasets carry options per row instead.
    """

    name: str
    path: Path
    format: str
    task_kind: str
    column_map: dict[str, str]
    label_map: dict[str, str] | None = None
    options: tuple[Option, ...] | None = field(default=None)

    def __post_init__(self) -> None:
        if self.format not in FORMATS:
            raise ValueError(f"unknown format {self.format!r}")
        if self.task_kind not in TASK_KINDS:
            raise ValueError(f"unknown task_kind {self.task_kind!r}")
        targets = set(self.column_map.values())
        unknown = targets - set(_CANONICAL_FIELDS)
        if unknown:
            raise ValueError(f"column_map targets unknown fields {sorted(unknown)}")
        if "question" not in targets or "gold_label" not in targets:
            raise ValueError("column_map must cover question and gold_label")
        if self.task_kind == "sentiment":
            if not self.options:
                raise ValueError("sentiment datasets must declare their options")
            if self.label_map is not None:
                declared = {o.label for o in self.options}
                mapped = set(self.label_map.values())
                if mapped != declared:
                    raise ValueError(
                        f"label_map yields {sorted(mapped)}, declared options are "
                        f"{sorted(declared)}"
                    )

    def source_column(self, canonical: str) -> str | None:
        for src, dst in self.column_map.items():
            if dst == canonical:
                return src
        return None


def _iter_rows(spec: DatasetSpec) -> Iterable[tuple[int, dict[str, Any]]]:
    """Yield (1-based physical line number, row dict) pairs."""
    if spec.format == "jsonl":
        yield from read_jsonl(spec.path)
        return
    delimiter = "," if spec.format == "csv" else "\t"
    with open(spec.path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        for row in reader:
            # DictReader counts the header, so line_num is already physical.
            yield reader.line_num, dict(row)


def _row_value(row: dict[str, Any], column: str, lineno: int) -> Any:
    if column not in row or row[column] is None:
        raise MalformedRow(lineno, f"missing column {column!r}")
    return row[column]


def _options_from_value(value: Any, lineno: int) -> tuple[Option, ...]:
    """Build options from a row value: list of texts or of {label, text} dicts."""
    if isinstance(value, str):
        try:
            value = json.loads(value)
        except json.JSONDecodeError as exc:
            raise MalformedRow(lineno, "options column is not a JSON array") from exc
    if not isinstance(value, list) or not value:
        raise MalformedRow(lineno, "options must be a non-empty array")
    opts: list[Option] = []
    for i, entry in enumerate(value):
        label = string.ascii_uppercase[i] if i < 26 else "?"
        if isinstance(entry, str):
            opts.append(Option(label, entry))
        elif isinstance(entry, dict) and "text" in entry:
            opts.append(Option(str(entry.get("label", label)), str(entry["text"])))
        else:
            raise MalformedRow(lineno, f"option {i} is neither text nor an object")
    return tuple(opts)


def _build_item(spec: DatasetSpec, lineno: int, row: dict[str, Any], index: int) -> TaskItem:
    question = str(_row_value(row, spec.source_column("question"), lineno))
    raw_gold = str(_row_value(row, spec.source_column("gold_label"), lineno))

    if spec.task_kind == "sentiment":
        options = spec.options
    else:
        opt_col = spec.source_column("options")
        if opt_col is not None:
            options = _options_from_value(_row_value(row, opt_col, lineno), lineno)
        elif spec.options:
            options = spec.options
        else:
            raise MalformedRow(lineno, "no options column mapped and none declared")

    gold = spec.label_map.get(raw_gold, raw_gold) if spec.label_map else raw_gold
    if gold not in {o.label for o in options}:
        raise UnknownLabel(lineno, raw_gold)

    id_col = spec.source_column("id")
    item_id = str(row[id_col]) if id_col and row.get(id_col) is not None else f"{spec.name}-{index:05d}"

    try:
        return TaskItem(
            id=item_id,
            task_kind=spec.task_kind,
            question=question,
            options=options,
            gold_label=gold,
            source=spec.name,
        )
    except ValueError as exc:
        raise MalformedRow(lineno, str(exc)) from exc


def load_dataset(spec: DatasetSpec, *, skip_bad_rows: bool = False) -> list[TaskItem]:
    """Load and normalize one dataset.

    By default the first bad row aborts the load with :class:`MalformedRow`
    (or its :class:`UnknownLabel` subclass). With ``skip_bad_rows=True`` every
    bad row is logged and skipped instead, so a partial corpus still loads.
    An empty file yields an empty list.
    """
    path = Path(spec.path)
    if not path.exists():
        raise FileMissing(str(path))
    items: list[TaskItem] = []
    skipped = 0
    for lineno, row in _iter_rows(spec):
        try:
            items.append(_build_item(spec, lineno, row, len(items)))
        except MalformedRow as exc:
            if not skip_bad_rows:
                raise
            skipped += 1
            logger.warning("%s: skipping %s", spec.name, exc)
    if skipped:
        logger.warning("%s: skipped %d bad row(s)", spec.name, skipped)
    return items


def sample_items(items: Sequence[TaskItem], n: int, seed: int) -> list[TaskItem]:
    """Deterministic shuffle-then-take sample of ``n`` distinct items.

    The same (items, n, seed) triple yields the same result on every platform.
    """
    if n < 0 or n > len(items):
        raise NTooLarge(f"cannot sample {n} of {len(items)} items")
    order = list(range(len(items)))
    random.Random(seed).shuffle(order)
    return [items[i] for i in order[:n]]


def write_items_jsonl(items: Iterable[TaskItem], path: Path) -> None:
    """Write items in the canonical JSONL shape (atomic, LF-terminated)."""
    write_jsonl_atomic(path, (item.to_dict() for item in items))


def read_items_jsonl(path: Path) -> list[TaskItem]:
    """Reload a canonical item file, re-validating every row."""
    items: list[TaskItem] = []
    for lineno, obj in read_jsonl(path):
        try:
            items.append(TaskItem.from_dict(obj))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedRow(lineno, str(exc)) from exc
    return items
