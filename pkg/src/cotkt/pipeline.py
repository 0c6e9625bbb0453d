"""The rationale-distillation pipeline: harvest, filter, format, emit.

A teacher model is prompted once per item (or ``samples_per_item`` times) for
a step-by-step explanation plus an answer line. Replies whose answer matches
the gold label survive :func:`filter_correct`; each survivor is rendered into
a single training string of the form::

    <s> [INST] Question: {question} Options: {options} [/INST] Explanation: {explanation} </s>

with exactly one ``[INST]`` and one ``[/INST]`` token, guaranteed by escaping
any delimiter-shaped substrings inside the inserted fields. Training files
are JSONL of ``{item_id, text}``, emitted atomically with a SHA-256 content
hash and a sidecar manifest of fine-tuning hyperparameters.
"""

from __future__ import annotations

import logging
import random
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .backend import Backend, GenerationParams
from .datasets import TaskItem
from .errors import (
    EmptyTrainingSet,
    IncorrectCot,
    MalformedRow,
    MismatchedItem,
    SizeTooLarge,
    UnknownKey,
)
from .fileio import read_jsonl, sha256_file, write_jsonl_atomic, write_text_atomic, dump_json
from .parsing import parse_cot_reply
from .prompting import render_cot_prompt, render_options

logger = logging.getLogger(__name__)

DEFAULT_SWEEP_SIZES = (4, 8, 16, 32, 64, 128)

TRAIN_TEXT_RE = re.compile(
    r"^<s> \[INST\] Question: (?P<question>.*?) Options: (?P<options>.*?)"
    r" \[/INST\] Explanation: (?P<explanation>.*) </s>$",
    re.DOTALL,
)

# Substrings that would corrupt the training grammar if a field carried them.
_DELIMITERS = ("<s>", "</s>", "[INST]", "[/INST]")


@dataclass(frozen=True)
class CotRecord:
    """One teacher reply, parsed and graded against the gold label."""

    item_id: str
    explanation: str
    answer_label: str | None
    confidence_pct: int | None
    teacher_model: str
    correct: bool

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "CotRecord":
        return cls(
            item_id=str(obj["item_id"]),
            explanation=obj["explanation"],
            answer_label=obj.get("answer_label"),
            confidence_pct=obj.get("confidence_pct"),
            teacher_model=obj.get("teacher_model", ""),
            correct=bool(obj["correct"]),
        )


@dataclass(frozen=True)
class TrainExample:
    """One training line: the owning item and the full formatted string."""

    item_id: str
    text: str


@dataclass(frozen=True)
class TrainingManifest:
    """Fine-tuning hyperparameters recorded next to every training file."""

    lora_dim: int = 64
    alpha: int = 16
    dropout: float = 0.1
    epochs: int = 20
    batch_size: int = 4
    learning_rate: float = 2e-4
    weight_decay: float = 0.001
    optimizer: str = "Adam"
    warmup: float = 0.03

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def emit_training_manifest(overrides: Mapping[str, Any] | None = None) -> TrainingManifest:
    """Manifest with defaults, overridden key by key; unknown keys refuse."""
    overrides = dict(overrides or {})
    known = {f.name for f in fields(TrainingManifest)}
    unknown = set(overrides) - known
    if unknown:
        raise UnknownKey(f"unknown manifest key(s): {', '.join(sorted(unknown))}")
    return TrainingManifest(**overrides)


def harvest_cots(
    items: Sequence[TaskItem],
    backend: Backend,
    params: GenerationParams,
    *,
    teacher_model: str,
    samples_per_item: int = 1,
    max_concurrency: int = 1,
    templates_dir: str | Path | None = None,
) -> list[CotRecord]:
    """Query the teacher for every (item, sample) pair and grade the replies.

    Records come back in item order (sample index as the minor key) no matter
    how requests interleave. Parse failures become records with
    ``correct=False`` rather than exceptions; backend errors propagate after
    the backend's own retry budget. When the backend is cache-wrapped, every
    completed request is durable, so an interrupted harvest rerun resumes
    from cache instead of re-querying.
    """
    if samples_per_item < 1:
        raise ValueError("samples_per_item must be >= 1")
    requests = [
        (item, sample_index)
        for item in items
        for sample_index in range(samples_per_item)
    ]

    def fetch(pair: tuple[TaskItem, int]) -> CotRecord:
        item, sample_index = pair
        prompt = render_cot_prompt(item, templates_dir=templates_dir)
        reply = backend.complete(prompt, params, teacher_model, sample_index=sample_index)
        explanation, prediction = parse_cot_reply(reply.raw_text, item.option_labels)
        correct = prediction.answer_label == item.gold_label
        if prediction.answer_label is None:
            logger.info("item %s sample %d: unparseable reply (%s)", item.id, sample_index, prediction.status)
        return CotRecord(
            item_id=item.id,
            explanation=explanation,
            answer_label=prediction.answer_label,
            confidence_pct=prediction.confidence_pct,
            teacher_model=teacher_model,
            correct=correct,
        )

    if max_concurrency > 1 and len(requests) > 1:
        with ThreadPoolExecutor(max_workers=max_concurrency) as pool:
            records = list(pool.map(fetch, requests))
    else:
        records = [fetch(pair) for pair in requests]
    kept = sum(r.correct for r in records)
    logger.info("harvested %d record(s), %d correct", len(records), kept)
    return records


def filter_correct(cots: Iterable[CotRecord]) -> list[CotRecord]:
    """Keep only CoTs whose answer matched the gold label; order preserved."""
    return [c for c in cots if c.correct]


def _escape_delimiters(text: str) -> str:
    for token in _DELIMITERS:
        escaped = "".join("\\" + ch if ch in "<>[]" else ch for ch in token)
        text = text.replace(token, escaped)
    return text


def format_train_example(item: TaskItem, cot: CotRecord) -> TrainExample:
    """Render one correct CoT into the instruction-tuning string."""
    if cot.item_id != item.id:
        raise MismatchedItem(f"cot belongs to {cot.item_id!r}, not {item.id!r}")
    if not cot.correct:
        raise IncorrectCot(f"cot for {item.id!r} answered {cot.answer_label!r}")
    question = _escape_delimiters(item.question)
    options = _escape_delimiters(render_options(item.options))
    explanation = _escape_delimiters(cot.explanation)
    text = (
        f"<s> [INST] Question: {question} Options: {options} [/INST] "
        f"Explanation: {explanation} </s>"
    )
    return TrainExample(item_id=item.id, text=text)


def train_text_is_valid(text: str) -> bool:
    """True when a training string re-parses under the emission grammar."""
    return (
        TRAIN_TEXT_RE.match(text) is not None
        and text.count("[INST]") == 1
        and text.count("[/INST]") == 1
    )


def build_train_examples(items: Sequence[TaskItem], cots: Iterable[CotRecord]) -> list[TrainExample]:
    """Format every correct CoT against its item; unknown item ids refuse."""
    by_id = {item.id: item for item in items}
    examples = []
    for cot in cots:
        if cot.item_id not in by_id:
            raise MismatchedItem(f"no item with id {cot.item_id!r}")
        examples.append(format_train_example(by_id[cot.item_id], cot))
    return examples


def emit_train_file(
    examples: Sequence[TrainExample],
    path: str | Path,
    *,
    manifest: TrainingManifest | None = None,
) -> dict[str, Any]:
    """Write a training JSONL atomically; returns count, path, and SHA-256.

    With ``manifest`` given, a ``training_manifest.json`` sidecar lands next
    to the file.
    """
    path = Path(path)
    write_jsonl_atomic(path, ({"item_id": e.item_id, "text": e.text} for e in examples))
    summary: dict[str, Any] = {
        "path": str(path),
        "count": len(examples),
        "sha256": sha256_file(path),
    }
    if manifest is not None:
        manifest_path = path.parent / "training_manifest.json"
        write_text_atomic(manifest_path, dump_json(manifest.to_dict()) + "\n")
        summary["manifest_path"] = str(manifest_path)
    return summary


def load_train_file(path: str | Path) -> list[TrainExample]:
    examples = []
    for lineno, obj in read_jsonl(Path(path)):
        try:
            examples.append(TrainExample(item_id=str(obj["item_id"]), text=obj["text"]))
        except KeyError as exc:
            raise MalformedRow(lineno, f"missing key {exc}") from exc
    return examples


def subset_for_sweep(
    examples: Sequence[TrainExample],
    sizes: Sequence[int] | None = None,
    seed: int = 0,
) -> dict[int, list[TrainExample]]:
    """Nested subsets by size: one seeded shuffle, then prefixes.

    Because every subset is a prefix of the same shuffled order, smaller
    subsets are strictly contained in larger ones. Default sizes are
    ``(4, 8, 16, 32, 64, 128)`` clipped to the corpus size.
    """
    if sizes is None:
        sizes = [s for s in DEFAULT_SWEEP_SIZES if s <= len(examples)]
    for size in sizes:
        if size < 0 or size > len(examples):
            raise SizeTooLarge(f"size {size} with only {len(examples)} example(s)")
    order = list(range(len(examples)))
    random.Random(seed).shuffle(order)
    shuffled = [examples[i] for i in order]
    return {size: shuffled[:size] for size in sizes}


def write_cots_jsonl(records: Iterable[CotRecord], path: str | Path) -> None:
    write_jsonl_atomic(Path(path), (r.to_dict() for r in records))


def read_cots_jsonl(path: str | Path) -> list[CotRecord]:
    records = []
    for lineno, obj in read_jsonl(Path(path)):
        try:
            records.append(CotRecord.from_dict(obj))
        except KeyError as exc:
            raise MalformedRow(lineno, f"missing key {exc}") from exc
    return records


def require_nonempty(cots: Sequence[CotRecord]) -> Sequence[CotRecord]:
    if not cots:
        raise EmptyTrainingSet("no correct CoTs to train on")
    return cots
