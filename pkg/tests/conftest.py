from __future__ import annotations

import shutil
from pathlib import Path

import pytest

from cotkt.datasets import Option, TaskItem
from cotkt.metrics import EvalRecord

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture
def config_path() -> Path:
    return DATA_DIR / "config.json"


@pytest.fixture
def tmp_data(tmp_path: Path) -> Path:
    """A writable copy of tests/data for tests that mutate fixtures."""
    dst = tmp_path / "data"
    shutil.copytree(DATA_DIR, dst)
    return dst


def make_item(
    idx: int = 0,
    gold: str = "A",
    n_options: int = 2,
    question: str | None = None,
    task_kind: str = "sentiment",
) -> TaskItem:
    letters = "ABCDEFGH"[:n_options]
    options = tuple(Option(letter, f"option {letter.lower()}") for letter in letters)
    return TaskItem(
        id=f"item-{idx:03d}",
        task_kind=task_kind,
        question=question or f"question number {idx}",
        options=options,
        gold_label=gold,
        source="synthetic",
    )


def make_record(
    idx: int,
    gold: str = "A",
    predicted: str | None = "A",
    confidence: float | None = 0.9,
) -> EvalRecord:
    return EvalRecord(
        item_id=f"rec-{idx:03d}",
        gold_label=gold,
        predicted_label=predicted,
        confidence=confidence,
    )


@pytest.fixture
def item_factory():
    return make_item


@pytest.fixture
def record_factory():
    return make_record
