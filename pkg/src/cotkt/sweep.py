"""Plan and score training-set-size sweeps with nested subsets.

``plan_sweep`` fixes the experiment up front: one seeded shuffle of the
training examples, one prefix subset per requested size (so size 8 is a
strict subset of size 16), one training file per subset, and a state file
recording sizes, seed, and content hashes. After the user fine-tunes and
evaluates each size externally, ``attach_results`` joins the predictions back
in, recomputes metrics, and renders the size/ACC/ROB/ECE curve.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

from .errors import MalformedRow, MissingPredictions, StaleTrainFile
from .fileio import sha256_file, write_text_atomic
from .metrics import Arm, EvalReport, build_report, records_from_jsonl
from .pipeline import TrainExample, emit_train_file, subset_for_sweep

STATE_FILENAME = "sweep_state.json"


@dataclass(frozen=True)
class SweepPoint:
    """One sweep size: its training file, the file's hash, and results so far."""

    size: int
    train_file: str
    train_file_hash: str
    predictions: str | None = None
    report: EvalReport | None = None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "size": self.size,
            "train_file": self.train_file,
            "train_file_hash": self.train_file_hash,
            "predictions": self.predictions,
        }
        if self.report is not None:
            out["report"] = self.report.to_dict()
        return out

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "SweepPoint":
        report = EvalReport.from_dict(obj["report"]) if obj.get("report") else None
        return cls(
            size=int(obj["size"]),
            train_file=obj["train_file"],
            train_file_hash=obj["train_file_hash"],
            predictions=obj.get("predictions"),
            report=report,
        )


def plan_sweep(
    examples: Sequence[TrainExample],
    sizes: Sequence[int] | None,
    seed: int,
    out_dir: str | Path,
) -> list[SweepPoint]:
    """Emit one nested training file per size; reports stay pending."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    subsets = subset_for_sweep(examples, sizes, seed)
    points = []
    for size in sorted(subsets):
        path = out_dir / f"train_{size:04d}.jsonl"
        summary = emit_train_file(subsets[size], path)
        points.append(
            SweepPoint(size=size, train_file=str(path), train_file_hash=summary["sha256"])
        )
    return points


def write_sweep_state(points: Sequence[SweepPoint], seed: int, path: str | Path) -> None:
    state = {
        "seed": seed,
        "sizes": [p.size for p in points],
        "points": [p.to_dict() for p in points],
    }
    write_text_atomic(Path(path), json.dumps(state, ensure_ascii=False, indent=2) + "\n")


def load_sweep_state(path: str | Path) -> tuple[list[SweepPoint], int]:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        state = json.load(fh)
    points = [SweepPoint.from_dict(p) for p in state["points"]]
    return points, int(state["seed"])


def attach_results(
    points: Sequence[SweepPoint],
    predictions_per_size: Mapping[int, str | Path],
    *,
    arm_model: str = "student",
    arm_dataset: str = "dataset",
    n_bins: int = 10,
    rob_threshold: float = 0.8,
    rob_comparator: str = "strict",
    verify_hashes: bool = True,
) -> list[SweepPoint]:
    """Join per-size predictions onto the plan and score every point.

    Every planned size must have predictions (MissingPredictions otherwise),
    and planned training files must still hash to their recorded value
    (StaleTrainFile otherwise), so results can never silently describe
    training data that no longer exists.
    """
    completed = []
    for point in points:
        if point.size not in predictions_per_size:
            raise MissingPredictions(point.size)
        if verify_hashes:
            train_path = Path(point.train_file)
            if not train_path.exists():
                raise StaleTrainFile(f"{point.train_file} is gone")
            current = sha256_file(train_path)
            if current != point.train_file_hash:
                raise StaleTrainFile(
                    f"{point.train_file} hash {current[:12]} != planned {point.train_file_hash[:12]}"
                )
        pred_path = Path(predictions_per_size[point.size])
        records = records_from_jsonl(pred_path)
        if not records:
            raise MalformedRow(1, f"predictions file {pred_path} is empty")
        report = build_report(
            records,
            Arm(model=arm_model, method="KT", dataset=arm_dataset),
            n_bins=n_bins,
            rob_threshold=rob_threshold,
            rob_comparator=rob_comparator,
        )
        completed.append(
            SweepPoint(
                size=point.size,
                train_file=point.train_file,
                train_file_hash=point.train_file_hash,
                predictions=str(pred_path),
                report=report,
            )
        )
    return completed


def curve_csv(points: Sequence[SweepPoint]) -> str:
    """The sweep curve: one ``size,acc,rob,ece`` row per size, ascending."""
    lines = ["size,acc,rob,ece"]
    for point in sorted(points, key=lambda p: p.size):
        if point.report is None:
            continue
        r = point.report
        lines.append(f"{point.size},{r.acc!r},{r.rob!r},{r.ece!r}")
    return "\n".join(lines) + "\n"
