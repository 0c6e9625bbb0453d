"""Accuracy, overconfidence rate, and expected calibration error.

Definitions, over N evaluation records:

* ACC: fraction answered correctly. Records without a prediction count as
  incorrect; N is always the full record count.
* ROB: fraction answered incorrectly *and* held with confidence above the
  threshold (default 0.8, strict comparison; an inclusive comparator is
  available). Records without a confidence can never be overconfident, but
  they stay in the denominator, so ACC + ROB <= 1 holds structurally.
* ECE: records carrying a confidence are split into ``n_bins`` equal-width
  bins ``[i/B, (i+1)/B)`` with the last bin closed at 1.0, and ECE is the
  bin-count-weighted mean absolute gap between each bin's accuracy and its
  mean confidence. Empty bins contribute nothing.

Confidences live on [0, 1] here; the percentage scale from reply parsing is
divided down at this boundary and nowhere else. Bin sums use ``math.fsum``,
which is correctly rounded, so every metric is exactly invariant under record
reordering.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from math import fsum
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .errors import BadBinCount, BadThreshold, EmptyInput, MalformedRow
from .fileio import read_jsonl, write_jsonl_atomic
from .parsing import STATUS_AMBIGUOUS, ParsedPrediction

METHODS = ("Vanilla", "QA", "KT")
ROB_COMPARATORS = ("strict", "inclusive")


@dataclass(frozen=True)
class EvalRecord:
    """One scored item; ``correct`` is derived, never stored."""

    item_id: str
    gold_label: str
    predicted_label: str | None
    confidence: float | None

    def __post_init__(self) -> None:
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")

    @property
    def correct(self) -> bool:
        return self.predicted_label is not None and self.predicted_label == self.gold_label

    def to_dict(self) -> dict[str, Any]:
        return {
            "item_id": self.item_id,
            "gold_label": self.gold_label,
            "predicted_label": self.predicted_label,
            "confidence": self.confidence,
        }


@dataclass(frozen=True)
class Arm:
    """One evaluated configuration: which model, trained how, on what data."""

    model: str
    method: str
    dataset: str

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")


@dataclass(frozen=True)
class BinStats:
    """One reliability bin; statistics are None when the bin is empty."""

    lo: float
    hi: float
    count: int
    mean_confidence: float | None
    accuracy: float | None


@dataclass(frozen=True)
class EvalReport:
    arm: Arm
    n: int
    acc: float
    rob: float
    ece: float
    bins: tuple[BinStats, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "arm": {"model": self.arm.model, "method": self.arm.method, "dataset": self.arm.dataset},
            "n": self.n,
            "acc": self.acc,
            "rob": self.rob,
            "ece": self.ece,
            "bins": [
                {
                    "lo": b.lo,
                    "hi": b.hi,
                    "count": b.count,
                    "mean_confidence": b.mean_confidence,
                    "accuracy": b.accuracy,
                }
                for b in self.bins
            ],
        }

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "EvalReport":
        arm = Arm(**obj["arm"])
        bins = tuple(
            BinStats(
                lo=b["lo"],
                hi=b["hi"],
                count=b["count"],
                mean_confidence=b.get("mean_confidence"),
                accuracy=b.get("accuracy"),
            )
            for b in obj.get("bins", [])
        )
        return cls(arm=arm, n=obj["n"], acc=obj["acc"], rob=obj["rob"], ece=obj["ece"], bins=bins)


def record_from_prediction(item_id: str, gold_label: str, pred: ParsedPrediction) -> EvalRecord:
    """Map a parsed reply onto an evaluation record.

    Ambiguous parses carry neither answer nor confidence forward, so they
    score as incorrect and stay out of every calibration bin. Partial parses
    keep whatever was recovered: an answer without a number still counts for
    accuracy, and a bare confidence without an answer still counts toward
    overconfidence.
    """
    if pred.status == STATUS_AMBIGUOUS:
        return EvalRecord(item_id, gold_label, None, None)
    confidence = None if pred.confidence_pct is None else pred.confidence_pct / 100
    return EvalRecord(item_id, gold_label, pred.answer_label, confidence)


def accuracy(records: Sequence[EvalRecord]) -> float:
    """Fraction of records answered correctly, over all records."""
    if not records:
        raise EmptyInput("no records")
    return sum(1 for r in records if r.correct) / len(records)


def rob(
    records: Sequence[EvalRecord],
    threshold: float = 0.8,
    comparator: str = "strict",
) -> float:
    """Fraction of records that are wrong yet confident beyond the threshold."""
    if not records:
        raise EmptyInput("no records")
    if not 0.0 <= threshold <= 1.0:
        raise BadThreshold(f"threshold {threshold} outside [0, 1]")
    if comparator not in ROB_COMPARATORS:
        raise BadThreshold(f"comparator must be one of {ROB_COMPARATORS}")
    hits = 0
    for r in records:
        if r.correct or r.confidence is None:
            continue
        if r.confidence > threshold or (comparator == "inclusive" and r.confidence == threshold):
            hits += 1
    return hits / len(records)


def _bin_index(confidence: float, n_bins: int) -> int:
    """Index of the bin [i/B, (i+1)/B) holding ``confidence``; last bin closed.

    The boundaries that matter are the exact quotients i/B, so the candidate
    from multiplication is nudged until the defining comparisons hold.
    """
    i = min(int(confidence * n_bins), n_bins - 1)
    while i > 0 and confidence < i / n_bins:
        i -= 1
    while i < n_bins - 1 and confidence >= (i + 1) / n_bins:
        i += 1
    return i


def _binned(records: Sequence[EvalRecord], n_bins: int) -> tuple[list[BinStats], int]:
    if not isinstance(n_bins, int) or n_bins < 1:
        raise BadBinCount(f"n_bins must be a positive integer, got {n_bins!r}")
    confident = [r for r in records if r.confidence is not None]
    members: list[list[EvalRecord]] = [[] for _ in range(n_bins)]
    for r in confident:
        members[_bin_index(r.confidence, n_bins)].append(r)
    bins: list[BinStats] = []
    for i in range(n_bins):
        group = members[i]
        lo, hi = i / n_bins, (i + 1) / n_bins
        if group:
            mean_conf = fsum(r.confidence for r in group) / len(group)
            acc = sum(1 for r in group if r.correct) / len(group)
            bins.append(BinStats(lo, hi, len(group), mean_conf, acc))
        else:
            bins.append(BinStats(lo, hi, 0, None, None))
    return bins, len(confident)


def reliability_bins(records: Sequence[EvalRecord], n_bins: int = 10) -> list[BinStats]:
    """Per-bin counts, mean confidence, and accuracy; ECE is exactly
    recomputable from the result."""
    if not records:
        raise EmptyInput("no records")
    bins, _ = _binned(records, n_bins)
    return bins


def ece(records: Sequence[EvalRecord], n_bins: int = 10) -> float:
    """Expected calibration error over the confidence-bearing records."""
    if not records:
        raise EmptyInput("no records")
    bins, total = _binned(records, n_bins)
    if total == 0:
        raise EmptyInput("no records carry a confidence")
    return ece_from_bins(bins, total)


def ece_from_bins(bins: Iterable[BinStats], total: int) -> float:
    """Recompute ECE from bin statistics; exact for bins produced here."""
    return fsum(
        (b.count / total) * abs(b.accuracy - b.mean_confidence)
        for b in bins
        if b.count
    )


def build_report(
    records: Sequence[EvalRecord],
    arm: Arm,
    *,
    n_bins: int = 10,
    rob_threshold: float = 0.8,
    rob_comparator: str = "strict",
) -> EvalReport:
    """All three metrics plus reliability bins over one arm's records."""
    if not records:
        raise EmptyInput("no records")
    return EvalReport(
        arm=arm,
        n=len(records),
        acc=accuracy(records),
        rob=rob(records, rob_threshold, rob_comparator),
        ece=ece(records, n_bins),
        bins=tuple(reliability_bins(records, n_bins)),
    )


def records_from_jsonl(path: str | Path) -> list[EvalRecord]:
    """Load a predictions file: {item_id, gold_label, predicted_label, confidence}."""
    records = []
    for lineno, obj in read_jsonl(Path(path)):
        try:
            record = EvalRecord(
                item_id=str(obj["item_id"]),
                gold_label=str(obj["gold_label"]),
                predicted_label=obj.get("predicted_label"),
                confidence=obj.get("confidence"),
            )
        except KeyError as exc:
            raise MalformedRow(lineno, f"missing key {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise MalformedRow(lineno, str(exc)) from exc
        records.append(record)
    return records


def write_records_jsonl(records: Iterable[EvalRecord], path: str | Path) -> None:
    write_jsonl_atomic(Path(path), (r.to_dict() for r in records))


def reliability_csv(bins: Iterable[BinStats]) -> str:
    """Bins as CSV with full-precision floats (repr round-trips exactly)."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["lo", "hi", "count", "mean_confidence", "accuracy"])
    for b in bins:
        writer.writerow(
            [
                repr(b.lo),
                repr(b.hi),
                b.count,
                "" if b.mean_confidence is None else repr(b.mean_confidence),
                "" if b.accuracy is None else repr(b.accuracy),
            ]
        )
    return out.getvalue()


def bins_from_csv(text: str) -> tuple[list[BinStats], int]:
    """Parse a reliability CSV back into bins plus the confident-record count."""
    reader = csv.DictReader(io.StringIO(text))
    bins = []
    for row in reader:
        bins.append(
            BinStats(
                lo=float(row["lo"]),
                hi=float(row["hi"]),
                count=int(row["count"]),
                mean_confidence=float(row["mean_confidence"]) if row["mean_confidence"] else None,
                accuracy=float(row["accuracy"]) if row["accuracy"] else None,
            )
        )
    return bins, sum(b.count for b in bins)


@dataclass(frozen=True)
class ComparisonTable:
    """Metric rows against (model, dataset, method) columns, with best flags."""

    reports: tuple[EvalReport, ...]

    _METRICS = (("ACC", "acc", max), ("ROB", "rob", min), ("ECE", "ece", min))

    def best_flags(self) -> dict[tuple[str, str, str, str], bool]:
        """(model, dataset, method, metric) -> is this the best value."""
        flags: dict[tuple[str, str, str, str], bool] = {}
        groups: dict[tuple[str, str], list[EvalReport]] = {}
        for report in self.reports:
            groups.setdefault((report.arm.model, report.arm.dataset), []).append(report)
        for (model, dataset), group in groups.items():
            for metric_name, attr, pick in self._METRICS:
                best = pick(getattr(r, attr) for r in group)
                for r in group:
                    key = (model, dataset, r.arm.method, metric_name)
                    flags[key] = getattr(r, attr) == best
        return flags

    def to_csv_text(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["model", "dataset", "method", "metric", "value", "best"])
        flags = self.best_flags()
        for report in self.reports:
            arm = report.arm
            for metric_name, attr, _ in self._METRICS:
                value = getattr(report, attr)
                best = flags[(arm.model, arm.dataset, arm.method, metric_name)]
                writer.writerow(
                    [arm.model, arm.dataset, arm.method, metric_name, repr(value), str(best).lower()]
                )
        return out.getvalue()

    def to_text(self) -> str:
        """Aligned plain-text grid, one block per (model, dataset), best starred."""
        flags = self.best_flags()
        blocks: list[str] = []
        seen: list[tuple[str, str]] = []
        for report in self.reports:
            key = (report.arm.model, report.arm.dataset)
            if key not in seen:
                seen.append(key)
        for model, dataset in seen:
            group = [r for r in self.reports if (r.arm.model, r.arm.dataset) == (model, dataset)]
            methods = [r.arm.method for r in group]
            width = max(8, *(len(m) + 1 for m in methods))
            lines = [f"model: {model}  dataset: {dataset}"]
            header = "metric  " + "".join(m.rjust(width) for m in methods)
            lines.append(header)
            for metric_name, attr, _ in self._METRICS:
                cells = []
                for r in group:
                    value = f"{getattr(r, attr):.3f}"
                    if flags[(model, dataset, r.arm.method, metric_name)]:
                        value = "*" + value
                    cells.append(value.rjust(width))
                lines.append(f"{metric_name:<8}" + "".join(cells))
            blocks.append("\n".join(lines))
        return "\n\n".join(blocks) + "\n"


def compare_reports(reports: Sequence[EvalReport]) -> ComparisonTable:
    """Assemble reports into one comparison; requires at least one report."""
    if not reports:
        raise EmptyInput("no reports")
    return ComparisonTable(reports=tuple(reports))
