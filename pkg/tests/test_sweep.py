from __future__ import annotations

import json
from pathlib import Path

import pytest

from cotkt.errors import MissingPredictions, StaleTrainFile
from cotkt.metrics import write_records_jsonl
from cotkt.pipeline import TrainExample, load_train_file
from cotkt.sweep import (
    SweepPoint,
    attach_results,
    curve_csv,
    load_sweep_state,
    plan_sweep,
    write_sweep_state,
)

from conftest import make_record


def examples(n: int) -> list[TrainExample]:
    return [TrainExample(item_id=f"e-{i:03d}", text=f"line {i}") for i in range(n)]


def predictions_file(path: Path, n_correct: int, n_total: int) -> Path:
    records = [
        make_record(i, predicted="A" if i < n_correct else "B", confidence=0.85)
        for i in range(n_total)
    ]
    write_records_jsonl(records, path)
    return path


@pytest.fixture
def planned(tmp_path):
    points = plan_sweep(examples(32), [4, 8, 16], seed=9, out_dir=tmp_path)
    return tmp_path, points


class TestPlan:
    def test_one_file_per_size_and_hashes_hold(self, planned):
        out_dir, points = planned
        assert [p.size for p in points] == [4, 8, 16]
        for point in points:
            path = Path(point.train_file)
            assert path.parent == out_dir
            assert len(load_train_file(path)) == point.size
            import hashlib

            assert point.train_file_hash == hashlib.sha256(path.read_bytes()).hexdigest()

    def test_planned_files_are_nested(self, planned):
        _, points = planned
        by_size = {p.size: load_train_file(p.train_file) for p in points}
        assert by_size[4] == by_size[8][:4]
        assert by_size[8] == by_size[16][:8]

    def test_state_round_trip(self, planned):
        out_dir, points = planned
        state_path = out_dir / "sweep_state.json"
        write_sweep_state(points, 9, state_path)
        loaded, seed = load_sweep_state(state_path)
        assert seed == 9
        assert loaded == points


class TestAttach:
    def test_scores_every_point(self, planned):
        out_dir, points = planned
        preds = {
            4: predictions_file(out_dir / "p4.jsonl", 1, 4),
            8: predictions_file(out_dir / "p8.jsonl", 4, 8),
            16: predictions_file(out_dir / "p16.jsonl", 12, 16),
        }
        completed = attach_results(points, preds)
        accs = [p.report.acc for p in completed]
        assert accs == [0.25, 0.5, 0.75]
        assert all(p.report.arm.method == "KT" for p in completed)
        assert completed[0].predictions == str(preds[4])

    def test_missing_size_refused(self, planned):
        out_dir, points = planned
        preds = {4: predictions_file(out_dir / "p4.jsonl", 1, 4)}
        with pytest.raises(MissingPredictions) as exc_info:
            attach_results(points, preds)
        assert exc_info.value.size == 8

    def test_stale_train_file_refused(self, planned):
        out_dir, points = planned
        preds = {
            size: predictions_file(out_dir / f"p{size}.jsonl", 1, size)
            for size in (4, 8, 16)
        }
        Path(points[0].train_file).write_text("tampered\n", encoding="utf-8")
        with pytest.raises(StaleTrainFile, match="hash"):
            attach_results(points, preds)

    def test_deleted_train_file_refused(self, planned):
        out_dir, points = planned
        preds = {
            size: predictions_file(out_dir / f"p{size}.jsonl", 1, size)
            for size in (4, 8, 16)
        }
        Path(points[1].train_file).unlink()
        with pytest.raises(StaleTrainFile, match="gone"):
            attach_results(points, preds)

    def test_hash_check_can_be_waived(self, planned):
        out_dir, points = planned
        preds = {
            size: predictions_file(out_dir / f"p{size}.jsonl", 1, size)
            for size in (4, 8, 16)
        }
        Path(points[0].train_file).write_text("tampered\n", encoding="utf-8")
        completed = attach_results(points, preds, verify_hashes=False)
        assert len(completed) == 3

    def test_state_with_reports_round_trips(self, planned):
        out_dir, points = planned
        preds = {
            size: predictions_file(out_dir / f"p{size}.jsonl", size // 2, size)
            for size in (4, 8, 16)
        }
        completed = attach_results(points, preds)
        state_path = out_dir / "sweep_state.json"
        write_sweep_state(completed, 9, state_path)
        loaded, _ = load_sweep_state(state_path)
        assert loaded == completed


class TestCurve:
    def test_rows_ascend_and_parse_back(self, planned):
        out_dir, points = planned
        preds = {
            4: predictions_file(out_dir / "p4.jsonl", 1, 4),
            8: predictions_file(out_dir / "p8.jsonl", 4, 8),
            16: predictions_file(out_dir / "p16.jsonl", 12, 16),
        }
        completed = attach_results(points, preds)
        text = curve_csv(completed)
        lines = text.splitlines()
        assert lines[0] == "size,acc,rob,ece"
        assert len(lines) == 4
        sizes = [int(line.split(",")[0]) for line in lines[1:]]
        assert sizes == sorted(sizes) == [4, 8, 16]
        for line, point in zip(lines[1:], sorted(completed, key=lambda p: p.size)):
            _, acc, rob, ece = line.split(",")
            assert float(acc) == point.report.acc
            assert float(rob) == point.report.rob
            assert float(ece) == point.report.ece

    def test_pending_points_are_skipped(self, planned):
        _, points = planned
        text = curve_csv(points)
        assert text == "size,acc,rob,ece\n"


def test_sweep_point_dict_round_trip(tmp_path):
    point = SweepPoint(size=4, train_file="t.jsonl", train_file_hash="ab" * 32)
    assert SweepPoint.from_dict(json.loads(json.dumps(point.to_dict()))) == point
