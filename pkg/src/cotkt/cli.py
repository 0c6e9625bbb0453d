"""Command-line orchestration for the full pipeline.

Subcommands mirror the pipeline stages::

    cotkt harvest      query the teacher, grade replies, keep the rationales
    cotkt build-train  format correct rationales into training files
    cotkt eval         score predictions (from files or a live student)
    cotkt report       combine report files into one comparison table
    cotkt sweep plan   emit nested subset training files plus a state file
    cotkt sweep attach join per-size predictions and render the curve

Every command takes ``--config`` and operates inside a run directory whose
manifest records content hashes; ``--verify`` re-checks those hashes instead
of doing new work. Exit codes: 0 success, 1 pipeline failure, 2 bad usage or
configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .config import RunConfig, load_config, make_backend
from .datasets import load_dataset, read_items_jsonl, sample_items, write_items_jsonl
from .errors import ConfigError, CotktError, FileMissing, MissingPredictions, UsageError
from .fileio import write_text_atomic
from .metrics import (
    METHODS,
    Arm,
    EvalRecord,
    EvalReport,
    build_report,
    compare_reports,
    records_from_jsonl,
    record_from_prediction,
    reliability_csv,
    write_records_jsonl,
)
from .parsing import parse_prediction
from .pipeline import (
    build_train_examples,
    emit_train_file,
    emit_training_manifest,
    filter_correct,
    harvest_cots,
    read_cots_jsonl,
    require_nonempty,
    write_cots_jsonl,
)
from .plots import reliability_svg
from .prompting import render_inference_prompt
from .runs import resolve_run_dir, update_manifest, verify_run
from .sweep import (
    STATE_FILENAME,
    attach_results,
    curve_csv,
    load_sweep_state,
    plan_sweep,
    write_sweep_state,
)

logger = logging.getLogger(__name__)


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="path to the run config JSON file")
    common.add_argument("--run-dir", help="run directory (default: runs/<timestamp>-<hash>)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--max-concurrency", type=int, help="max in-flight requests")
    common.add_argument("--verify", action="store_true", help="re-check run artifact hashes and exit")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(prog="cotkt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"cotkt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("harvest", parents=[common], help="collect teacher rationales")
    p.add_argument("--dataset", required=True, help="dataset name from the config")
    p.add_argument("--teacher", required=True, help="backend name from the config")
    p.add_argument("--sample", type=int, help="sample this many items before harvesting")
    p.add_argument("--samples-per-item", type=int, help="rationales per item (default from config)")
    p.add_argument("--skip-bad-rows", action="store_true", help="log and skip malformed rows")
    p.add_argument("--no-cache", action="store_true", help="disable the on-disk reply cache")

    p = sub.add_parser("build-train", parents=[common], help="emit training files")
    p.add_argument("--sizes", help="comma-separated subset sizes (also plans a sweep)")
    p.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a training-manifest field",
    )

    p = sub.add_parser("eval", parents=[common], help="score one or more arms")
    p.add_argument(
        "--predictions",
        action="append",
        default=[],
        metavar="[METHOD=]PATH",
        help="score an existing predictions file (repeatable)",
    )
    p.add_argument("--dataset", help="dataset name for live evaluation")
    p.add_argument("--student", help="backend name for live evaluation")
    p.add_argument("--method", help="method label when not embedded in --predictions")
    p.add_argument("--model-label", help="model column label in reports")
    p.add_argument("--dataset-label", help="dataset column label in reports")
    p.add_argument("--svg", action="store_true", help="also write a reliability diagram")
    p.add_argument("--no-cache", action="store_true", help="disable the on-disk reply cache")

    p = sub.add_parser("report", parents=[common], help="combine report files")
    p.add_argument("--reports", nargs="+", required=True, help="report JSON files to combine")
    p.add_argument("--out-dir", help="where to write comparison.csv/.txt (default: run dir or cwd)")

    sweep = sub.add_parser("sweep", help="training-set-size sweeps")
    sweep_sub = sweep.add_subparsers(dest="sweep_command", required=True)

    p = sweep_sub.add_parser("plan", parents=[common], help="emit nested subset files")
    p.add_argument("--sizes", help="comma-separated subset sizes")

    p = sweep_sub.add_parser("attach", parents=[common], help="join per-size predictions")
    p.add_argument(
        "--predictions",
        action="append",
        default=[],
        required=True,
        metavar="SIZE=PATH",
        help="predictions file for one sweep size (repeatable)",
    )
    p.add_argument("--model-label", help="model column label in sweep reports")
    p.add_argument("--dataset-label", help="dataset column label in sweep reports")

    return parser


def _parse_sizes(text: str | None) -> list[int] | None:
    if not text:
        return None
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --sizes value {text!r}") from exc


def _load_config(args: argparse.Namespace) -> RunConfig:
    if not args.config:
        raise ConfigError("--config is required for this command")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.max_concurrency is not None:
        cfg.max_concurrency = args.max_concurrency
    return cfg


def _run_dir(args: argparse.Namespace, cfg: RunConfig) -> Path:
    run_dir = resolve_run_dir(args.run_dir, "runs", cfg.config_hash)
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def _maybe_verify(args: argparse.Namespace) -> int | None:
    """Handle --verify: re-hash the run dir and report, skipping new work."""
    if not getattr(args, "verify", False):
        return None
    if not args.run_dir:
        raise UsageError("--verify needs --run-dir")
    problems = verify_run(Path(args.run_dir))
    if problems:
        for problem in problems:
            print(f"verify: {problem}", file=sys.stderr)
        return 1
    print(f"verify: {args.run_dir} is intact")
    return 0


def _named_backend(cfg: RunConfig, name: str):
    if name not in cfg.backends:
        raise ConfigError(f"no backend named {name!r} in the config")
    return cfg.backends[name]


def _named_dataset(cfg: RunConfig, name: str):
    if name not in cfg.datasets:
        raise ConfigError(f"no dataset named {name!r} in the config")
    return cfg.datasets[name]


def _canon_method(label: str) -> str:
    for method in METHODS:
        if label.lower() == method.lower():
            return method
    raise UsageError(f"unknown method {label!r}, expected one of {', '.join(METHODS)}")


def cmd_harvest(args: argparse.Namespace) -> int:
    verified = _maybe_verify(args)
    if verified is not None:
        return verified
    cfg = _load_config(args)
    spec = _named_dataset(cfg, args.dataset)
    backend_cfg = _named_backend(cfg, args.teacher)
    run_dir = _run_dir(args, cfg)

    items = load_dataset(spec, skip_bad_rows=args.skip_bad_rows)
    if args.sample is not None:
        items = sample_items(items, args.sample, cfg.seed)
    items_path = run_dir / "items.jsonl"
    write_items_jsonl(items, items_path)

    cache_path = None if args.no_cache or not cfg.use_cache else run_dir / "cache.jsonl"
    backend = make_backend(backend_cfg, cache_path)
    records = harvest_cots(
        items,
        backend,
        cfg.generation,
        teacher_model=backend_cfg.model,
        samples_per_item=args.samples_per_item or cfg.samples_per_item,
        max_concurrency=cfg.max_concurrency,
        templates_dir=cfg.templates_dir,
    )
    correct = filter_correct(records)
    cots_path = run_dir / "cots.jsonl"
    correct_path = run_dir / "cots_correct.jsonl"
    write_cots_jsonl(records, cots_path)
    write_cots_jsonl(correct, correct_path)
    update_manifest(
        run_dir,
        "harvest",
        {"items.jsonl": items_path, "cots.jsonl": cots_path, "cots_correct.jsonl": correct_path},
        {"items": len(items), "cots": len(records), "correct": len(correct)},
        config_hash=cfg.config_hash,
        tool_version=__version__,
    )
    print(f"wrote {items_path} ({len(items)} items)")
    print(f"wrote {cots_path} ({len(records)} records)")
    print(f"wrote {correct_path} ({len(correct)} correct)")
    return 0


def _parse_overrides(pairs: Sequence[str]) -> dict[str, Any]:
    overrides: dict[str, Any] = {}
    for pair in pairs:
        if "=" not in pair:
            raise UsageError(f"--set expects KEY=VALUE, got {pair!r}")
        key, _, value = pair.partition("=")
        try:
            overrides[key] = json.loads(value)
        except json.JSONDecodeError:
            overrides[key] = value
    return overrides


def cmd_build_train(args: argparse.Namespace) -> int:
    verified = _maybe_verify(args)
    if verified is not None:
        return verified
    cfg = _load_config(args)
    run_dir = _run_dir(args, cfg)
    items = read_items_jsonl(run_dir / "items.jsonl")
    cots = read_cots_jsonl(run_dir / "cots_correct.jsonl")
    require_nonempty(cots)
    examples = build_train_examples(items, cots)
    manifest = emit_training_manifest(_parse_overrides(args.overrides))
    train_path = run_dir / "train.jsonl"
    summary = emit_train_file(examples, train_path, manifest=manifest)
    print(f"wrote {summary['path']} ({summary['count']} examples, sha256 {summary['sha256'][:12]})")
    print(f"wrote {summary['manifest_path']}")

    files = {
        "train.jsonl": train_path,
        "training_manifest.json": Path(summary["manifest_path"]),
    }
    sizes = _parse_sizes(args.sizes)
    if sizes is not None:
        points = plan_sweep(examples, sizes, cfg.seed, run_dir)
        state_path = run_dir / STATE_FILENAME
        write_sweep_state(points, cfg.seed, state_path)
        for point in points:
            files[Path(point.train_file).name] = Path(point.train_file)
            print(f"wrote {point.train_file} ({point.size} examples)")
        files[STATE_FILENAME] = state_path
        print(f"wrote {state_path}")
    update_manifest(
        run_dir,
        "build_train",
        files,
        {"examples": len(examples)},
        config_hash=cfg.config_hash,
        tool_version=__version__,
    )
    return 0


def _live_records(
    args: argparse.Namespace, cfg: RunConfig, run_dir: Path
) -> tuple[list[EvalRecord], str, str, Path]:
    """Run the student over a dataset; returns records and labeling info."""
    spec = _named_dataset(cfg, args.dataset)
    backend_cfg = _named_backend(cfg, args.student)
    items = load_dataset(spec)
    cache_path = None if args.no_cache or not cfg.use_cache else run_dir / "cache.jsonl"
    backend = make_backend(backend_cfg, cache_path)

    def fetch(item) -> EvalRecord:
        prompt = render_inference_prompt(item, templates_dir=cfg.templates_dir)
        reply = backend.complete(prompt, cfg.generation, backend_cfg.model)
        prediction = parse_prediction(reply.raw_text, item.option_labels)
        return record_from_prediction(item.id, item.gold_label, prediction)

    if cfg.max_concurrency > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=cfg.max_concurrency) as pool:
            records = list(pool.map(fetch, items))
    else:
        records = [fetch(item) for item in items]
    predictions_path = run_dir / "predictions.jsonl"
    write_records_jsonl(records, predictions_path)
    print(f"wrote {predictions_path} ({len(records)} predictions)")
    return records, backend_cfg.model, spec.name, predictions_path


def cmd_eval(args: argparse.Namespace) -> int:
    verified = _maybe_verify(args)
    if verified is not None:
        return verified
    cfg = _load_config(args)
    run_dir = _run_dir(args, cfg)

    arms: list[tuple[str, list[EvalRecord], Path | None]] = []
    model_label = args.model_label or "model"
    dataset_label = args.dataset_label or "dataset"

    if args.predictions:
        for entry in args.predictions:
            if "=" in entry:
                method, _, path_text = entry.partition("=")
            else:
                method, path_text = args.method or "KT", entry
            path = Path(path_text)
            if not path.exists():
                raise FileMissing(str(path))
            arms.append((_canon_method(method), records_from_jsonl(path), None))
    elif args.dataset and args.student:
        records, model, dataset_name, predictions_path = _live_records(args, cfg, run_dir)
        model_label = args.model_label or model
        dataset_label = args.dataset_label or dataset_name
        arms.append((_canon_method(args.method or "KT"), records, predictions_path))
    else:
        raise UsageError("eval needs --predictions, or --dataset with --student")

    if cfg.metrics.drop_unparsed:
        arms = [
            (method, [r for r in records if r.predicted_label is not None], p)
            for method, records, p in arms
        ]

    files: dict[str, Path] = {}
    reports: list[EvalReport] = []
    multi = len(arms) > 1
    for method, records, predictions_path in arms:
        arm = Arm(model=model_label, method=method, dataset=dataset_label)
        report = build_report(
            records,
            arm,
            n_bins=cfg.metrics.n_bins,
            rob_threshold=cfg.metrics.rob_threshold,
            rob_comparator=cfg.metrics.rob_comparator,
        )
        reports.append(report)
        suffix = f"_{method}" if multi else ""
        report_path = run_dir / f"report{suffix}.json"
        write_text_atomic(report_path, json.dumps(report.to_dict(), ensure_ascii=False, indent=2) + "\n")
        bins_path = run_dir / f"reliability{suffix}.csv"
        write_text_atomic(bins_path, reliability_csv(report.bins))
        files[report_path.name] = report_path
        files[bins_path.name] = bins_path
        if predictions_path is not None:
            files[predictions_path.name] = predictions_path
        if args.svg:
            svg_path = run_dir / f"reliability{suffix}.svg"
            write_text_atomic(svg_path, reliability_svg(report.bins, title=f"{method} reliability"))
            files[svg_path.name] = svg_path
        print(
            f"{method}: n={report.n} acc={report.acc:.4f} rob={report.rob:.4f} ece={report.ece:.4f}"
        )
        print(f"wrote {report_path}")
        print(f"wrote {bins_path}")

    if multi:
        table = compare_reports(reports)
        comparison_csv = run_dir / "comparison.csv"
        comparison_txt = run_dir / "comparison.txt"
        write_text_atomic(comparison_csv, table.to_csv_text())
        write_text_atomic(comparison_txt, table.to_text())
        files["comparison.csv"] = comparison_csv
        files["comparison.txt"] = comparison_txt
        print(table.to_text(), end="")

    update_manifest(
        run_dir,
        "eval",
        files,
        {"arms": len(arms)},
        config_hash=cfg.config_hash,
        tool_version=__version__,
    )
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    verified = _maybe_verify(args)
    if verified is not None:
        return verified
    reports = []
    for path_text in args.reports:
        path = Path(path_text)
        if not path.exists():
            raise FileMissing(str(path))
        with open(path, encoding="utf-8") as fh:
            reports.append(EvalReport.from_dict(json.load(fh)))
    table = compare_reports(reports)
    out_dir = Path(args.out_dir or args.run_dir or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    write_text_atomic(out_dir / "comparison.csv", table.to_csv_text())
    write_text_atomic(out_dir / "comparison.txt", table.to_text())
    print(table.to_text(), end="")
    print(f"wrote {out_dir / 'comparison.csv'}")
    return 0


def cmd_sweep_plan(args: argparse.Namespace) -> int:
    verified = _maybe_verify(args)
    if verified is not None:
        return verified
    cfg = _load_config(args)
    run_dir = _run_dir(args, cfg)
    items = read_items_jsonl(run_dir / "items.jsonl")
    cots = read_cots_jsonl(run_dir / "cots_correct.jsonl")
    require_nonempty(cots)
    examples = build_train_examples(items, cots)
    points = plan_sweep(examples, _parse_sizes(args.sizes), cfg.seed, run_dir)
    state_path = run_dir / STATE_FILENAME
    write_sweep_state(points, cfg.seed, state_path)
    files = {Path(p.train_file).name: Path(p.train_file) for p in points}
    files[STATE_FILENAME] = state_path
    for point in points:
        print(f"wrote {point.train_file} ({point.size} examples)")
    print(f"wrote {state_path}")
    update_manifest(
        run_dir,
        "sweep_plan",
        files,
        {"sizes": len(points)},
        config_hash=cfg.config_hash,
        tool_version=__version__,
    )
    return 0


def cmd_sweep_attach(args: argparse.Namespace) -> int:
    verified = _maybe_verify(args)
    if verified is not None:
        return verified
    cfg = _load_config(args)
    run_dir = _run_dir(args, cfg)
    points, seed = load_sweep_state(run_dir / STATE_FILENAME)

    predictions: dict[int, Path] = {}
    for entry in args.predictions:
        size_text, sep, path_text = entry.partition("=")
        if not sep:
            raise UsageError(f"--predictions expects SIZE=PATH, got {entry!r}")
        try:
            size = int(size_text)
        except ValueError as exc:
            raise UsageError(f"bad sweep size {size_text!r}") from exc
        path = Path(path_text)
        if not path.exists():
            raise FileMissing(str(path))
        predictions[size] = path

    unknown = set(predictions) - {p.size for p in points}
    if unknown:
        raise MissingPredictions(sorted(unknown)[0])

    completed = attach_results(
        points,
        predictions,
        arm_model=args.model_label or "student",
        arm_dataset=args.dataset_label or "dataset",
        n_bins=cfg.metrics.n_bins,
        rob_threshold=cfg.metrics.rob_threshold,
        rob_comparator=cfg.metrics.rob_comparator,
    )
    state_path = run_dir / STATE_FILENAME
    write_sweep_state(completed, seed, state_path)
    curve_path = run_dir / "curve.csv"
    write_text_atomic(curve_path, curve_csv(completed))
    print(curve_csv(completed), end="")
    print(f"wrote {curve_path}")
    update_manifest(
        run_dir,
        "sweep_attach",
        {"curve.csv": curve_path, STATE_FILENAME: state_path},
        {"sizes": len(completed)},
        config_hash=cfg.config_hash,
        tool_version=__version__,
    )
    return 0


_DISPATCH = {
    "harvest": cmd_harvest,
    "build-train": cmd_build_train,
    "eval": cmd_eval,
    "report": cmd_report,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "sweep":
            handler = cmd_sweep_plan if args.sweep_command == "plan" else cmd_sweep_attach
            return handler(args)
        return _DISPATCH[args.command](args)
    except CotktError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: IoError: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
