"""Rationale distillation and verbalized-confidence calibration toolkit."""

from __future__ import annotations

__version__ = "0.1.0"

from .backend import (  # noqa: F401
    CachedBackend,
    GenerationParams,
    HttpChatBackend,
    ModelReply,
    ReplayBackend,
    ResponseCache,
    fingerprint,
)
from .datasets import (  # noqa: F401
    DatasetSpec,
    Option,
    TaskItem,
    load_dataset,
    read_items_jsonl,
    sample_items,
    write_items_jsonl,
)
from .metrics import (  # noqa: F401
    Arm,
    BinStats,
    EvalRecord,
    EvalReport,
    accuracy,
    build_report,
    compare_reports,
    ece,
    reliability_bins,
    rob,
)
from .parsing import ParsedPrediction, parse_cot_reply, parse_prediction  # noqa: F401
from .pipeline import (  # noqa: F401
    CotRecord,
    TrainExample,
    TrainingManifest,
    emit_train_file,
    emit_training_manifest,
    filter_correct,
    format_train_example,
    harvest_cots,
    subset_for_sweep,
)
from .prompting import (  # noqa: F401
    ANCHOR,
    RenderedPrompt,
    render_cot_prompt,
    render_inference_prompt,
)
from .sweep import SweepPoint, attach_results, curve_csv, plan_sweep  # noqa: F401
