"""Run configuration: one JSON file describing datasets, backends, and knobs.

Relative paths inside the file resolve against the file's own directory, so a
config can travel with its fixtures. Credentials never appear in the file;
an HTTP backend names the environment variable that holds its key.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .backend import Backend, CachedBackend, GenerationParams, HttpChatBackend, ReplayBackend, ResponseCache
from .datasets import DatasetSpec, Option
from .errors import ConfigError
from .fileio import sha256_text


@dataclass(frozen=True)
class BackendConfig:
    name: str
    kind: str  # "http" or "replay"
    model: str
    base_url: str | None = None
    credential_env: str | None = None
    fixture: str | None = None
    send_top_k: bool = False
    timeout: float = 60.0
    max_attempts: int = 4
    backoff_base: float = 0.5

    def __post_init__(self) -> None:
        if self.kind not in ("http", "replay"):
            raise ConfigError(f"backend {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "http" and not self.base_url:
            raise ConfigError(f"backend {self.name!r}: http backends need base_url")
        if self.kind == "replay" and not self.fixture:
            raise ConfigError(f"backend {self.name!r}: replay backends need a fixture path")


@dataclass(frozen=True)
class MetricsOptions:
    n_bins: int = 10
    rob_threshold: float = 0.8
    rob_comparator: str = "strict"
    drop_unparsed: bool = False


@dataclass
class RunConfig:
    datasets: dict[str, DatasetSpec]
    backends: dict[str, BackendConfig]
    generation: GenerationParams = field(default_factory=GenerationParams)
    metrics: MetricsOptions = field(default_factory=MetricsOptions)
    seed: int = 0
    max_concurrency: int = 4
    samples_per_item: int = 1
    templates_dir: str | None = None
    use_cache: bool = True
    raw: dict[str, Any] = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        return sha256_text(json.dumps(self.raw, sort_keys=True, ensure_ascii=False))


def _dataset_spec(name: str, obj: Mapping[str, Any], base: Path) -> DatasetSpec:
    try:
        options = None
        if obj.get("options") is not None:
            options = tuple(Option(o["label"], o["text"]) for o in obj["options"])
        return DatasetSpec(
            name=name,
            path=(base / obj["path"]).resolve() if not Path(obj["path"]).is_absolute() else Path(obj["path"]),
            format=obj["format"],
            task_kind=obj["task_kind"],
            column_map=dict(obj["column_map"]),
            label_map=dict(obj["label_map"]) if obj.get("label_map") else None,
            options=options,
        )
    except KeyError as exc:
        raise ConfigError(f"dataset {name!r}: missing key {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"dataset {name!r}: {exc}") from exc


def _backend_config(name: str, obj: Mapping[str, Any], base: Path) -> BackendConfig:
    fixture = obj.get("fixture")
    if fixture and not Path(fixture).is_absolute():
        fixture = str((base / fixture).resolve())
    try:
        return BackendConfig(
            name=name,
            kind=obj["kind"],
            model=obj["model"],
            base_url=obj.get("base_url"),
            credential_env=obj.get("credential_env"),
            fixture=fixture,
            send_top_k=bool(obj.get("send_top_k", False)),
            timeout=float(obj.get("timeout", 60.0)),
            max_attempts=int(obj.get("max_attempts", 4)),
            backoff_base=float(obj.get("backoff_base", 0.5)),
        )
    except KeyError as exc:
        raise ConfigError(f"backend {name!r}: missing key {exc}") from exc


def load_config(path: str | Path) -> RunConfig:
    """Parse and validate a run config file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    base = path.parent

    datasets = {
        name: _dataset_spec(name, obj, base)
        for name, obj in raw.get("datasets", {}).items()
    }
    backends = {
        name: _backend_config(name, obj, base)
        for name, obj in raw.get("backends", {}).items()
    }
    try:
        generation = GenerationParams(**raw.get("generation", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"generation params: {exc}") from exc
    try:
        metrics = MetricsOptions(**raw.get("metrics", {}))
    except TypeError as exc:
        raise ConfigError(f"metrics options: {exc}") from exc

    templates_dir = raw.get("templates_dir")
    if templates_dir and not Path(templates_dir).is_absolute():
        templates_dir = str((base / templates_dir).resolve())

    return RunConfig(
        datasets=datasets,
        backends=backends,
        generation=generation,
        metrics=metrics,
        seed=int(raw.get("seed", 0)),
        max_concurrency=int(raw.get("max_concurrency", 4)),
        samples_per_item=int(raw.get("samples_per_item", 1)),
        templates_dir=templates_dir,
        use_cache=bool(raw.get("use_cache", True)),
        raw=raw,
    )


def make_backend(cfg: BackendConfig, cache_path: str | Path | None = None) -> Backend:
    """Instantiate a configured backend, cache-wrapped when a path is given."""
    if cfg.kind == "replay":
        inner: Backend = ReplayBackend(cfg.fixture)
    else:
        api_key = None
        if cfg.credential_env:
            api_key = os.environ.get(cfg.credential_env)
            if not api_key:
                raise ConfigError(
                    f"backend {cfg.name!r}: environment variable {cfg.credential_env} is not set"
                )
        inner = HttpChatBackend(
            cfg.base_url,
            api_key=api_key,
            timeout=cfg.timeout,
            max_attempts=cfg.max_attempts,
            backoff_base=cfg.backoff_base,
            send_top_k=cfg.send_top_k,
        )
    if cache_path is None:
        return inner
    return CachedBackend(inner, ResponseCache(cache_path))
