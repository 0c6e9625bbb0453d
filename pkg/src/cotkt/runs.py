"""Run directories: creation, manifest bookkeeping, and integrity checks.

A run directory collects every artifact of one experiment. Its manifest
records when the run started, the config hash, and per-stage file hashes;
``verify_run`` re-hashes everything the manifest names and reports drift.
Auto-named directories combine a UTC timestamp with the config hash so runs
sort chronologically and never collide silently.
"""

from __future__ import annotations

import datetime as _dt
import json
from pathlib import Path
from typing import Mapping

from .errors import FileMissing
from .fileio import sha256_file, write_text_atomic

MANIFEST_NAME = "run_manifest.json"


def resolve_run_dir(explicit: str | None, base: str | Path, config_hash: str) -> Path:
    """Use the explicit directory when given, else mint a timestamped one."""
    if explicit:
        return Path(explicit)
    stamp = _dt.datetime.now(_dt.timezone.utc).strftime("%Y%m%dT%H%M%SZ")
    return Path(base) / f"{stamp}-{config_hash[:8]}"


def load_manifest(run_dir: Path) -> dict:
    path = Path(run_dir) / MANIFEST_NAME
    if not path.exists():
        return {}
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def update_manifest(
    run_dir: Path,
    stage: str,
    files: Mapping[str, Path],
    counts: Mapping[str, int] | None = None,
    *,
    config_hash: str = "",
    tool_version: str = "",
) -> dict:
    """Record one stage's outputs (hashes relative to the run dir)."""
    run_dir = Path(run_dir)
    manifest = load_manifest(run_dir)
    if not manifest:
        manifest = {
            "run_id": run_dir.name,
            "created_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "tool_version": tool_version,
            "config_hash": config_hash,
            "stages": {},
        }
    hashed = {
        name: sha256_file(path) for name, path in sorted(files.items())
    }
    manifest["stages"][stage] = {"files": hashed}
    if counts:
        manifest["stages"][stage]["counts"] = dict(counts)
    write_text_atomic(
        run_dir / MANIFEST_NAME, json.dumps(manifest, ensure_ascii=False, indent=2) + "\n"
    )
    return manifest


def verify_run(run_dir: Path) -> list[str]:
    """Re-hash every manifest-listed file; returns problems (empty = clean).

    When several stages wrote the same file (sweep attach rewrites the state
    file that sweep plan created), the hash recorded by the latest stage is
    the one that counts.
    """
    run_dir = Path(run_dir)
    manifest_path = run_dir / MANIFEST_NAME
    if not manifest_path.exists():
        raise FileMissing(str(manifest_path))
    manifest = load_manifest(run_dir)
    expected: dict[str, tuple[str, str]] = {}
    for stage, info in manifest.get("stages", {}).items():
        for name, recorded in info.get("files", {}).items():
            expected[name] = (stage, recorded)
    problems: list[str] = []
    for name, (stage, recorded) in expected.items():
        path = run_dir / name
        if not path.exists():
            problems.append(f"{stage}: {name} is missing")
            continue
        actual = sha256_file(path)
        if actual != recorded:
            problems.append(
                f"{stage}: {name} hash {actual[:12]} != recorded {recorded[:12]}"
            )
    return problems
