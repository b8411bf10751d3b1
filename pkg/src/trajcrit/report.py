"""Deterministic serialization of analysis products to a JSON bundle.

Every artifact becomes one JSON file plus an index listing names, kinds and
sha256 digests. Emission is byte-deterministic: sorted keys, no timestamps,
shortest-round-trip float formatting, NaN/inf mapped to null.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .errors import DataError

TOOL_NAME = "trajcrit"
TOOL_VERSION = "0.1.0"

ARTIFACT_KINDS = frozenset({
    "histogram", "histogram2d", "fit", "slices", "fundamental", "lane_load",
    "lane_change_rates", "occurrence_table", "risk_events", "context_bins",
    "undercut", "ttc6", "rp_grid", "clean_report", "ingest_report", "scalars",
})


def sanitize(value: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats for JSON emission."""
    if isinstance(value, dict):
        return {str(k): sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [sanitize(v) for v in value]
    if isinstance(value, np.ndarray):
        return [sanitize(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        value = float(value)
    if isinstance(value, float) and not np.isfinite(value):
        return None
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


@dataclass
class ReportBundle:
    config_hash: str = ""
    input_digest: str = ""
    artifacts: dict[str, dict] = field(default_factory=dict)

    def add(self, name: str, kind: str, data: Any) -> None:
        if kind not in ARTIFACT_KINDS:
            raise DataError(f"unknown artifact kind {kind!r}")
        if name in self.artifacts:
            raise DataError(f"duplicate artifact name {name!r}")
        self.artifacts[name] = {"name": name, "kind": kind, "data": sanitize(data)}

    @property
    def manifest(self) -> dict:
        return {
            "tool": TOOL_NAME,
            "version": TOOL_VERSION,
            "config_hash": self.config_hash,
            "input_digest": self.input_digest,
        }


def _dump(obj: Any) -> bytes:
    return (
        json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"
    ).encode("utf-8")


def emit(bundle: ReportBundle, out_dir: str | Path) -> Path:
    """Write one JSON file per artifact plus index.json; returns the index path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for name in sorted(bundle.artifacts):
        artifact = bundle.artifacts[name]
        payload = _dump(artifact)
        file_name = f"{name}.json"
        (out_dir / file_name).write_bytes(payload)
        entries.append({
            "name": name,
            "kind": artifact["kind"],
            "file": file_name,
            "sha256": hashlib.sha256(payload).hexdigest(),
        })
    index = {"manifest": bundle.manifest, "artifacts": entries}
    index_path = out_dir / "index.json"
    index_path.write_bytes(_dump(index))
    return index_path


def config_hash(config: Any) -> str:
    return hashlib.sha256(_dump(sanitize(config))).hexdigest()


def digest_files(paths: list[Path]) -> str:
    h = hashlib.sha256()
    for path in sorted(paths):
        h.update(Path(path).name.encode())
        h.update(Path(path).read_bytes())
    return h.hexdigest()


def load_schema(kind: str) -> dict:
    ref = resources.files("trajcrit.schemas").joinpath(f"{kind}.schema.json")
    return json.loads(ref.read_text())


def validate_artifact(artifact: dict) -> None:
    """Schema-validate one artifact dict (requires jsonschema)."""
    import jsonschema

    schema = load_schema(artifact["kind"])
    jsonschema.validate(artifact, schema)
