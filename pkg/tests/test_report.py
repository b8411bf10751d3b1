"""Bundle emission: byte determinism, schema validity, index digests."""

import hashlib
import json

import jsonschema
import pytest

from trajcrit import measures, synth
from trajcrit.cli import RunConfig, run_pipeline
from trajcrit.errors import DataError
from trajcrit.report import ReportBundle, config_hash, emit, load_schema, sanitize


@pytest.fixture(scope="module")
def bundle():
    truth = synth.generate(synth.mixed_traffic(seed=31, duration=60.0))
    config = RunConfig(scenario="mixed_traffic", seed=31, out_dir="unused")
    return run_pipeline(truth.recording, None, config, None)


class TestEmission:
    def test_byte_identical_reruns(self, bundle, tmp_path):
        emit(bundle, tmp_path / "a")
        emit(bundle, tmp_path / "b")
        files_a = sorted((tmp_path / "a").glob("*.json"))
        files_b = sorted((tmp_path / "b").glob("*.json"))
        assert [f.name for f in files_a] == [f.name for f in files_b]
        for fa, fb in zip(files_a, files_b):
            assert fa.read_bytes() == fb.read_bytes()

    def test_index_lists_every_file_with_digest(self, bundle, tmp_path):
        index_path = emit(bundle, tmp_path)
        index = json.loads(index_path.read_text())
        files_on_disk = {p.name for p in tmp_path.glob("*.json")} - {"index.json"}
        assert {e["file"] for e in index["artifacts"]} == files_on_disk
        for entry in index["artifacts"]:
            digest = hashlib.sha256((tmp_path / entry["file"]).read_bytes()).hexdigest()
            assert digest == entry["sha256"]

    def test_empty_bundle_emits_index_only(self, tmp_path):
        index_path = emit(ReportBundle(), tmp_path)
        assert [p.name for p in tmp_path.glob("*.json")] == ["index.json"]
        index = json.loads(index_path.read_text())
        assert index["artifacts"] == []

    def test_duplicate_artifact_rejected(self):
        b = ReportBundle()
        b.add("x", "scalars", {})
        with pytest.raises(DataError):
            b.add("x", "scalars", {})

    def test_unknown_kind_rejected(self):
        with pytest.raises(DataError):
            ReportBundle().add("x", "nonsense", {})

    def test_nan_becomes_null(self, tmp_path):
        b = ReportBundle()
        b.add("x", "scalars", {"bad": float("nan"), "inf": float("inf")})
        emit(b, tmp_path)
        data = json.loads((tmp_path / "x.json").read_text())
        assert data["data"]["bad"] is None and data["data"]["inf"] is None


class TestSchemas:
    def test_every_artifact_validates(self, bundle, tmp_path):
        emit(bundle, tmp_path)
        kinds_seen = set()
        for path in tmp_path.glob("*.json"):
            if path.name == "index.json":
                schema = load_schema("index")
                jsonschema.validate(json.loads(path.read_text()), schema)
                continue
            artifact = json.loads(path.read_text())
            jsonschema.validate(artifact, load_schema(artifact["kind"]))
            kinds_seen.add(artifact["kind"])
        assert {"histogram", "slices", "fit", "risk_events", "rp_grid"} <= kinds_seen

    def test_bundle_covers_all_plot_kinds(self, bundle):
        kinds = {a["kind"] for a in bundle.artifacts.values()}
        assert {
            "histogram", "histogram2d", "fit", "slices", "fundamental",
            "lane_load", "context_bins", "occurrence_table",
        } <= kinds


class TestHashing:
    def test_config_hash_stable(self):
        assert config_hash({"a": 1}) == config_hash({"a": 1})
        assert config_hash({"a": 1}) != config_hash({"a": 2})

    def test_sanitize_numpy(self):
        import numpy as np

        out = sanitize({"a": np.float64(1.5), "b": np.int32(2),
                        "c": np.array([1.0, np.nan]), "d": np.bool_(True)})
        assert out == {"a": 1.5, "b": 2, "c": [1.0, None], "d": True}
