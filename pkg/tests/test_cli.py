"""CLI surface: subcommands, exit codes, reproducibility, custom rulesets."""

import json

import pytest

from trajcrit.cli import main


def run(args):
    return main(args)


class TestSynthAndAll:
    def test_full_pipeline(self, tmp_path, capsys):
        data = tmp_path / "data"
        out = tmp_path / "out"
        assert run(["synth", "--scenario", "closing", "--out", str(data)]) == 0
        assert run(["all", "--data", str(data), "--out", str(out)]) == 0
        index = json.loads((out / "index.json").read_text())
        names = {e["name"] for e in index["artifacts"]}
        assert {"clean_report", "minute_slices", "occurrence_table",
                "rp_study", "thw_ttc_2d"} <= names
        assert (out / "risk_events.csv").exists()

    def test_reproducible_bundles(self, tmp_path):
        data = tmp_path / "data"
        run(["synth", "--scenario", "mixed_traffic", "--seed", "4",
             "--out", str(data)])
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert run(["all", "--data", str(data), "--out", str(out_a)]) == 0
        assert run(["all", "--data", str(data), "--out", str(out_b)]) == 0
        for path_a in sorted(out_a.glob("*.json")):
            path_b = out_b / path_a.name
            assert path_a.read_bytes() == path_b.read_bytes()

    def test_scenario_source_directly(self, tmp_path):
        out = tmp_path / "out"
        assert run(["macro", "--scenario", "constant_platoon",
                    "--out", str(out)]) == 0
        index = json.loads((out / "index.json").read_text())
        names = {e["name"] for e in index["artifacts"]}
        assert "minute_slices" in names and "fundamental_points" in names


class TestSubcommands:
    @pytest.fixture()
    def data_dir(self, tmp_path):
        data = tmp_path / "data"
        run(["synth", "--scenario", "closing", "--out", str(data)])
        return data

    def test_validate_prints_summary(self, data_dir, capsys):
        assert run(["validate", "--data", str(data_dir)]) == 0
        out = capsys.readouterr().out
        assert "tracks in" in out and "discarded" in out

    def test_stats_only(self, data_dir, tmp_path):
        out = tmp_path / "out"
        assert run(["stats", "--data", str(data_dir), "--out", str(out)]) == 0
        index = json.loads((out / "index.json").read_text())
        kinds = {e["kind"] for e in index["artifacts"]}
        assert "histogram" in kinds
        assert "slices" not in kinds

    def test_risk_with_custom_rules(self, data_dir, tmp_path):
        rules = tmp_path / "rules.json"
        rules.write_text(json.dumps({
            "triggers": [{
                "rule_id": "custom_low_ttc",
                "key_var": "ttc",
                "key_mode": "min",
                "conditions": [
                    {"var": "ttc", "min": 0.0, "min_open": True, "max": 9.0},
                ],
            }],
            "benmimoun": {
                "ttc_levels": [
                    {"level": 1, "threshold": 2.5, "companion": None},
                ],
            },
        }))
        out = tmp_path / "out"
        assert run(["risk", "--data", str(data_dir), "--out", str(out),
                    "--rules", str(rules)]) == 0
        events = json.loads((out / "risk_events.json").read_text())["data"]
        rule_ids = {e["rule_id"] for e in events}
        assert "custom_low_ttc" in rule_ids
        assert "benmimoun_ttc_l1" in rule_ids  # threshold raised to 2.5
        assert "cars100_ax" not in rule_ids  # default set replaced


class TestExitCodes:
    def test_missing_data_dir_is_data_error(self, tmp_path, capsys):
        assert run(["validate", "--data", str(tmp_path / "missing")]) == 1

    def test_both_sources_config_error(self, tmp_path):
        assert run(["all", "--data", str(tmp_path), "--scenario", "closing",
                    "--out", str(tmp_path / "o")]) == 2

    def test_no_source_config_error(self, tmp_path):
        assert run(["all", "--out", str(tmp_path / "o")]) == 2

    def test_out_equals_data_config_error(self, tmp_path):
        assert run(["all", "--data", str(tmp_path), "--out", str(tmp_path)]) == 2

    def test_unknown_flag_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            run(["all", "--bogus"])
        assert exc.value.code == 2

    def test_unknown_scenario_config_error(self, tmp_path):
        assert run(["synth", "--scenario", "warp", "--out", str(tmp_path)]) == 2

    def test_missing_out_config_error(self, tmp_path):
        data = tmp_path / "data"
        run(["synth", "--scenario", "closing", "--out", str(data)])
        assert run(["all", "--data", str(data)]) == 2


class TestConfigFile:
    def test_flags_override_file(self, tmp_path):
        data = tmp_path / "data"
        run(["synth", "--scenario", "closing", "--out", str(data)])
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"data": str(data), "out": str(tmp_path / "from_file")}))
        out = tmp_path / "flag_out"
        assert run(["macro", "--config", str(cfg), "--out", str(out)]) == 0
        assert (out / "index.json").exists()
        assert not (tmp_path / "from_file").exists()

    def test_config_file_supplies_source(self, tmp_path):
        data = tmp_path / "data"
        run(["synth", "--scenario", "closing", "--out", str(data)])
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"data": str(data)}))
        out = tmp_path / "out"
        assert run(["macro", "--config", str(cfg), "--out", str(out)]) == 0

    def test_bad_config_file(self, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text("not json")
        assert run(["macro", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


class TestJobs:
    def test_parallel_series_matches_serial(self, tmp_path):
        data = tmp_path / "data"
        run(["synth", "--scenario", "mixed_traffic", "--seed", "2",
             "--out", str(data)])
        out_serial = tmp_path / "serial"
        out_parallel = tmp_path / "parallel"
        assert run(["risk", "--data", str(data), "--out", str(out_serial),
                    "--jobs", "1"]) == 0
        assert run(["risk", "--data", str(data), "--out", str(out_parallel),
                    "--jobs", "2"]) == 0
        for path in sorted(out_serial.glob("*.json")):
            assert path.read_bytes() == (out_parallel / path.name).read_bytes()
