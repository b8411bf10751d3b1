"""Command-line front end: ingest -> clean -> analyses -> report bundle.

Subcommands: validate, stats, macro, risk, synth, all. Exit codes: 0 on
success, 1 on data errors, 2 on configuration errors (argparse uses 2 for
unknown flags on its own).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import clean as clean_mod
from . import ingest as ingest_mod
from . import macro as macro_mod
from . import measures as measures_mod
from . import report as report_mod
from . import risk as risk_mod
from . import stats as stats_mod
from . import synth as synth_mod
from .errors import ConfigError, DataError, TrajcritError

KMH = 3.6


@dataclass
class RunConfig:
    data_dir: Optional[str] = None
    scenario: Optional[str] = None
    seed: int = 0
    out_dir: Optional[str] = None
    analyses: tuple[str, ...] = ("stats", "macro", "risk")
    rules_path: Optional[str] = None
    layout_path: Optional[str] = None
    segment_length: Optional[float] = None
    jobs: int = 0  # 0 -> machine parallelism
    thw_bounds: tuple[float, ...] = risk_mod.DEFAULT_THW_BOUNDS
    ttc_bounds: tuple[float, ...] = risk_mod.DEFAULT_TTC_BOUNDS

    def validate(self) -> None:
        if (self.data_dir is None) == (self.scenario is None):
            raise ConfigError("exactly one input source (--data or --scenario) required")
        if self.out_dir is not None and self.data_dir is not None:
            if Path(self.out_dir).resolve() == Path(self.data_dir).resolve():
                raise ConfigError("output dir must be distinct from the input dir")

    def to_dict(self) -> dict:
        return {
            "data_dir": self.data_dir,
            "scenario": self.scenario,
            "seed": self.seed,
            "analyses": list(self.analyses),
            "rules_path": self.rules_path,
            "layout_path": self.layout_path,
            "segment_length": self.segment_length,
            "thw_bounds": list(self.thw_bounds),
            "ttc_bounds": list(self.ttc_bounds),
        }


def load_config_file(path: str | Path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError as err:
        raise ConfigError(f"config file not found: {path}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"config file {path} is not valid JSON: {err}") from err
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return data


def _refresh_minima(
    recording, series: dict[int, measures_mod.MeasureSeries]
):
    tracks = []
    for track in recording.tracks:
        minima = measures_mod.track_minima(series[track.track_id])
        tracks.append(replace(
            track,
            min_thw=minima.min_thw,
            min_ttc=minima.min_ttc,
            min_dhw=minima.min_dhw,
        ))
    return replace(recording, tracks=tuple(tracks))


def _stats_artifacts(bundle, recording, series) -> None:
    tracks = recording.tracks
    spec_v = stats_mod.HistogramSpec(0.0, 250.0, 50)
    for name, reducer in (
        ("velocity_track_min", np.min),
        ("velocity_track_mean", np.mean),
        ("velocity_track_max", np.max),
    ):
        values = [float(reducer(t.v_x)) * KMH for t in tracks]
        hist = stats_mod.histogram(values, spec_v)
        bundle.add(name, "histogram", hist.to_dict() | {"unit": "km/h"})
    for cls in ("car", "truck"):
        values = np.concatenate(
            [t.v_x for t in tracks if t.vehicle_class == cls] or [np.array([])]
        ) * KMH
        hist = stats_mod.histogram(values, spec_v)
        bundle.add(f"velocity_frames_{cls}", "histogram", hist.to_dict() | {"unit": "km/h"})

    def accel_block(name: str, values: np.ndarray, spec) -> None:
        hist = stats_mod.histogram(values, spec)
        payload = hist.to_dict() | {"unit": "m/s^2"}
        if values.size >= 10 and float(np.std(values)) > 0:
            fit = stats_mod.fit_logistic(values)
            bundle.add(f"fit_{name}", "fit", fit.to_dict())
            payload["fit"] = f"fit_{name}"
        bundle.add(name, "histogram", payload)

    spec_ax = stats_mod.HistogramSpec(-8.0, 8.0, 160)
    spec_ay = stats_mod.HistogramSpec(-4.0, 4.0, 160)
    all_ax = np.concatenate([t.a_x for t in tracks] or [np.array([])])
    all_ay = np.concatenate([t.a_y for t in tracks] or [np.array([])])
    accel_block("accel_x_all", all_ax, spec_ax)
    accel_block("accel_y_all", all_ay, spec_ay)
    for cls in ("car", "truck"):
        sel = [t for t in tracks if t.vehicle_class == cls]
        if not sel:
            continue
        accel_block(f"accel_x_{cls}", np.concatenate([t.a_x for t in sel]), spec_ax)
        accel_block(f"accel_y_{cls}", np.concatenate([t.a_y for t in sel]), spec_ay)

    def minima_block(name: str, values: list[float], spec) -> None:
        arr = np.asarray(values, dtype=float)
        hist = stats_mod.histogram(arr, spec)
        payload = hist.to_dict() | {"unit": "s" if "ttc" in name or "thw" in name else "m"}
        if arr.size >= 50 and float(np.std(arr)) > 0:
            fit = stats_mod.fit_gev(arr)
            bundle.add(f"fit_{name}", "fit", fit.to_dict())
            payload["fit"] = f"fit_{name}"
        bundle.add(name, "histogram", payload)

    minima_block(
        "ttc_min",
        [t.min_ttc for t in tracks if t.min_ttc is not None],
        stats_mod.HistogramSpec(0.0, 200.0, 100),
    )
    minima_block(
        "thw_min",
        [t.min_thw for t in tracks if t.min_thw is not None],
        stats_mod.HistogramSpec(0.0, 10.0, 100),
    )
    minima_block(
        "dhw_min",
        [t.min_dhw for t in tracks if t.min_dhw is not None],
        stats_mod.HistogramSpec(0.0, 300.0, 100),
    )

    thw_all = np.concatenate([series[t.track_id].thw for t in tracks] or [np.array([])])
    ttc_all = np.concatenate([series[t.track_id].ttc for t in tracks] or [np.array([])])
    both = np.isfinite(thw_all) & np.isfinite(ttc_all)
    h2 = stats_mod.histogram2d(
        thw_all[both], ttc_all[both],
        stats_mod.HistogramSpec(0.0, 5.0, 50),
        stats_mod.HistogramSpec(-100.0, 100.0, 80),
    )
    bundle.add(
        "thw_ttc_2d", "histogram2d",
        h2.to_dict() | {"x_label": "THW [s]", "y_label": "TTC [s]"},
    )


def _macro_artifacts(bundle, recording, series) -> None:
    lane_changes = macro_mod.all_lane_changes(recording)
    slices = macro_mod.minute_slices(recording, series, lane_changes)
    bundle.add("minute_slices", "slices", [s.to_dict() for s in slices])
    bundle.add("fundamental_points", "fundamental", macro_mod.fundamental_points(slices))
    bundle.add("lane_load", "lane_load", macro_mod.lane_load(recording))

    rates = macro_mod.lane_change_rate(slices, recording)
    fits: dict[str, Optional[dict]] = {"fit_vs_q": None, "fit_vs_rho": None}
    for key, x_attr in (("fit_vs_q", "q_veh_h"), ("fit_vs_rho", "rho_veh_km")):
        points = [(p[x_attr], p["rate_per_lane_h_km"]) for p in rates]
        if len(points) >= 3 and any(y > 0 for _, y in points):
            try:
                fits[key] = macro_mod.triangular_fit(points).to_dict()
            except DataError:
                pass
    bundle.add(
        "lane_change_rates", "lane_change_rates",
        {"points": rates, "fit_vs_q": fits["fit_vs_q"], "fit_vs_rho": fits["fit_vs_rho"]},
    )

    scalars: dict[str, float] = {}
    q = [s.q_veh_h for s in slices if s.thw_mean_car is not None]
    thw = [s.thw_mean_car for s in slices if s.thw_mean_car is not None]
    try:
        if len(q) >= 2:
            scalars["pearson_q_thw_car"] = stats_mod.pearson(q, thw)
    except TrajcritError:
        pass
    rho = [s.rho_veh_km for s in slices if s.v_mean_space_kmh is not None]
    v = [s.v_mean_space_kmh for s in slices if s.v_mean_space_kmh is not None]
    try:
        if len(rho) >= 2:
            scalars["pearson_rho_v"] = stats_mod.pearson(rho, v)
    except TrajcritError:
        pass
    bundle.add("macro_scalars", "scalars", scalars)


def _risk_artifacts(bundle, recording, series, rules: dict, out_dir: Optional[Path]) -> None:
    tracks = recording.tracks
    fr = recording.frame_rate
    lane_changes = macro_mod.all_lane_changes(recording)
    bundle.add(
        "occurrence_table", "occurrence_table",
        risk_mod.count_threshold_occurrences(tracks).to_dict(),
    )

    benmimoun_cfg = rules.get("benmimoun", risk_mod.BenmimounConfig())
    trigger_rules = rules.get("triggers", risk_mod.CARS100_RULES)
    events: list[risk_mod.RiskEvent] = []
    for track in tracks:
        ser = series[track.track_id]
        events.extend(
            risk_mod.classify_benmimoun(track, ser, lane_changes, fr, benmimoun_cfg)
        )
        events.extend(
            risk_mod.eval_cars100_triggers(track, ser, lane_changes, fr, trigger_rules)
        )
    events.sort(key=lambda e: (e.track_id, e.rule_id))
    bundle.add("risk_events", "risk_events", [e.to_dict() for e in events])
    if out_dir is not None:
        risk_mod.export_events_csv(events, out_dir / "risk_events.csv")

    for measure in ("thw", "ttc"):
        evs = risk_mod.minima_events(tracks, series, measure, fr)
        for dimension in ("velocity", "a_x", "a_y"):
            table = risk_mod.context_bins(evs, dimension, measure)
            bundle.add(
                f"context_{measure}_{dimension}", "context_bins", table.to_dict()
            )

    bundle.add(
        "thw_undercut", "undercut",
        risk_mod.thw_undercut_durations(tracks, series, fr).to_dict(),
    )
    bundle.add("ttc6_braking", "ttc6",
               risk_mod.ttc6_brake_analysis(tracks, series, fr).to_dict())
    bundle.add(
        "rp_study", "rp_grid",
        risk_mod.rp_study(tracks, series, lane_changes, fr).to_dict(),
    )


def run_pipeline(
    recording,
    ingest_report: Optional[ingest_mod.IngestReport],
    config: RunConfig,
    out_dir: Optional[Path],
) -> report_mod.ReportBundle:
    cleaned, clean_report = clean_mod.clean_recording(recording)
    jobs = config.jobs if config.jobs > 0 else (os.cpu_count() or 1)
    series = measures_mod.compute_all_series(cleaned.tracks, jobs=jobs)
    cleaned = _refresh_minima(cleaned, series)

    bundle = report_mod.ReportBundle(config_hash=report_mod.config_hash(config.to_dict()))
    bundle.add("clean_report", "clean_report", clean_report.to_dict())
    if ingest_report is not None:
        bundle.add("ingest_report", "ingest_report", ingest_report.to_dict())

    rules: dict = {}
    if config.rules_path:
        rules = risk_mod.load_ruleset(config.rules_path)

    if "stats" in config.analyses:
        _stats_artifacts(bundle, cleaned, series)
    if "macro" in config.analyses:
        _macro_artifacts(bundle, cleaned, series)
    if "risk" in config.analyses:
        _risk_artifacts(bundle, cleaned, series, rules, out_dir)
    return bundle


def _load_recording(config: RunConfig):
    if config.scenario is not None:
        if config.scenario not in synth_mod.SCENARIO_KINDS:
            raise ConfigError(
                f"unknown scenario {config.scenario!r}; "
                f"choose from {sorted(synth_mod.SCENARIO_KINDS)}"
            )
        constructor = synth_mod.SCENARIO_KINDS[config.scenario]
        kwargs = {"seed": config.seed} if config.scenario == "mixed_traffic" else {}
        truth = synth_mod.generate(constructor(**kwargs))
        return truth.recording, None, f"synth:{config.scenario}:{config.seed}"
    paths = ingest_mod.RawDatasetPaths.discover(config.data_dir)
    recording, ingest_report = ingest_mod.ingest_dataset(
        paths,
        layout_config=config.layout_path,
        segment_length=config.segment_length,
    )
    digest_inputs = [paths.recording_meta_path, paths.tracks_meta_path, paths.tracks_path]
    sidecar = paths.recording_meta_path.with_name(f"{paths.prefix}_layout.json")
    if sidecar.is_file():
        digest_inputs.append(sidecar)
    return recording, ingest_report, report_mod.digest_files(digest_inputs)


def _cmd_analysis(config: RunConfig, analyses: tuple[str, ...]) -> int:
    config = replace(config, analyses=analyses)
    config.validate()
    if config.out_dir is None:
        raise ConfigError("--out is required")
    recording, ingest_report, digest = _load_recording(config)
    out_dir = Path(config.out_dir)
    bundle = run_pipeline(recording, ingest_report, config, out_dir)
    bundle.input_digest = (
        digest if isinstance(digest, str) and not digest.startswith("synth:")
        else report_mod.config_hash(digest)
    )
    index = report_mod.emit(bundle, out_dir)
    print(f"wrote {len(bundle.artifacts)} artifacts to {index.parent}")
    return 0


def _cmd_validate(config: RunConfig) -> int:
    config.validate()
    recording, ingest_report, _ = _load_recording(config)
    cleaned, clean_report = clean_mod.clean_recording(recording)
    print(f"recording {recording.recording_id}: "
          f"{clean_report.tracks_in} tracks in, {clean_report.tracks_out} kept, "
          f"{len(clean_report.discarded)} discarded, "
          f"{clean_report.frames_trimmed} last frames trimmed, "
          f"{clean_report.vehicles_without_leader} without leader, "
          f"{len(clean_report.flagged)} flagged for review")
    for d in clean_report.discarded:
        print(f"  discard {d.track_id}: {d.rule_id} ({d.evidence})")
    if ingest_report is not None and ingest_report.meta_mismatches:
        print(f"  {len(ingest_report.meta_mismatches)} meta minima mismatches")
    if config.out_dir:
        out_dir = Path(config.out_dir)
        bundle = report_mod.ReportBundle(
            config_hash=report_mod.config_hash(config.to_dict())
        )
        bundle.add("clean_report", "clean_report", clean_report.to_dict())
        if ingest_report is not None:
            bundle.add("ingest_report", "ingest_report", ingest_report.to_dict())
        report_mod.emit(bundle, out_dir)
        clean_mod.export_flagged(clean_report, recording.recording_id, out_dir)
    return 0


def _cmd_synth(config: RunConfig) -> int:
    if config.scenario is None:
        raise ConfigError("synth needs --scenario")
    if config.out_dir is None:
        raise ConfigError("synth needs --out")
    if config.scenario not in synth_mod.SCENARIO_KINDS:
        raise ConfigError(
            f"unknown scenario {config.scenario!r}; "
            f"choose from {sorted(synth_mod.SCENARIO_KINDS)}"
        )
    constructor = synth_mod.SCENARIO_KINDS[config.scenario]
    kwargs = {"seed": config.seed} if config.scenario == "mixed_traffic" else {}
    truth = synth_mod.generate(constructor(**kwargs))
    paths = synth_mod.write_dataset(truth.recording, config.out_dir)
    print(f"wrote {paths.tracks_path.parent}/{paths.prefix}_*.csv "
          f"({len(truth.recording.tracks)} tracks)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trajcrit",
        description="Trajectory criticality and traffic-stream analytics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--data", help="dataset directory with the CSV triple")
        p.add_argument("--scenario", help="synthetic scenario kind instead of --data")
        p.add_argument("--seed", type=int, default=0, help="scenario seed")
        p.add_argument("--out", help="output directory for the report bundle")
        p.add_argument("--rules", help="custom ruleset JSON path")
        p.add_argument("--layout", help="lane layout override JSON path")
        p.add_argument("--segment-length", type=float, default=None)
        p.add_argument("--jobs", type=int, default=0,
                       help="worker processes (default: machine parallelism)")
        p.add_argument("--config", help="JSON config file; flags override its values")

    for name, help_text in (
        ("validate", "ingest + clean, print the cleaning report"),
        ("stats", "distribution histograms and fits"),
        ("macro", "minute slices, lane loads, lane changes, fundamental diagrams"),
        ("risk", "criticality classifiers and studies"),
        ("all", "every analysis into one bundle"),
        ("synth", "generate a synthetic dataset"),
    ):
        p = sub.add_parser(name, help=help_text)
        common(p)
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    file_values: dict = {}
    if args.config:
        file_values = load_config_file(args.config)

    def pick(flag_value, key, default):
        if flag_value not in (None, 0) and flag_value != default:
            return flag_value
        return file_values.get(key, flag_value if flag_value is not None else default)

    config = RunConfig(
        data_dir=args.data or file_values.get("data"),
        scenario=args.scenario or file_values.get("scenario"),
        seed=pick(args.seed, "seed", 0),
        out_dir=args.out or file_values.get("out"),
        rules_path=args.rules or file_values.get("rules"),
        layout_path=args.layout or file_values.get("layout"),
        segment_length=(
            args.segment_length
            if args.segment_length is not None
            else file_values.get("segment_length")
        ),
        jobs=pick(args.jobs, "jobs", 0),
    )
    if "thw_bounds" in file_values:
        config = replace(config, thw_bounds=tuple(file_values["thw_bounds"]))
    if "ttc_bounds" in file_values:
        config = replace(config, ttc_bounds=tuple(file_values["ttc_bounds"]))
    return config


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _config_from_args(args)
        if args.command == "validate":
            return _cmd_validate(config)
        if args.command == "synth":
            return _cmd_synth(config)
        if args.command == "stats":
            return _cmd_analysis(config, ("stats",))
        if args.command == "macro":
            return _cmd_analysis(config, ("macro",))
        if args.command == "risk":
            return _cmd_analysis(config, ("risk",))
        return _cmd_analysis(config, ("stats", "macro", "risk"))
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except TrajcritError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
