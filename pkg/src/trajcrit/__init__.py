"""Trajectory criticality and traffic-stream analytics for highD-format data."""

from .clean import CleanReport, RuleConfig, clean_recording
from .ingest import IngestReport, RawDatasetPaths, ingest_dataset
from .measures import MeasureSeries, RpParams, compute_all_series, compute_series
from .model import (
    FrameState,
    LaneLayout,
    LeaderGap,
    Recording,
    Track,
    leader_gap,
    normalize_direction,
    track_duration,
)
from .report import ReportBundle, emit
from .synth import ScenarioScript, generate, write_dataset

__version__ = "0.1.0"

__all__ = [
    "CleanReport",
    "FrameState",
    "IngestReport",
    "LaneLayout",
    "LeaderGap",
    "MeasureSeries",
    "RawDatasetPaths",
    "Recording",
    "ReportBundle",
    "RpParams",
    "RuleConfig",
    "ScenarioScript",
    "Track",
    "clean_recording",
    "compute_all_series",
    "compute_series",
    "emit",
    "generate",
    "ingest_dataset",
    "leader_gap",
    "normalize_direction",
    "track_duration",
    "write_dataset",
]
