"""Parse highD-format CSV triples into the canonical model.

The three files per recording share a numeric prefix:
  {NN}_recordingMeta.csv, {NN}_tracksMeta.csv, {NN}_tracks.csv

Raw coordinate conventions (public dataset layout): x/y is the bounding-box
corner, the upper road travels in decreasing x, neighbor/measure columns use
0 as the "absent" sentinel, and speedLimit is m/s with -1 for unlimited.
The canonical model stores front-bumper positions with driving direction =
+x: lower road x_front = x_raw + length, upper road x_front = -x_raw, with
v_x/a_x mirrored for the upper road.

Lane IDs and roles come from a static table keyed by locationId (locations
1-6); novel locations need a layout override, either passed explicitly or
read from an optional JSON sidecar {NN}_layout.json that may also pin the
exact segment length.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
import pandas as pd

from . import measures
from .errors import DataError, LayoutError, SchemaError
from .model import Direction, LaneLayout, Recording, Track, VehicleClass

RECORDING_META_COLUMNS = [
    "id", "frameRate", "locationId", "speedLimit", "month", "weekDay",
    "startTime", "duration", "totalDrivenDistance", "totalDrivenTime",
    "numVehicles", "numCars", "numTrucks", "upperLaneMarkings",
    "lowerLaneMarkings",
]

TRACKS_META_COLUMNS = [
    "id", "width", "height", "initialFrame", "finalFrame", "numFrames",
    "class", "drivingDirection", "traveledDistance", "minXVelocity",
    "maxXVelocity", "meanXVelocity", "minDHW", "minTHW", "minTTC",
    "numLaneChanges",
]

TRACKS_COLUMNS = [
    "frame", "id", "x", "y", "width", "height", "xVelocity", "yVelocity",
    "xAcceleration", "yAcceleration", "frontSightDistance",
    "backSightDistance", "dhw", "thw", "ttc", "precedingXVelocity",
    "precedingId", "followingId", "leftPrecedingId", "leftAlongsideId",
    "leftFollowingId", "rightPrecedingId", "rightAlongsideId",
    "rightFollowingId", "laneId",
]

# Lane IDs per location, ordered rightmost to leftmost per direction. The
# upper road's emergency lane always has ID 1; the lower road's emergency
# lane carries no ID. Location 6 has an acceleration lane (ID 2, upper).
BUILTIN_LANE_TABLE: dict[int, dict[str, list[tuple[int, str]]]] = {
    1: {"upper": [(1, "emergency"), (2, "right"), (3, "middle"), (4, "left")],
        "lower": [(8, "right"), (7, "middle"), (6, "left")]},
    2: {"upper": [(1, "emergency"), (2, "right"), (3, "left")],
        "lower": [(6, "right"), (5, "left")]},
    3: {"upper": [(1, "emergency"), (2, "right"), (3, "middle"), (4, "left")],
        "lower": [(8, "right"), (7, "middle"), (6, "left")]},
    4: {"upper": [(1, "emergency"), (2, "right"), (3, "middle"), (4, "left")],
        "lower": [(8, "right"), (7, "middle"), (6, "left")]},
    5: {"upper": [(1, "emergency"), (2, "right"), (3, "left")],
        "lower": [(6, "right"), (5, "left")]},
    6: {"upper": [(1, "emergency"), (2, "acceleration"), (3, "right"),
                  (4, "middle"), (5, "left")],
        "lower": [(9, "right"), (8, "middle"), (7, "left")]},
}

# Posted limits per location (km/h); None = unlimited.
LOCATION_SPEED_LIMITS: dict[int, Optional[float]] = {
    1: 120.0, 2: None, 3: 130.0, 4: None, 5: None, 6: None,
}

# Tolerances for comparing recomputed minima against tracksMeta columns.
META_TOL_TIME = 0.05  # s, THW and TTC
META_TOL_DIST = 0.5  # m, DHW

CHUNK_ROWS = 200_000

NEIGHBOR_COLUMNS = {
    "leader_ids": "precedingId",
    "follower_ids": "followingId",
    "left_preceding_ids": "leftPrecedingId",
    "left_alongside_ids": "leftAlongsideId",
    "left_following_ids": "leftFollowingId",
    "right_preceding_ids": "rightPrecedingId",
    "right_alongside_ids": "rightAlongsideId",
    "right_following_ids": "rightFollowingId",
}


@dataclass(frozen=True)
class RawDatasetPaths:
    recording_meta_path: Path
    tracks_meta_path: Path
    tracks_path: Path

    def __post_init__(self) -> None:
        for p in (self.recording_meta_path, self.tracks_meta_path, self.tracks_path):
            if not Path(p).is_file():
                raise DataError(f"missing input file: {p}")
        prefixes = {
            re.match(r"(\d+)_", Path(p).name).group(1)
            if re.match(r"(\d+)_", Path(p).name) else None
            for p in (self.recording_meta_path, self.tracks_meta_path, self.tracks_path)
        }
        if len(prefixes) != 1 or None in prefixes:
            raise DataError(
                "the three dataset files must share a numeric recording prefix"
            )

    @property
    def prefix(self) -> str:
        return re.match(r"(\d+)_", self.recording_meta_path.name).group(1)

    @classmethod
    def discover(cls, directory: str | Path) -> "RawDatasetPaths":
        directory = Path(directory)
        metas = sorted(directory.glob("*_recordingMeta.csv"))
        if not metas:
            raise DataError(f"no *_recordingMeta.csv found in {directory}")
        meta = metas[0]
        prefix = meta.name.split("_")[0]
        return cls(
            recording_meta_path=meta,
            tracks_meta_path=directory / f"{prefix}_tracksMeta.csv",
            tracks_path=directory / f"{prefix}_tracks.csv",
        )


@dataclass(frozen=True)
class MetaMismatch:
    track_id: int
    column: str
    meta_value: Optional[float]
    recomputed: Optional[float]
    delta: Optional[float]


@dataclass
class IngestReport:
    rows_read: int = 0
    rows_accepted: int = 0
    rows_rejected: int = 0
    tracks_built: int = 0
    rejection_reasons: list[str] = field(default_factory=list)
    meta_mismatches: list[MetaMismatch] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "rows_accepted": self.rows_accepted,
            "rows_rejected": self.rows_rejected,
            "tracks_built": self.tracks_built,
            "rejection_reasons": list(self.rejection_reasons),
            "meta_mismatches": [
                {
                    "track_id": m.track_id, "column": m.column,
                    "meta_value": m.meta_value, "recomputed": m.recomputed,
                    "delta": m.delta,
                }
                for m in self.meta_mismatches
            ],
        }


@dataclass(frozen=True)
class RecordingHeader:
    recording_id: int
    frame_rate: float
    location_id: int
    speed_limit: Optional[float]  # km/h
    duration: float
    lane_layout: LaneLayout
    segment_length: Optional[float]  # None -> derive from observed extent


@dataclass(frozen=True)
class TrackMeta:
    track_id: int
    vehicle_length: float
    vehicle_width: float
    initial_frame: int
    final_frame: int
    num_frames: int
    vehicle_class: VehicleClass
    driving_direction: Direction
    min_dhw: Optional[float]
    min_thw: Optional[float]
    min_ttc: Optional[float]
    num_lane_changes: int


def _require_columns(df: pd.DataFrame, required: Iterable[str], path: Path) -> None:
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise SchemaError(f"{path.name}: missing column(s) {missing}")


def _layout_from_table(
    location_id: int, overrides: Optional[dict] = None
) -> tuple[LaneLayout, Optional[float]]:
    table = BUILTIN_LANE_TABLE.get(location_id)
    limit = LOCATION_SPEED_LIMITS.get(location_id)
    if overrides and str(location_id) in overrides:
        entry = overrides[str(location_id)]
        table = {
            "upper": [tuple(item) for item in entry.get("upper", [])],
            "lower": [tuple(item) for item in entry.get("lower", [])],
        }
        limit = entry.get("speed_limit", limit)
    if table is None:
        raise LayoutError(
            f"unknown locationId {location_id}; provide a layout override"
        )
    layout = LaneLayout(
        upper=tuple((int(i), str(r)) for i, r in table["upper"]),
        lower=tuple((int(i), str(r)) for i, r in table["lower"]),
    )
    return layout, limit


def load_layout_config(path: str | Path) -> dict:
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise LayoutError(f"{path}: layout config must be a JSON object")
    return data


def parse_recording_meta(
    path: str | Path, layout_config: Optional[dict] = None
) -> RecordingHeader:
    """Read the recording header and derive the lane layout for its location."""
    path = Path(path)
    df = pd.read_csv(path, float_precision="round_trip")
    _require_columns(df, RECORDING_META_COLUMNS, path)
    if len(df) != 1:
        raise SchemaError(f"{path.name}: expected exactly one row, got {len(df)}")
    row = df.iloc[0]
    location_id = int(row["locationId"])
    layout, _table_limit = _layout_from_table(location_id, layout_config)

    raw_limit = float(row["speedLimit"])
    speed_limit = None if raw_limit < 0 else raw_limit * 3.6
    if layout_config:
        entry = layout_config.get(str(location_id))
        if entry and "speed_limit_kmh" in entry:
            value = entry["speed_limit_kmh"]
            speed_limit = None if value is None else float(value)

    segment_length = None
    if layout_config and "segment_length" in layout_config:
        segment_length = float(layout_config["segment_length"])

    return RecordingHeader(
        recording_id=int(row["id"]),
        frame_rate=float(row["frameRate"]),
        location_id=location_id,
        speed_limit=speed_limit,
        duration=float(row["duration"]),
        lane_layout=layout,
        segment_length=segment_length,
    )


def parse_tracks_meta(path: str | Path, report: Optional[IngestReport] = None) -> dict[int, TrackMeta]:
    """One record per track id; sentinel (<= 0) minima map to absent."""
    path = Path(path)
    df = pd.read_csv(path, float_precision="round_trip")
    _require_columns(df, TRACKS_META_COLUMNS, path)
    ids = df["id"].to_numpy()
    if len(np.unique(ids)) != len(ids):
        dupes = pd.Series(ids)[pd.Series(ids).duplicated()].tolist()
        raise SchemaError(f"{path.name}: duplicate track id(s) {sorted(set(dupes))}")

    out: dict[int, TrackMeta] = {}
    for row in df.itertuples(index=False):
        if int(row.numFrames) <= 0:
            if report is not None:
                report.rejection_reasons.append(
                    f"tracksMeta id {int(row.id)}: numFrames={int(row.numFrames)}"
                )
            continue
        cls = str(row[df.columns.get_loc("class")]).strip().lower()
        if cls not in ("car", "truck"):
            raise SchemaError(f"{path.name}: unknown vehicle class {cls!r}")
        direction: Direction = "upper" if int(row.drivingDirection) == 1 else "lower"

        def sentinel(v: float) -> Optional[float]:
            v = float(v)
            return v if np.isfinite(v) and v > 0 else None

        out[int(row.id)] = TrackMeta(
            track_id=int(row.id),
            vehicle_length=float(row.width),
            vehicle_width=float(row.height),
            initial_frame=int(row.initialFrame),
            final_frame=int(row.finalFrame),
            num_frames=int(row.numFrames),
            vehicle_class=cls,
            driving_direction=direction,
            min_dhw=sentinel(row.minDHW),
            min_thw=sentinel(row.minTHW),
            min_ttc=sentinel(row.minTTC),
            num_lane_changes=int(row.numLaneChanges),
        )
    return out


def _find_bad_cell(path: Path, err: Exception) -> SchemaError:
    """Slow-path rescan to report a row error with its line number."""
    import csv as _csv

    with open(path, newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader, [])
        numeric = [i for i, name in enumerate(header) if name in TRACKS_COLUMNS]
        for lineno, row in enumerate(reader, start=2):
            for i in numeric:
                if i < len(row):
                    try:
                        float(row[i])
                    except ValueError:
                        return SchemaError(
                            f"{path.name}: non-numeric value {row[i]!r} in column "
                            f"{header[i]!r} at line {lineno}"
                        )
    return SchemaError(f"{path.name}: {err}")


def _build_track(
    meta: TrackMeta,
    frames: np.ndarray,
    cols: dict[str, np.ndarray],
) -> Track:
    """Raw arrays -> canonical track (front-bumper x, direction-normalized)."""
    length = meta.vehicle_length
    if meta.driving_direction == "lower":
        x = cols["x"] + length
        v_x, a_x = cols["xVelocity"], cols["xAcceleration"]
    else:
        x = -cols["x"]
        v_x, a_x = -cols["xVelocity"], -cols["xAcceleration"]

    def raw_measure(name: str) -> np.ndarray:
        arr = cols[name].astype(float)
        return np.where(arr == 0, np.nan, arr)

    return Track(
        track_id=meta.track_id,
        vehicle_class=meta.vehicle_class,
        vehicle_length=length,
        vehicle_width=meta.vehicle_width,
        driving_direction=meta.driving_direction,
        frame_index=frames.astype(np.int64),
        x=x,
        y=cols["y"],
        v_x=v_x,
        v_y=cols["yVelocity"],
        a_x=a_x,
        a_y=cols["yAcceleration"],
        lane_ids=cols["laneId"].astype(np.int64),
        dhw_raw=raw_measure("dhw"),
        thw_raw=raw_measure("thw"),
        ttc_raw=raw_measure("ttc"),
        normalized=True,
        **{
            field_name: cols[col_name].astype(np.int64)
            for field_name, col_name in NEIGHBOR_COLUMNS.items()
        },
    )


def parse_tracks(
    path: str | Path,
    meta: dict[int, TrackMeta],
    report: Optional[IngestReport] = None,
) -> list[Track]:
    """Stream the per-frame file in chunks and assemble canonical tracks.

    Rows are expected grouped (or at least groupable) by id with contiguous
    frames per id; a track with non-contiguous frames is rejected with a
    reason, not an error.
    """
    path = Path(path)
    report = report if report is not None else IngestReport()

    header = pd.read_csv(path, nrows=0)
    _require_columns(header, TRACKS_COLUMNS, path)

    pending: dict[int, list[pd.DataFrame]] = {}
    closed: set[int] = set()
    tracks: list[Track] = []

    def finalize(track_id: int) -> None:
        parts = pending.pop(track_id)
        closed.add(track_id)
        df = pd.concat(parts, ignore_index=True) if len(parts) > 1 else parts[0]
        frames = df["frame"].to_numpy(dtype=np.int64)
        n = len(frames)
        tm = meta.get(track_id)
        if tm is None:
            report.rows_rejected += n
            report.rejection_reasons.append(
                f"track {track_id}: no tracksMeta record"
            )
            return
        order = np.argsort(frames, kind="stable")
        frames = frames[order]
        if n > 1 and not np.all(np.diff(frames) == 1):
            report.rows_rejected += n
            report.rejection_reasons.append(
                f"track {track_id}: non-contiguous frame indices"
            )
            return
        cols = {
            c: df[c].to_numpy(dtype=float)[order]
            for c in TRACKS_COLUMNS
            if c not in ("frame", "id")
        }
        tracks.append(_build_track(tm, frames, cols))
        report.rows_accepted += n

    rejected_reappeared: set[int] = set()
    try:
        reader = pd.read_csv(
            path,
            chunksize=CHUNK_ROWS,
            float_precision="round_trip",
            dtype={c: np.float64 for c in TRACKS_COLUMNS if c not in ("frame", "id", "laneId")}
            | {"frame": np.int64, "id": np.int64, "laneId": np.int64},
        )
        for chunk in reader:
            report.rows_read += len(chunk)
            chunk_ids = set()
            for track_id, group in chunk.groupby("id", sort=False):
                track_id = int(track_id)
                chunk_ids.add(track_id)
                if track_id in closed:
                    # Rows for an id that already ended its group: reject the
                    # whole track, including any part built earlier.
                    if track_id not in rejected_reappeared:
                        rejected_reappeared.add(track_id)
                        report.rejection_reasons.append(
                            f"track {track_id}: rows reappear after its group ended"
                        )
                        for i, built in enumerate(tracks):
                            if built.track_id == track_id:
                                report.rows_accepted -= built.n_frames
                                report.rows_rejected += built.n_frames
                                del tracks[i]
                                break
                    report.rows_rejected += len(group)
                    continue
                pending.setdefault(track_id, []).append(group)
            # Groups that ended keep memory bounded by concurrently open tracks.
            for done_id in [tid for tid in pending if tid not in chunk_ids]:
                finalize(done_id)
    except (ValueError, TypeError) as err:
        raise _find_bad_cell(path, err) from err

    for track_id in sorted(pending):
        finalize(track_id)
    report.tracks_built = len(tracks)
    tracks.sort(key=lambda t: t.track_id)
    return tracks


def _compare_minima(
    tracks: list[Track], meta: dict[int, TrackMeta], report: IngestReport
) -> list[Track]:
    """Recompute per-track minima and report deltas against tracksMeta."""
    by_id = {t.track_id: t for t in tracks}
    out: list[Track] = []
    for track in tracks:
        series = measures.compute_series(track, by_id)
        minima = measures.track_minima(series)
        track = replace(
            track,
            min_thw=minima.min_thw,
            min_ttc=minima.min_ttc,
            min_dhw=minima.min_dhw,
        )
        out.append(track)
        tm = meta[track.track_id]
        for column, meta_value, recomputed, tol in (
            ("minTHW", tm.min_thw, minima.min_thw, META_TOL_TIME),
            ("minTTC", tm.min_ttc, minima.min_ttc, META_TOL_TIME),
            ("minDHW", tm.min_dhw, minima.min_dhw, META_TOL_DIST),
        ):
            if meta_value is None and recomputed is None:
                continue
            if meta_value is None or recomputed is None:
                report.meta_mismatches.append(
                    MetaMismatch(track.track_id, column, meta_value, recomputed, None)
                )
                continue
            delta = abs(meta_value - recomputed)
            if delta > tol:
                report.meta_mismatches.append(
                    MetaMismatch(track.track_id, column, meta_value, recomputed, delta)
                )
    return out


def ingest_dataset(
    source: str | Path | RawDatasetPaths,
    layout_config: Optional[dict | str | Path] = None,
    segment_length: Optional[float] = None,
) -> tuple[Recording, IngestReport]:
    """Full ingestion: header + meta + frames -> canonical Recording."""
    paths = (
        source
        if isinstance(source, RawDatasetPaths)
        else RawDatasetPaths.discover(source)
    )
    if isinstance(layout_config, (str, Path)):
        layout_config = load_layout_config(layout_config)
    if layout_config is None:
        sidecar = paths.recording_meta_path.with_name(f"{paths.prefix}_layout.json")
        if sidecar.is_file():
            layout_config = load_layout_config(sidecar)

    report = IngestReport()
    header = parse_recording_meta(paths.recording_meta_path, layout_config)
    meta = parse_tracks_meta(paths.tracks_meta_path, report)
    tracks = parse_tracks(paths.tracks_path, meta, report)
    tracks = _compare_minima(tracks, meta, report)

    l_r = segment_length or header.segment_length
    if l_r is None:
        lo = min((float(np.min(t.x)) for t in tracks), default=0.0)
        hi = max((float(np.max(t.x)) for t in tracks), default=1.0)
        l_r = hi - lo if hi > lo else 1.0

    recording = Recording(
        recording_id=header.recording_id,
        frame_rate=header.frame_rate,
        location_id=header.location_id,
        speed_limit=header.speed_limit,
        lane_layout=header.lane_layout,
        segment_length=l_r,
        duration=header.duration,
        tracks=tuple(tracks),
    )
    return recording, report
