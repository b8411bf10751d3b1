"""Deterministic synthetic-scenario generator emitting highD-format files.

Scenarios are kinematically scripted (piecewise constant acceleration per
vehicle, frame-aligned phase boundaries); no driver model is simulated. The
generator's job is oracle exactness: the in-memory ground-truth Recording is
derived by passing the generated raw rows through the same builder the
ingestion layer uses, so generate -> write -> ingest round-trips bit-exactly,
and the emitted raw dhw/thw/ttc columns are exactly what the measures module
recomputes.

Script coordinates: every vehicle moves along s >= 0 in its own driving
direction, with the visible segment [0, l_r). Lateral kinematics are
schematic (y sits at the lane center and jumps at lane switches; a_y spans
only populate the acceleration column).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from . import ingest as ingest_mod
from . import measures
from .errors import GenerationError
from .model import Direction, LaneLayout, Recording, Track, VehicleClass

FRAME_ALIGN_TOL = 1e-9

# Synthetic locations served via the layout override: 101 has one lane per
# direction, 102 has two.
SYNTH_LOCATION = 101
SYNTH_LOCATION_2 = 102
SYNTH_LAYOUTS = {
    SYNTH_LOCATION: {
        "upper": [(5, "right")],
        "lower": [(2, "right")],
    },
    SYNTH_LOCATION_2: {
        "upper": [(5, "right"), (6, "left")],
        "lower": [(2, "right"), (3, "left")],
    },
}
SYNTH_LAYOUT = SYNTH_LAYOUTS[SYNTH_LOCATION]


@dataclass(frozen=True)
class Phase:
    """Constant-acceleration segment; durations must be frame-aligned."""

    duration: float
    a: float = 0.0


@dataclass(frozen=True)
class LaneSwitch:
    time: float  # seconds from recording start
    lane_id: int


@dataclass(frozen=True)
class AySpan:
    t_start: float
    t_end: float
    a_y: float


@dataclass(frozen=True)
class VehicleScript:
    track_id: int
    x0: float  # front-bumper script position at t=0 (may start outside view)
    v0: float
    lane_id: int
    vehicle_class: VehicleClass = "car"
    length: float = 5.0
    width: float = 2.0
    phases: tuple[Phase, ...] = ()
    lane_plan: tuple[LaneSwitch, ...] = ()
    a_y_spans: tuple[AySpan, ...] = ()


@dataclass(frozen=True)
class ScenarioScript:
    kind: str
    recording_id: int
    duration: float
    segment_length: float
    vehicles: tuple[VehicleScript, ...]
    location_id: int = SYNTH_LOCATION
    frame_rate: float = 25.0
    seed: int = 0
    layout_override: Optional[dict] = None
    expected: dict = field(default_factory=dict)


@dataclass(frozen=True)
class LaneChangeTruth:
    track_id: int
    frame: int  # first frame on the new lane
    from_lane: int
    to_lane: int


@dataclass
class GroundTruth:
    recording: Recording
    series: dict[int, measures.MeasureSeries]
    lane_changes: list[LaneChangeTruth]
    expected: dict


def _resolve_layout(script: ScenarioScript) -> tuple[LaneLayout, dict]:
    """Layout plus the override dict the writer must persist alongside."""
    override: dict = dict(script.layout_override or {})
    if script.location_id not in ingest_mod.BUILTIN_LANE_TABLE:
        entry = override.get(str(script.location_id))
        if entry is None:
            if script.location_id not in SYNTH_LAYOUTS:
                raise GenerationError(
                    f"location {script.location_id} needs a layout_override"
                )
            builtin = SYNTH_LAYOUTS[script.location_id]
            entry = {
                "upper": [list(t) for t in builtin["upper"]],
                "lower": [list(t) for t in builtin["lower"]],
            }
            override[str(script.location_id)] = entry
    layout, _ = ingest_mod._layout_from_table(script.location_id, override or None)
    return layout, override


def _frames(t: float, frame_rate: float, what: str) -> int:
    k = t * frame_rate
    rounded = round(k)
    if abs(k - rounded) > FRAME_ALIGN_TOL * max(1.0, abs(k)):
        raise GenerationError(f"{what} = {t}s is not frame-aligned at {frame_rate} Hz")
    return int(rounded)


class _Kinematics:
    """Per-vehicle piecewise-quadratic motion with exact constant-phase steps."""

    def __init__(self, veh: VehicleScript, frame_rate: float, n_frames: int):
        self.frame_rate = frame_rate
        starts = [0]
        xs = [veh.x0]
        vs = [veh.v0]
        accs = []
        for i, phase in enumerate(veh.phases):
            dur_frames = _frames(phase.duration, frame_rate, f"phase {i} duration")
            if dur_frames <= 0:
                raise GenerationError(f"phase {i} duration must be positive")
            d = dur_frames / frame_rate
            x_end = xs[-1] + vs[-1] * d + 0.5 * phase.a * d * d
            v_end = vs[-1] + phase.a * d
            if v_end < 0 or vs[-1] < 0:
                raise GenerationError(
                    f"track {veh.track_id}: negative speed in phase {i}"
                )
            accs.append(phase.a)
            starts.append(starts[-1] + dur_frames)
            xs.append(x_end)
            vs.append(v_end)
        accs.append(0.0)  # coast after the last scripted phase
        self.start_frames = np.array(starts, dtype=np.int64)
        self.x_at_start = np.array(xs, dtype=float)
        self.v_at_start = np.array(vs, dtype=float)
        self.a = np.array(accs, dtype=float)
        self.n_frames = n_frames

    def _phase_of(self, k: np.ndarray) -> np.ndarray:
        return np.clip(
            np.searchsorted(self.start_frames, k, side="right") - 1,
            0, len(self.a) - 1,
        )

    def eval(self, k: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(s, v, a) at frame indices k, exact for zero-acceleration phases."""
        k = np.asarray(k, dtype=np.int64)
        p = self._phase_of(k)
        rel = k - self.start_frames[p]
        a = self.a[p]
        v0 = self.v_at_start[p]
        x0 = self.x_at_start[p]
        step = v0 / self.frame_rate
        tau = rel / self.frame_rate
        const = a == 0.0
        s = np.where(const, x0 + rel * step, x0 + v0 * tau + 0.5 * a * tau * tau)
        v = np.where(const, v0, v0 + a * tau)
        return s, v, a

    def eval_one(self, k: int) -> float:
        return float(self.eval(np.array([k]))[0][0])


def _visibility(kin: _Kinematics, l_r: float, n_frames: int) -> Optional[tuple[int, int]]:
    """[first, last] frame with 0 <= s < l_r, or None if never visible."""
    # s is monotone non-decreasing (speeds are validated >= 0).
    lo, hi = 0, n_frames - 1
    if kin.eval_one(hi) < 0 or kin.eval_one(0) >= l_r:
        return None
    # First frame with s >= 0.
    a, b = 0, hi
    if kin.eval_one(0) >= 0:
        first = 0
    else:
        while b - a > 1:
            mid = (a + b) // 2
            if kin.eval_one(mid) >= 0:
                b = mid
            else:
                a = mid
        first = b
    # Last frame with s < l_r.
    a, b = first, hi
    if kin.eval_one(hi) < l_r:
        last = hi
    else:
        while b - a > 1:
            mid = (a + b) // 2
            if kin.eval_one(mid) < l_r:
                a = mid
            else:
                b = mid
        last = a
    if kin.eval_one(first) < 0 or kin.eval_one(first) >= l_r:
        return None
    return first, last


def _lane_track(veh: VehicleScript, frame_rate: float, window: tuple[int, int]) -> np.ndarray:
    first, last = window
    lanes = np.full(last - first + 1, veh.lane_id, dtype=np.int64)
    for switch in sorted(veh.lane_plan, key=lambda s: s.time):
        k = _frames(switch.time, frame_rate, "lane switch time")
        lanes[max(k - first, 0):] = switch.lane_id
    return lanes


def _lane_y(layout: LaneLayout, lane_id: int) -> float:
    direction = layout.direction_of(lane_id)
    idx = layout.index_of(lane_id)
    base = 2.0 if direction == "upper" else 30.0
    return base + 4.0 * idx


def generate(script: ScenarioScript) -> GroundTruth:
    """Integrate the script and return the ground-truth recording + answers."""
    layout, override = _resolve_layout(script)
    fr = script.frame_rate
    n_frames = _frames(script.duration, fr, "duration")
    if n_frames <= 0:
        raise GenerationError("duration must cover at least one frame")
    l_r = script.segment_length
    if l_r <= 0:
        raise GenerationError("segment_length must be > 0")

    known_ids = layout.all_ids()
    seen_ids = set()
    per_vehicle: dict[int, dict] = {}
    for veh in script.vehicles:
        if veh.track_id in seen_ids:
            raise GenerationError(f"duplicate track_id {veh.track_id}")
        seen_ids.add(veh.track_id)
        lanes_used = {veh.lane_id} | {s.lane_id for s in veh.lane_plan}
        if not lanes_used <= known_ids:
            raise GenerationError(
                f"track {veh.track_id}: lanes {sorted(lanes_used - known_ids)} "
                f"not in layout"
            )
        direction = layout.direction_of(veh.lane_id)
        for s in veh.lane_plan:
            if layout.direction_of(s.lane_id) != direction:
                raise GenerationError(
                    f"track {veh.track_id}: lane plan crosses driving directions"
                )
        kin = _Kinematics(veh, fr, n_frames)
        window = _visibility(kin, l_r, n_frames)
        if window is None or window[1] - window[0] < 1:
            # Never visible, or visible for a single frame (which could not
            # survive the last-frame trim anyway): skip the vehicle.
            continue
        first, last = window
        ks = np.arange(first, last + 1, dtype=np.int64)
        s, v, a = kin.eval(ks)
        lanes = _lane_track(veh, fr, window)
        a_y = np.zeros_like(s)
        for span in veh.a_y_spans:
            k0 = _frames(span.t_start, fr, "a_y span start")
            k1 = _frames(span.t_end, fr, "a_y span end")
            a_y[(ks >= k0) & (ks < k1)] = span.a_y
        y = np.empty_like(s)
        for lane in np.unique(lanes):
            y[lanes == lane] = _lane_y(layout, int(lane))
        per_vehicle[veh.track_id] = {
            "script": veh, "direction": direction, "first": first, "last": last,
            "ks": ks, "s": s, "v": v, "a": a, "lanes": lanes, "y": y, "a_y": a_y,
            "leader": np.zeros(ks.size, dtype=np.int64),
            "follower": np.zeros(ks.size, dtype=np.int64),
        }

    _assign_leaders(per_vehicle, n_frames)

    tracks0 = [
        _assemble_track(data, l_r)
        for _, data in sorted(per_vehicle.items())
    ]
    by_id = {t.track_id: t for t in tracks0}
    series: dict[int, measures.MeasureSeries] = {}
    tracks1 = []
    for track in tracks0:
        ser = measures.compute_series(track, by_id)
        if ser.negative_gap_frames:
            raise GenerationError(
                f"track {track.track_id}: scripted collision (negative gap)"
            )
        for arr in (ser.dhw, ser.thw, ser.ttc):
            if np.any(np.isfinite(arr) & (arr == 0.0)):
                raise GenerationError(
                    f"track {track.track_id}: measure value exactly 0 collides "
                    f"with the CSV sentinel"
                )
        minima = measures.track_minima(ser)
        series[track.track_id] = ser
        tracks1.append(
            replace(
                track,
                dhw_raw=ser.dhw.copy(),
                thw_raw=ser.thw.copy(),
                ttc_raw=ser.ttc.copy(),
                min_thw=minima.min_thw,
                min_ttc=minima.min_ttc,
                min_dhw=minima.min_dhw,
            )
        )

    recording = Recording(
        recording_id=script.recording_id,
        frame_rate=fr,
        location_id=script.location_id,
        speed_limit=_layout_speed_limit(script, override),
        lane_layout=layout,
        segment_length=l_r,
        duration=script.duration,
        tracks=tuple(tracks1),
    )

    lane_changes = []
    for tid, data in sorted(per_vehicle.items()):
        lanes = data["lanes"]
        ks = data["ks"]
        switches = np.flatnonzero(np.diff(lanes) != 0)
        for i in switches:
            lane_changes.append(
                LaneChangeTruth(
                    track_id=tid,
                    frame=int(ks[i + 1]),
                    from_lane=int(lanes[i]),
                    to_lane=int(lanes[i + 1]),
                )
            )

    return GroundTruth(
        recording=recording,
        series=series,
        lane_changes=lane_changes,
        expected=dict(script.expected),
    )


def _layout_speed_limit(script: ScenarioScript, override: dict) -> Optional[float]:
    entry = override.get(str(script.location_id)) if override else None
    if entry and "speed_limit_kmh" in entry:
        value = entry["speed_limit_kmh"]
        return None if value is None else float(value)
    return ingest_mod.LOCATION_SPEED_LIMITS.get(script.location_id)


def _assign_leaders(per_vehicle: dict[int, dict], n_frames: int) -> None:
    """Per-lane FIFO leader/follower assignment via an event sweep.

    Lane membership changes only at entries, exits and lane switches; between
    changes the in-lane ordering is constant (same-lane overtaking would show
    up as a negative gap and abort generation). Each adjacent pair is written
    as one array slice per adjacency session, keeping the sweep linear in the
    number of events plus total vehicle-frames.
    """
    ENTER, SWITCH, EXIT = 0, 1, 2  # processing order within one frame
    events: list[tuple[int, int, int, int]] = []  # (frame, order, tid, lane)
    for tid, data in per_vehicle.items():
        events.append((data["first"], ENTER, tid, int(data["lanes"][0])))
        events.append((data["last"] + 1, EXIT, tid, -1))
        lanes = data["lanes"]
        ks = data["ks"]
        for i in np.flatnonzero(np.diff(lanes) != 0):
            events.append((int(ks[i + 1]), SWITCH, tid, int(lanes[i + 1])))
    events.sort()

    def s_at(tid: int, frame: int) -> float:
        data = per_vehicle[tid]
        return float(data["s"][frame - data["first"]])

    lane_order: dict[int, list[int]] = {}  # lane -> tids ascending s
    lane_of: dict[int, int] = {}
    sessions: dict[tuple[int, int], int] = {}  # (behind, ahead) -> start frame
    lane_pairs: dict[int, set[tuple[int, int]]] = {}

    def close_pair(pair: tuple[int, int], frame: int) -> None:
        start = sessions.pop(pair)
        if frame <= start:
            return
        behind, ahead = pair
        b, a = per_vehicle[behind], per_vehicle[ahead]
        b["leader"][start - b["first"]:frame - b["first"]] = ahead
        a["follower"][start - a["first"]:frame - a["first"]] = behind

    def refresh(lane: int, frame: int) -> None:
        order = lane_order.get(lane, [])
        new_pairs = set(zip(order[:-1], order[1:]))
        old_pairs = lane_pairs.get(lane, set())
        for pair in old_pairs - new_pairs:
            close_pair(pair, frame)
        for pair in new_pairs - old_pairs:
            sessions[pair] = frame
        lane_pairs[lane] = new_pairs

    i = 0
    while i < len(events):
        frame = events[i][0]
        touched: set[int] = set()
        while i < len(events) and events[i][0] == frame:
            _, action, tid, lane = events[i]
            if action == EXIT:
                old = lane_of.pop(tid)
                lane_order[old].remove(tid)
                touched.add(old)
            else:
                if action == SWITCH:
                    old = lane_of.pop(tid)
                    lane_order[old].remove(tid)
                    touched.add(old)
                order = lane_order.setdefault(lane, [])
                s_new = s_at(tid, frame)
                pos = 0
                while pos < len(order) and s_at(order[pos], frame) < s_new:
                    pos += 1
                order.insert(pos, tid)
                lane_of[tid] = lane
                touched.add(lane)
            i += 1
        for lane in touched:
            refresh(lane, frame)
    for pair in list(sessions):
        close_pair(pair, n_frames)


def _assemble_track(data: dict, l_r: float) -> Track:
    """Raw rows for one vehicle, pushed through the shared ingest builder."""
    veh: VehicleScript = data["script"]
    direction: Direction = data["direction"]
    s, v, a = data["s"], data["v"], data["a"]
    if direction == "lower":
        x_raw = s - veh.length
        v_raw, a_raw = v, a
    else:
        x_raw = l_r - s
        v_raw, a_raw = -v, -a

    n = s.size
    zeros = np.zeros(n)
    cols = {
        "x": x_raw,
        "y": data["y"],
        "width": np.full(n, veh.length),
        "height": np.full(n, veh.width),
        "xVelocity": v_raw,
        "yVelocity": zeros,
        "xAcceleration": a_raw,
        "yAcceleration": data["a_y"],
        "frontSightDistance": l_r - s,
        "backSightDistance": s.copy(),
        "dhw": zeros,
        "thw": zeros,
        "ttc": zeros,
        "precedingXVelocity": zeros,
        "precedingId": data["leader"].astype(float),
        "followingId": data["follower"].astype(float),
        "leftPrecedingId": zeros,
        "leftAlongsideId": zeros,
        "leftFollowingId": zeros,
        "rightPrecedingId": zeros,
        "rightAlongsideId": zeros,
        "rightFollowingId": zeros,
        "laneId": data["lanes"].astype(float),
    }
    meta = ingest_mod.TrackMeta(
        track_id=veh.track_id,
        vehicle_length=veh.length,
        vehicle_width=veh.width,
        initial_frame=data["first"],
        final_frame=data["last"],
        num_frames=n,
        vehicle_class=veh.vehicle_class,
        driving_direction=direction,
        min_dhw=None, min_thw=None, min_ttc=None,
        num_lane_changes=int(np.count_nonzero(np.diff(data["lanes"]))),
    )
    return ingest_mod._build_track(meta, data["ks"], cols)


def _raw_x_for_write(track: Track, l_r: float) -> np.ndarray:
    """Invert the canonical x conversion exactly.

    The upper-road mirror is an exact negation. For the lower road we need r
    with fl(r + L) == x bitwise; fl(x - L) is within an ulp of the preimage
    interval, so probing a few ulp(x)-spaced candidates around it always finds
    a witness when one exists (it does for builder-produced recordings).
    """
    if track.driving_direction == "upper":
        return -track.x
    length = track.vehicle_length
    raw = track.x - length
    spacing = np.spacing(np.abs(track.x))
    for k in (0, -1, 1, -2, 2, -3, 3):
        bad = (raw + length) != track.x
        if not np.any(bad):
            return raw
        cand = (track.x - length) + k * spacing
        raw = np.where(bad, cand, raw)
    bad = (raw + length) != track.x
    if np.any(bad):
        raise GenerationError(
            f"track {track.track_id}: cannot invert the position conversion "
            f"exactly for {int(np.count_nonzero(bad))} frame(s)"
        )
    return raw


def _sentinel(arr: np.ndarray) -> np.ndarray:
    return np.where(np.isfinite(arr), arr, 0.0)


def write_dataset(recording: Recording, directory: str | Path) -> ingest_mod.RawDatasetPaths:
    """Write the three highD-format CSV files plus the layout sidecar."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    prefix = f"{recording.recording_id:02d}"

    tracks = sorted(recording.tracks, key=lambda t: t.track_id)
    by_id = {t.track_id: t for t in tracks}
    l_r = recording.segment_length

    columns: dict[str, list[np.ndarray]] = {c: [] for c in ingest_mod.TRACKS_COLUMNS}
    meta_rows = []
    for track in tracks:
        n = track.n_frames
        raw_x = _raw_x_for_write(track, l_r)
        if track.driving_direction == "upper":
            v_raw, a_raw = -track.v_x, -track.a_x
            s = -track.x  # script-space position for sight distances
            front_sight = l_r - s
            back_sight = s
        else:
            v_raw, a_raw = track.v_x, track.a_x
            front_sight = l_r - track.x
            back_sight = track.x

        preceding_v = np.zeros(n)
        for lid in np.unique(track.leader_ids):
            lid = int(lid)
            if lid == 0:
                continue
            leader = by_id.get(lid)
            if leader is None:
                continue
            sel = np.flatnonzero(track.leader_ids == lid)
            g = track.frame_index[sel]
            ok = (g >= leader.first_frame) & (g <= leader.last_frame)
            sel = sel[ok]
            off = track.frame_index[sel] - leader.first_frame
            sign = -1.0 if leader.driving_direction == "upper" else 1.0
            preceding_v[sel] = sign * leader.v_x[off]

        for name, values in (
            ("frame", track.frame_index),
            ("id", np.full(n, track.track_id, dtype=np.int64)),
            ("x", raw_x),
            ("y", track.y),
            ("width", np.full(n, track.vehicle_length)),
            ("height", np.full(n, track.vehicle_width)),
            ("xVelocity", v_raw),
            ("yVelocity", track.v_y),
            ("xAcceleration", a_raw),
            ("yAcceleration", track.a_y),
            ("frontSightDistance", front_sight),
            ("backSightDistance", back_sight),
            ("dhw", _sentinel(track.dhw_raw)),
            ("thw", _sentinel(track.thw_raw)),
            ("ttc", _sentinel(track.ttc_raw)),
            ("precedingXVelocity", preceding_v),
            ("precedingId", track.leader_ids),
            ("followingId", track.follower_ids),
            ("leftPrecedingId", track.left_preceding_ids),
            ("leftAlongsideId", track.left_alongside_ids),
            ("leftFollowingId", track.left_following_ids),
            ("rightPrecedingId", track.right_preceding_ids),
            ("rightAlongsideId", track.right_alongside_ids),
            ("rightFollowingId", track.right_following_ids),
            ("laneId", track.lane_ids),
        ):
            columns[name].append(values)

        meta_rows.append({
            "id": track.track_id,
            "width": track.vehicle_length,
            "height": track.vehicle_width,
            "initialFrame": track.first_frame,
            "finalFrame": track.last_frame,
            "numFrames": n,
            "class": "Truck" if track.vehicle_class == "truck" else "Car",
            "drivingDirection": 1 if track.driving_direction == "upper" else 2,
            "traveledDistance": abs(float(track.x[-1] - track.x[0])),
            "minXVelocity": float(np.min(v_raw)),
            "maxXVelocity": float(np.max(v_raw)),
            "meanXVelocity": float(np.mean(v_raw)),
            "minDHW": 0.0 if track.min_dhw is None else track.min_dhw,
            "minTHW": 0.0 if track.min_thw is None else track.min_thw,
            "minTTC": 0.0 if track.min_ttc is None else track.min_ttc,
            "numLaneChanges": int(np.count_nonzero(np.diff(track.lane_ids)))
            if n > 1 else 0,
        })

    tracks_path = directory / f"{prefix}_tracks.csv"
    if tracks:
        frame = pd.DataFrame(
            {name: np.concatenate(parts) for name, parts in columns.items()}
        )
        frame.to_csv(tracks_path, index=False)
    else:
        pd.DataFrame(columns=ingest_mod.TRACKS_COLUMNS).to_csv(tracks_path, index=False)

    meta_path = directory / f"{prefix}_tracksMeta.csv"
    pd.DataFrame(meta_rows, columns=ingest_mod.TRACKS_META_COLUMNS).to_csv(
        meta_path, index=False
    )

    n_cars = sum(1 for t in tracks if t.vehicle_class == "car")
    n_trucks = len(tracks) - n_cars
    upper_marks = _markings(recording.lane_layout, "upper")
    lower_marks = _markings(recording.lane_layout, "lower")
    rec_path = directory / f"{prefix}_recordingMeta.csv"
    pd.DataFrame([{
        "id": recording.recording_id,
        "frameRate": recording.frame_rate,
        "locationId": recording.location_id,
        "speedLimit": -1.0 if recording.speed_limit is None
        else recording.speed_limit / 3.6,
        "month": 9,
        "weekDay": 3,
        "startTime": "10:00",
        "duration": recording.duration,
        "totalDrivenDistance": float(sum(r["traveledDistance"] for r in meta_rows)),
        "totalDrivenTime": float(
            sum(t.n_frames for t in tracks) / recording.frame_rate
        ),
        "numVehicles": len(tracks),
        "numCars": n_cars,
        "numTrucks": n_trucks,
        "upperLaneMarkings": upper_marks,
        "lowerLaneMarkings": lower_marks,
    }], columns=ingest_mod.RECORDING_META_COLUMNS).to_csv(rec_path, index=False)

    sidecar = {
        "segment_length": recording.segment_length,
        str(recording.location_id): {
            "upper": [[lane, role] for lane, role in recording.lane_layout.upper],
            "lower": [[lane, role] for lane, role in recording.lane_layout.lower],
            "speed_limit_kmh": recording.speed_limit,
        },
    }
    with open(directory / f"{prefix}_layout.json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)

    return ingest_mod.RawDatasetPaths(
        recording_meta_path=rec_path,
        tracks_meta_path=meta_path,
        tracks_path=tracks_path,
    )


def _markings(layout: LaneLayout, direction: Direction) -> str:
    count = len(layout.lanes(direction)) + 1
    base = 0.0 if direction == "upper" else 28.0
    return ";".join(f"{base + 4.0 * i:.2f}" for i in range(count))


# ---------------------------------------------------------------------------
# Scenario constructors


def constant_platoon(
    speed: float = 25.0,
    spacing: float = 50.0,
    duration: float = 60.0,
    vehicle_length: float = 5.0,
    lane_id: Optional[int] = None,
    location_id: int = SYNTH_LOCATION,
    segment_length: float = 1000.0,
    vehicle_class: VehicleClass = "car",
    count: Optional[int] = None,
    recording_id: int = 90,
) -> ScenarioScript:
    """Saturated single-lane stream at constant speed and front-to-front spacing."""
    if spacing <= vehicle_length:
        raise GenerationError("spacing must exceed the vehicle length")
    lane = lane_id if lane_id is not None else SYNTH_LAYOUT["lower"][0][0]
    if count is None:
        # Keep the segment saturated for the whole duration.
        count = int(np.ceil((segment_length + speed * duration) / spacing)) + 1
    # Half-spacing phase shift keeps reference-point crossings away from the
    # recording start, so even the first aggregation window counts them all.
    vehicles = tuple(
        VehicleScript(
            track_id=i + 1,
            x0=float(segment_length - 0.5 * spacing - i * spacing),
            v0=speed,
            lane_id=lane,
            vehicle_class=vehicle_class,
            length=vehicle_length,
        )
        for i in range(count)
    )
    gap = spacing - vehicle_length
    return ScenarioScript(
        kind="constant_platoon",
        recording_id=recording_id,
        duration=duration,
        segment_length=segment_length,
        vehicles=vehicles,
        location_id=location_id,
        expected={
            "q_veh_h": speed / spacing * 3600.0,
            "rho_veh_km": 1000.0 / spacing,
            "v_kmh": speed * 3.6,
            "thw_s": gap / speed,
            "dhw_m": gap,
        },
    )


def closing(
    v_follower: float = 30.0,
    v_leader: float = 20.0,
    initial_gap: float = 100.0,
    duration: float = 8.0,
    vehicle_length: float = 5.0,
    brake_after: Optional[float] = None,
    brake_a: float = -2.0,
    brake_duration: float = 2.0,
    lane_id: Optional[int] = None,
    segment_length: float = 2000.0,
    recording_id: int = 91,
) -> ScenarioScript:
    """Follower closes on a slower leader; optional scripted braking phase."""
    if v_follower <= v_leader:
        raise GenerationError("closing requires v_follower > v_leader")
    lane = lane_id if lane_id is not None else SYNTH_LAYOUT["lower"][0][0]
    leader_front = 200.0 + initial_gap + vehicle_length
    phases: tuple[Phase, ...] = ()
    if brake_after is not None:
        coast = duration - brake_after - brake_duration
        if coast < 0:
            raise GenerationError("brake phases exceed the scenario duration")
        phases = (
            Phase(brake_after, 0.0),
            Phase(brake_duration, brake_a),
        )
    vehicles = (
        VehicleScript(track_id=1, x0=leader_front, v0=v_leader, lane_id=lane,
                      length=vehicle_length),
        VehicleScript(track_id=2, x0=200.0, v0=v_follower, lane_id=lane,
                      length=vehicle_length, phases=phases),
    )
    v_r = v_follower - v_leader
    return ScenarioScript(
        kind="closing",
        recording_id=recording_id,
        duration=duration,
        segment_length=segment_length,
        vehicles=vehicles,
        expected={
            "ttc0_s": initial_gap / v_r,
            "v_r": v_r,
            "initial_gap": initial_gap,
        },
    )


def lane_change(
    speed: float = 30.0,
    change_at: float = 4.0,
    bounce_back_after: Optional[float] = None,
    duration: float = 12.0,
    location_id: int = 1,
    recording_id: int = 92,
) -> ScenarioScript:
    """One vehicle switching lanes on a 3-lane road, optionally bouncing back."""
    layout = ingest_mod.BUILTIN_LANE_TABLE[location_id]
    lower = layout["lower"]
    right_lane = lower[0][0]
    middle_lane = lower[1][0]
    plan = [LaneSwitch(change_at, middle_lane)]
    if bounce_back_after is not None:
        plan.append(LaneSwitch(change_at + bounce_back_after, right_lane))
    vehicles = (
        VehicleScript(
            track_id=1, x0=10.0, v0=speed, lane_id=right_lane,
            lane_plan=tuple(plan),
        ),
    )
    return ScenarioScript(
        kind="lane_change",
        recording_id=recording_id,
        duration=duration,
        segment_length=1000.0,
        vehicles=vehicles,
        location_id=location_id,
        expected={"change_frame": change_at * 25.0},
    )


def stop_and_go(
    v_cruise: float = 20.0,
    gap0: float = 40.0,
    decel: float = -2.5,
    stop_duration: float = 4.0,
    accel: float = 2.0,
    follower_delay: float = 1.0,
    vehicle_length: float = 5.0,
    segment_length: float = 1500.0,
    recording_id: int = 93,
) -> ScenarioScript:
    """Leader brakes to standstill and pulls away; the follower reacts late.

    The late reaction compresses the gap; the compression peak (minimum DHW)
    lands where the follower reaches standstill.
    """
    brake_time = v_cruise / -decel
    lane = SYNTH_LAYOUT["lower"][0][0]
    lead_phases = (
        Phase(2.0, 0.0),
        Phase(brake_time, decel),
        Phase(stop_duration, 0.0),
        Phase(v_cruise / accel, accel),
    )
    follow_phases = (
        Phase(2.0 + follower_delay, 0.0),
        Phase(brake_time, decel),
        Phase(stop_duration, 0.0),
        Phase(v_cruise / accel, accel),
    )
    vehicles = (
        VehicleScript(track_id=1, x0=200.0 + gap0 + vehicle_length, v0=v_cruise,
                      lane_id=lane, length=vehicle_length, phases=lead_phases),
        VehicleScript(track_id=2, x0=200.0, v0=v_cruise, lane_id=lane,
                      length=vehicle_length, phases=follow_phases),
    )
    compression = v_cruise * follower_delay
    if compression >= gap0:
        raise GenerationError("follower delay long enough to collide")
    duration = 2.0 + follower_delay + brake_time + stop_duration + v_cruise / accel + 4.0
    return ScenarioScript(
        kind="stop_and_go",
        recording_id=recording_id,
        duration=duration,
        segment_length=segment_length,
        vehicles=vehicles,
        expected={
            "min_gap": gap0 - compression,
            # Follower reaches standstill at the end of its brake phase.
            "compression_frame": (2.0 + follower_delay + brake_time) * 25.0,
        },
    )


def mixed_traffic(
    seed: int = 7,
    duration: float = 120.0,
    location_id: int = 1,
    mean_headway: float = 2.5,
    truck_share: float = 0.2,
    max_vehicles: Optional[int] = None,
    recording_id: int = 94,
    segment_length: float = 420.0,
) -> ScenarioScript:
    """Seeded multi-lane, both-direction streams with per-lane constant speeds.

    Within a lane every vehicle drives the lane speed, so scripted streams
    can never collide; headways vary per vehicle.
    """
    rng = np.random.default_rng(seed)
    layout, _ = ingest_mod._layout_from_table(location_id)
    vehicles: list[VehicleScript] = []
    tid = 1
    for direction in ("lower", "upper"):
        lanes = [
            lane for lane, role in layout.lanes(direction)
            if role in ("right", "middle", "left")
        ]
        for j, lane in enumerate(lanes):
            lane_speed = float(np.round(20.0 + 5.0 * j + rng.uniform(0, 3), 2))
            t_entry = float(rng.uniform(0, 1))
            while t_entry < duration:
                is_truck = bool(rng.uniform() < truck_share) and j == 0
                length = 12.0 if is_truck else 4.5
                headway = float(rng.uniform(0.6, 1.8) * mean_headway)
                k_entry = round(t_entry * 25.0)
                vehicles.append(
                    VehicleScript(
                        track_id=tid,
                        x0=float(-lane_speed * (k_entry / 25.0)),
                        v0=lane_speed,
                        lane_id=lane,
                        vehicle_class="truck" if is_truck else "car",
                        length=length,
                    )
                )
                tid += 1
                t_entry += max(headway, (length + 4.0) / lane_speed)
                if max_vehicles is not None and tid > max_vehicles:
                    break
            if max_vehicles is not None and tid > max_vehicles:
                break
        if max_vehicles is not None and tid > max_vehicles:
            break
    return ScenarioScript(
        kind="mixed_traffic",
        recording_id=recording_id,
        duration=duration,
        segment_length=segment_length,
        vehicles=tuple(vehicles),
        location_id=location_id,
        seed=seed,
        expected={},
    )


SCENARIO_KINDS = {
    "constant_platoon": constant_platoon,
    "closing": closing,
    "lane_change": lane_change,
    "stop_and_go": stop_and_go,
    "mixed_traffic": mixed_traffic,
}
