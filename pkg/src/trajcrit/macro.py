"""Macroscopic analysis: flow, density, mean speeds, minute slices, lane
loads, lane-change detection and rates, triangular fits, fundamental points.

Flow is counted at a reference point (default: midpoint of the direction's
observed extent); density is sampled every frame and time-averaged per
window. Per-lane normalization uses the main through lanes only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DataError, EmptySliceError, SpecError
from .measures import MeasureSeries
from .model import Direction, LaneLayout, Recording, Track

MS_TO_KMH = 3.6
DEBOUNCE_S = 0.5


@dataclass(frozen=True)
class MinuteSlice:
    recording_id: int
    direction: Direction
    index: int
    t_start: float
    t_end: float
    q_veh_h: float  # per lane
    rho_veh_km: float  # per lane
    rho_a_equivalents: Optional[float]
    rho_a_veh_km: Optional[float]
    v_mean_time_kmh: Optional[float]
    v_mean_space_kmh: Optional[float]
    thw_mean_car: Optional[float]
    thw_mean_truck: Optional[float]
    lane_change_count: int
    truck_share: float

    def to_dict(self) -> dict:
        return {
            "recording_id": self.recording_id,
            "direction": self.direction,
            "index": self.index,
            "t_start": self.t_start,
            "t_end": self.t_end,
            "q_veh_h": self.q_veh_h,
            "rho_veh_km": self.rho_veh_km,
            "rho_a_equivalents": self.rho_a_equivalents,
            "rho_a_veh_km": self.rho_a_veh_km,
            "v_mean_time_kmh": self.v_mean_time_kmh,
            "v_mean_space_kmh": self.v_mean_space_kmh,
            "thw_mean_car": self.thw_mean_car,
            "thw_mean_truck": self.thw_mean_truck,
            "lane_change_count": self.lane_change_count,
            "truck_share": self.truck_share,
        }


@dataclass(frozen=True)
class LaneChangeEvent:
    track_id: int
    frame_index: int  # first frame on the new lane
    from_lane: int
    to_lane: int
    direction: str  # leftward | rightward
    adjacent: bool = True

    def to_dict(self) -> dict:
        return {
            "track_id": self.track_id,
            "frame_index": self.frame_index,
            "from_lane": self.from_lane,
            "to_lane": self.to_lane,
            "direction": self.direction,
            "adjacent": self.adjacent,
        }


@dataclass(frozen=True)
class TriangularFit:
    apex_x: float
    apex_y: float
    left_zero_x: float
    right_zero_x: float
    coverage: float
    area: float

    def to_dict(self) -> dict:
        return {
            "apex_x": self.apex_x,
            "apex_y": self.apex_y,
            "left_zero_x": self.left_zero_x,
            "right_zero_x": self.right_zero_x,
            "coverage": self.coverage,
            "area": self.area,
        }


def _window_frames(recording: Recording, window: tuple[float, float]) -> tuple[int, int]:
    t0, t1 = window
    if t1 <= t0:
        raise EmptySliceError(f"empty window [{t0}, {t1})")
    f0 = int(np.ceil(t0 * recording.frame_rate - 1e-9))
    f1 = int(np.ceil(t1 * recording.frame_rate - 1e-9))
    total = int(round(recording.duration * recording.frame_rate))
    if f0 >= total or f1 <= 0:
        raise EmptySliceError(f"window [{t0}, {t1}) outside the recording")
    return f0, f1


def default_reference_x(recording: Recording, direction: Direction) -> float:
    """Midpoint of the direction's observed longitudinal extent."""
    tracks = recording.tracks_in_direction(direction)
    if not tracks:
        raise EmptySliceError(f"no tracks in direction {direction}")
    lo = min(float(np.min(t.x)) for t in tracks)
    hi = max(float(np.max(t.x)) for t in tracks)
    return 0.5 * (lo + hi)


def _crossing_frames(track: Track, reference_x: float) -> np.ndarray:
    """Frames f with x[f-1] < ref <= x[f] (vehicle passes the reference point)."""
    if track.n_frames < 2:
        return np.array([], dtype=np.int64)
    x = track.x
    hits = np.flatnonzero((x[:-1] < reference_x) & (x[1:] >= reference_x))
    return track.frame_index[hits + 1]


def flow_rate(
    recording: Recording,
    window: tuple[float, float],
    direction: Direction,
    reference_x: Optional[float] = None,
) -> float:
    """Vehicles crossing the reference point in the window, as veh/h per lane."""
    f0, f1 = _window_frames(recording, window)
    ref = reference_x if reference_x is not None else default_reference_x(recording, direction)
    lanes = recording.lane_layout.main_lane_count(direction)
    if lanes == 0:
        raise DataError(f"direction {direction} has no main lanes")
    crossings = 0
    for track in recording.tracks_in_direction(direction):
        frames = _crossing_frames(track, ref)
        crossings += int(np.count_nonzero((frames >= f0) & (frames < f1)))
    hours = (f1 - f0) / recording.frame_rate / 3600.0
    return crossings / hours / lanes


def density(
    recording: Recording,
    window: tuple[float, float],
    direction: Direction,
    series: Optional[dict[int, MeasureSeries]] = None,
) -> tuple[float, Optional[float], Optional[float]]:
    """(rho veh/km per lane, vehicle-length-aware equivalents, equivalents per km).

    rho time-averages the per-frame vehicle count over the window. The
    length-aware variant divides the segment length by the mean of
    (own length + DHW) over all follower frames in the window.
    """
    f0, f1 = _window_frames(recording, window)
    lanes = recording.lane_layout.main_lane_count(direction)
    if lanes == 0:
        raise DataError(f"direction {direction} has no main lanes")
    counts = np.zeros(f1 - f0, dtype=np.int64)
    spacing_sum = 0.0
    spacing_n = 0
    for track in recording.tracks_in_direction(direction):
        lo = max(track.first_frame, f0)
        hi = min(track.last_frame + 1, f1)
        if lo >= hi:
            continue
        counts[lo - f0:hi - f0] += 1
        if series is not None:
            ser = series.get(track.track_id)
            if ser is not None:
                dhw = ser.dhw[lo - track.first_frame:hi - track.first_frame]
                present = np.isfinite(dhw)
                spacing_sum += float(np.sum(dhw[present] + track.vehicle_length))
                spacing_n += int(np.count_nonzero(present))
    l_r_km = recording.segment_length / 1000.0
    rho = float(np.mean(counts)) / l_r_km / lanes
    if spacing_n == 0:
        return rho, None, None
    mean_spacing = spacing_sum / spacing_n
    equivalents = recording.segment_length / mean_spacing
    return rho, equivalents, equivalents / l_r_km


def mean_speed(
    recording: Recording,
    window: tuple[float, float],
    direction: Direction,
    mode: str = "space_mean",
    reference_x: Optional[float] = None,
) -> Optional[float]:
    """Average stream speed in km/h; None when the window holds no vehicles."""
    if mode not in ("time_mean", "space_mean"):
        raise SpecError(f"unknown mean_speed mode {mode!r}")
    f0, f1 = _window_frames(recording, window)
    tracks = recording.tracks_in_direction(direction)
    if mode == "time_mean":
        ref = reference_x if reference_x is not None else default_reference_x(recording, direction)
        speeds = []
        for track in tracks:
            for frame in _crossing_frames(track, ref):
                if f0 <= frame < f1:
                    speeds.append(float(track.v_x[frame - track.first_frame]))
        if not speeds:
            return None
        return float(np.mean(speeds)) * MS_TO_KMH
    total = np.zeros(f1 - f0)
    counts = np.zeros(f1 - f0, dtype=np.int64)
    for track in tracks:
        lo = max(track.first_frame, f0)
        hi = min(track.last_frame + 1, f1)
        if lo >= hi:
            continue
        total[lo - f0:hi - f0] += track.v_x[lo - track.first_frame:hi - track.first_frame]
        counts[lo - f0:hi - f0] += 1
    occupied = counts > 0
    if not np.any(occupied):
        return None
    per_frame = total[occupied] / counts[occupied]
    return float(np.mean(per_frame)) * MS_TO_KMH


def detect_lane_changes(
    track: Track,
    layout: LaneLayout,
    frame_rate: float,
    debounce_s: float = DEBOUNCE_S,
) -> list[LaneChangeEvent]:
    """Lane transitions with bounce-back debouncing.

    A transition that returns to the original lane within the debounce window
    collapses to nothing; otherwise one event per settled lane, stamped at the
    first frame off the original lane. Non-adjacent settles are flagged.
    """
    lanes = track.lane_ids
    n = track.n_frames
    window = int(round(debounce_s * frame_rate))
    events: list[LaneChangeEvent] = []
    current = int(lanes[0])
    i = 1
    while i < n:
        if int(lanes[i]) != current:
            settle_end = min(i + window, n - 1)
            final = int(lanes[settle_end])
            if final != current:
                from_idx = layout.index_of(current)
                to_idx = layout.index_of(final)
                events.append(
                    LaneChangeEvent(
                        track_id=track.track_id,
                        frame_index=int(track.frame_index[i]),
                        from_lane=current,
                        to_lane=final,
                        direction="leftward" if to_idx > from_idx else "rightward",
                        adjacent=abs(to_idx - from_idx) == 1,
                    )
                )
                current = final
            i = settle_end + 1
        else:
            i += 1
    return events


def all_lane_changes(recording: Recording) -> list[LaneChangeEvent]:
    events: list[LaneChangeEvent] = []
    for track in recording.tracks:
        events.extend(
            detect_lane_changes(track, recording.lane_layout, recording.frame_rate)
        )
    return events


def minute_slices(
    recording: Recording,
    series: Optional[dict[int, MeasureSeries]] = None,
    lane_changes: Optional[list[LaneChangeEvent]] = None,
    window_s: float = 60.0,
) -> list[MinuteSlice]:
    """Non-overlapping aggregation windows aligned to the recording start."""
    n_windows = int(np.floor(recording.duration / window_s + 1e-9))
    if lane_changes is None:
        lane_changes = all_lane_changes(recording)
    direction_of_track = {t.track_id: t.driving_direction for t in recording.tracks}
    slices: list[MinuteSlice] = []
    for direction in ("upper", "lower"):
        if recording.lane_layout.main_lane_count(direction) == 0:
            continue
        tracks = recording.tracks_in_direction(direction)
        if not tracks:
            continue
        ref = default_reference_x(recording, direction)
        for w in range(n_windows):
            window = (w * window_s, (w + 1) * window_s)
            f0, f1 = _window_frames(recording, window)
            q = flow_rate(recording, window, direction, ref)
            rho, rho_a_eq, rho_a_km = density(recording, window, direction, series)
            v_time = mean_speed(recording, window, direction, "time_mean", ref)
            v_space = mean_speed(recording, window, direction, "space_mean")
            thw_means = {"car": (0.0, 0), "truck": (0.0, 0)}
            present_tracks = 0
            truck_tracks = 0
            for track in tracks:
                lo = max(track.first_frame, f0)
                hi = min(track.last_frame + 1, f1)
                if lo >= hi:
                    continue
                present_tracks += 1
                if track.vehicle_class == "truck":
                    truck_tracks += 1
                if series is not None:
                    ser = series.get(track.track_id)
                    if ser is not None:
                        seg = ser.thw[lo - track.first_frame:hi - track.first_frame]
                        good = np.isfinite(seg)
                        s, c = thw_means[track.vehicle_class]
                        thw_means[track.vehicle_class] = (
                            s + float(np.sum(seg[good])),
                            c + int(np.count_nonzero(good)),
                        )
            lc = sum(
                1 for e in lane_changes
                if f0 <= e.frame_index < f1
                and direction_of_track.get(e.track_id) == direction
            )
            slices.append(
                MinuteSlice(
                    recording_id=recording.recording_id,
                    direction=direction,
                    index=w,
                    t_start=window[0],
                    t_end=window[1],
                    q_veh_h=q,
                    rho_veh_km=rho,
                    rho_a_equivalents=rho_a_eq,
                    rho_a_veh_km=rho_a_km,
                    v_mean_time_kmh=v_time,
                    v_mean_space_kmh=v_space,
                    thw_mean_car=(
                        thw_means["car"][0] / thw_means["car"][1]
                        if thw_means["car"][1] else None
                    ),
                    thw_mean_truck=(
                        thw_means["truck"][0] / thw_means["truck"][1]
                        if thw_means["truck"][1] else None
                    ),
                    lane_change_count=lc,
                    truck_share=truck_tracks / present_tracks if present_tracks else 0.0,
                )
            )
    return slices


def lane_load(recording: Recording) -> dict[str, list[dict]]:
    """Per-lane share of vehicle-frames and per-lane flow over the recording."""
    out: dict[str, list[dict]] = {}
    hours = recording.duration / 3600.0
    for direction in ("upper", "lower"):
        lanes = recording.lane_layout.lanes(direction)
        if not lanes:
            continue
        tracks = recording.tracks_in_direction(direction)
        frame_counts = {lane: 0 for lane, _ in lanes}
        crossing_counts = {lane: 0 for lane, _ in lanes}
        if tracks:
            ref = default_reference_x(recording, direction)
            for track in tracks:
                ids, counts = np.unique(track.lane_ids, return_counts=True)
                for lane, count in zip(ids, counts):
                    frame_counts[int(lane)] += int(count)
                for frame in _crossing_frames(track, ref):
                    lane = int(track.lane_ids[frame - track.first_frame])
                    crossing_counts[lane] += 1
        total = sum(frame_counts.values())
        out[direction] = [
            {
                "lane_id": lane,
                "role": role,
                "share": frame_counts[lane] / total if total else 0.0,
                "q_veh_h": crossing_counts[lane] / hours if hours > 0 else 0.0,
            }
            for lane, role in lanes
        ]
    return out


def lane_change_rate(
    slices: Sequence[MinuteSlice],
    recording: Recording,
) -> list[dict]:
    """Events per lane, hour and kilometer for each slice (origin-lane attribution)."""
    events = all_lane_changes(recording)
    direction_of_track = {t.track_id: t.driving_direction for t in recording.tracks}
    l_r_km = recording.segment_length / 1000.0
    out = []
    for sl in slices:
        f0 = int(round(sl.t_start * recording.frame_rate))
        f1 = int(round(sl.t_end * recording.frame_rate))
        in_window = [
            e for e in events
            if f0 <= e.frame_index < f1
            and direction_of_track.get(e.track_id) == sl.direction
        ]
        lanes = recording.lane_layout.main_lane_count(sl.direction)
        hours = (sl.t_end - sl.t_start) / 3600.0
        rate = len(in_window) / (lanes * hours * l_r_km)
        by_origin: dict[int, int] = {}
        for e in in_window:
            by_origin[e.from_lane] = by_origin.get(e.from_lane, 0) + 1
        out.append({
            "direction": sl.direction,
            "index": sl.index,
            "q_veh_h": sl.q_veh_h,
            "rho_veh_km": sl.rho_veh_km,
            "count": len(in_window),
            "rate_per_lane_h_km": rate,
            "by_origin_lane": {str(k): v for k, v in sorted(by_origin.items())},
        })
    return out


def triangular_fit(
    points: Sequence[tuple[float, float]] | np.ndarray,
    coverage_target: float = 0.97,
    apex_x_grid: int = 200,
    zero_grid: int = 100,
) -> TriangularFit:
    """Minimal-area tent enclosing at least the target fraction of points.

    apex_x and the two zeros are grid-searched over the data range; for each
    combination the apex height is the smallest feasible one, so the result
    dominates any brute-force search over the same (or coarser subset) grids.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise DataError("triangular_fit needs at least 3 (x, y) points")
    if not 0.0 < coverage_target <= 1.0:
        raise DataError("coverage_target must be in (0, 1]")
    x, y = pts[:, 0], pts[:, 1]
    n = x.size
    need = int(np.ceil(coverage_target * n - 1e-12))
    allow_miss = n - need

    if np.all(y <= 0):
        # Degenerate: everything sits at or below zero; a flat tent covers it.
        return TriangularFit(
            apex_x=float(np.median(x)), apex_y=0.0,
            left_zero_x=float(np.min(x)) - 1.0, right_zero_x=float(np.max(x)) + 1.0,
            coverage=1.0, area=0.0,
        )

    x_min, x_max = float(np.min(x)), float(np.max(x))
    span = max(x_max - x_min, 1e-12)
    left_grid = np.linspace(x_min - 0.5 * span, x_max - 1e-12 * span, zero_grid)
    right_grid = np.linspace(x_min + 1e-12 * span, x_max + 0.5 * span, zero_grid)
    apex_grid = np.linspace(x_min, x_max, apex_x_grid)

    best = None
    tail = allow_miss + 1
    for apex in apex_grid:
        left_ok = left_grid < apex
        right_ok = right_grid > apex
        if not np.any(left_ok) or not np.any(right_ok):
            continue
        lg = left_grid[left_ok]
        rg = right_grid[right_ok]
        is_left = x <= apex
        req_l = _required_heights(x[is_left], y[is_left], lg, apex, left_side=True)
        req_r = _required_heights(x[~is_left], y[~is_left], rg, apex, left_side=False)
        # k-th smallest of the union == (allow_miss+1)-th largest; only the
        # top tails of each side can contribute to it.
        tail_l = _top_tail(req_l, tail)
        tail_r = _top_tail(req_r, tail)
        union = np.concatenate(
            np.broadcast_arrays(
                tail_l[:, None, :].repeat(rg.size, axis=1),
                tail_r[None, :, :].repeat(lg.size, axis=0),
            ),
            axis=2,
        )
        heights = np.partition(union, union.shape[2] - tail, axis=2)[:, :, union.shape[2] - tail]
        areas = 0.5 * (rg[None, :] - lg[:, None]) * heights
        areas = np.where(np.isfinite(heights), areas, np.inf)
        idx = np.unravel_index(np.argmin(areas), areas.shape)
        if np.isfinite(areas[idx]) and (best is None or areas[idx] < best[0]):
            best = (
                float(areas[idx]), float(apex), float(heights[idx]),
                float(lg[idx[0]]), float(rg[idx[1]]),
            )

    if best is None:
        raise DataError("no feasible tent found on the search grid")
    area, apex_x, apex_y, left, right = best
    # Recount enclosure; nudge the apex up by ulps if rounding dropped a point.
    for _ in range(50):
        enclosed = _tent_enclosed(x, y, apex_x, apex_y, left, right)
        if enclosed >= need:
            break
        apex_y = float(np.nextafter(apex_y, np.inf))
    else:
        raise DataError("tent coverage could not be stabilized")
    area = 0.5 * (right - left) * apex_y
    return TriangularFit(
        apex_x=apex_x, apex_y=apex_y, left_zero_x=left, right_zero_x=right,
        coverage=enclosed / n, area=area,
    )


def _required_heights(
    x: np.ndarray, y: np.ndarray, zeros: np.ndarray, apex: float, left_side: bool
) -> np.ndarray:
    """Minimal apex height putting each point under the tent, per zero candidate."""
    if x.size == 0:
        return np.zeros((zeros.size, 0))
    if left_side:
        denom = x[None, :] - zeros[:, None]
        width = apex - zeros[:, None]
    else:
        denom = zeros[:, None] - x[None, :]
        width = zeros[:, None] - apex
    with np.errstate(divide="ignore", invalid="ignore"):
        req = y[None, :] * width / denom
    req = np.where(y[None, :] <= 0, 0.0, req)
    req = np.where((denom <= 0) & (y[None, :] > 0), np.inf, req)
    return req


def _top_tail(req: np.ndarray, tail: int) -> np.ndarray:
    """Largest `tail` requirement values per row (padded with -inf)."""
    rows, cols = req.shape
    if cols >= tail:
        part = np.partition(req, cols - tail, axis=1)[:, cols - tail:]
    else:
        pad = np.full((rows, tail - cols), -np.inf)
        part = np.concatenate([req, pad], axis=1)
    return np.sort(part, axis=1)


def tent_value(
    xs: np.ndarray, apex_x: float, apex_y: float, left: float, right: float
) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    out = np.zeros_like(xs)
    rising = (xs >= left) & (xs <= apex_x)
    falling = (xs > apex_x) & (xs <= right)
    if apex_x > left:
        out[rising] = apex_y * (xs[rising] - left) / (apex_x - left)
    if right > apex_x:
        out[falling] = apex_y * (right - xs[falling]) / (right - apex_x)
    return out


def _tent_enclosed(
    x: np.ndarray, y: np.ndarray, apex_x: float, apex_y: float,
    left: float, right: float,
) -> int:
    return int(np.count_nonzero(y <= tent_value(x, apex_x, apex_y, left, right)))


def fundamental_points(slices: Sequence[MinuteSlice]) -> list[dict]:
    """Aligned (rho, q, v) triples, one per slice per direction."""
    return [
        {
            "direction": sl.direction,
            "index": sl.index,
            "rho_veh_km": sl.rho_veh_km,
            "q_veh_h": sl.q_veh_h,
            "v_kmh": sl.v_mean_space_kmh,
        }
        for sl in slices
    ]
