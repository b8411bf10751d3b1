"""Core domain types for trajectory recordings.

All analysis works on a canonical frame in which the driving direction is +x
and positions are front-bumper positions in meters. Raw dataset coordinates
(bounding-box corners, image orientation) exist only inside the ingestion
layer. Distances are meters, speeds m/s; km/h appears only at I/O boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Literal, Optional

import numpy as np

from .errors import DataError, LayoutError, SynchronizationError

Direction = Literal["upper", "lower"]
VehicleClass = Literal["car", "truck"]
LaneRole = Literal["right", "middle", "left", "acceleration", "emergency"]

DIRECTIONS: tuple[Direction, ...] = ("upper", "lower")

# Through lanes that count toward per-lane flow/density normalization.
MAIN_LANE_ROLES = frozenset({"right", "middle", "left"})

# Kinematic consistency bound: |x(t+1) - x(t) - v(t) dt| <= 0.5 a_max dt^2 + EPS_POS.
EPS_POS = 0.5


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LaneLayout:
    """Lane IDs and roles per driving direction, ordered rightmost to leftmost."""

    upper: tuple[tuple[int, LaneRole], ...]
    lower: tuple[tuple[int, LaneRole], ...]

    def __post_init__(self) -> None:
        upper_ids = [lane for lane, _ in self.upper]
        lower_ids = [lane for lane, _ in self.lower]
        all_ids = upper_ids + lower_ids
        if len(set(all_ids)) != len(all_ids):
            raise LayoutError(f"lane IDs not unique across directions: {all_ids}")

    def lanes(self, direction: Direction) -> tuple[tuple[int, LaneRole], ...]:
        return self.upper if direction == "upper" else self.lower

    def ids(self, direction: Direction) -> tuple[int, ...]:
        return tuple(lane for lane, _ in self.lanes(direction))

    def all_ids(self) -> frozenset[int]:
        return frozenset(self.ids("upper")) | frozenset(self.ids("lower"))

    def direction_of(self, lane_id: int) -> Direction:
        if lane_id in self.ids("upper"):
            return "upper"
        if lane_id in self.ids("lower"):
            return "lower"
        raise LayoutError(f"lane {lane_id} not present in layout")

    def role_of(self, lane_id: int) -> LaneRole:
        for lanes in (self.upper, self.lower):
            for lane, role in lanes:
                if lane == lane_id:
                    return role
        raise LayoutError(f"lane {lane_id} not present in layout")

    def index_of(self, lane_id: int) -> int:
        """Position of a lane within its direction, 0 = rightmost."""
        direction = self.direction_of(lane_id)
        return self.ids(direction).index(lane_id)

    def main_lane_count(self, direction: Direction) -> int:
        return sum(1 for _, role in self.lanes(direction) if role in MAIN_LANE_ROLES)


@dataclass(frozen=True)
class FrameState:
    """Scalar view of one vehicle at one frame (canonical coordinates)."""

    frame_index: int
    x: float
    y: float
    v_x: float
    v_y: float
    a_x: float
    a_y: float
    lane_id: int
    leader_id: Optional[int]
    follower_id: Optional[int]
    left_preceding_id: Optional[int]
    left_alongside_id: Optional[int]
    left_following_id: Optional[int]
    right_preceding_id: Optional[int]
    right_alongside_id: Optional[int]
    right_following_id: Optional[int]
    dhw_raw: Optional[float]
    thw_raw: Optional[float]
    ttc_raw: Optional[float]


@dataclass(frozen=True)
class LeaderGap:
    """Relative state of a follower/leader pair at one frame.

    x_r is the bumper-to-bumper gap (leader rear minus follower front); a
    negative gap marks corrupt geometry and is a cleaning flag, never an
    analysis input. v_r = v_f - v_l is positive when closing.
    """

    x_r: float
    v_r: float
    a_r: float
    leader_id: Optional[int]


@dataclass(frozen=True, eq=False)
class Track:
    """Per-vehicle time series in columnar form.

    Neighbor-id arrays use the dataset sentinel 0 for "absent"; raw measure
    columns use NaN for absent. Arrays are read-only after construction.
    """

    track_id: int
    vehicle_class: VehicleClass
    vehicle_length: float
    vehicle_width: float
    driving_direction: Direction
    frame_index: np.ndarray
    x: np.ndarray
    y: np.ndarray
    v_x: np.ndarray
    v_y: np.ndarray
    a_x: np.ndarray
    a_y: np.ndarray
    lane_ids: np.ndarray
    leader_ids: np.ndarray
    follower_ids: np.ndarray
    left_preceding_ids: np.ndarray
    left_alongside_ids: np.ndarray
    left_following_ids: np.ndarray
    right_preceding_ids: np.ndarray
    right_alongside_ids: np.ndarray
    right_following_ids: np.ndarray
    dhw_raw: np.ndarray
    thw_raw: np.ndarray
    ttc_raw: np.ndarray
    min_thw: Optional[float] = None
    min_ttc: Optional[float] = None
    min_dhw: Optional[float] = None
    normalized: bool = False
    trimmed: bool = False

    _ARRAY_FIELDS = (
        "frame_index", "x", "y", "v_x", "v_y", "a_x", "a_y", "lane_ids",
        "leader_ids", "follower_ids",
        "left_preceding_ids", "left_alongside_ids", "left_following_ids",
        "right_preceding_ids", "right_alongside_ids", "right_following_ids",
        "dhw_raw", "thw_raw", "ttc_raw",
    )

    def __post_init__(self) -> None:
        if self.vehicle_length <= 0:
            raise DataError(f"track {self.track_id}: vehicle_length must be > 0")
        frames = np.asarray(self.frame_index)
        if frames.size == 0:
            raise DataError(f"track {self.track_id}: empty frame list")
        if frames.size > 1 and not np.all(np.diff(frames) == 1):
            raise DataError(f"track {self.track_id}: frame indices not contiguous")
        for name in self._ARRAY_FIELDS:
            arr = _freeze(getattr(self, name))
            if arr.shape != frames.shape:
                raise DataError(f"track {self.track_id}: column {name} length mismatch")
            object.__setattr__(self, name, arr)

    @property
    def n_frames(self) -> int:
        return int(self.frame_index.size)

    @property
    def first_frame(self) -> int:
        return int(self.frame_index[0])

    @property
    def last_frame(self) -> int:
        return int(self.frame_index[-1])

    def frame_offset(self, frame: int) -> int:
        """Array offset of a global frame index; raises if outside the track."""
        off = frame - self.first_frame
        if off < 0 or off >= self.n_frames:
            raise DataError(f"track {self.track_id}: frame {frame} outside track")
        return off

    def state(self, offset: int) -> FrameState:
        def opt_id(arr: np.ndarray) -> Optional[int]:
            v = int(arr[offset])
            return v if v != 0 else None

        def opt_val(arr: np.ndarray) -> Optional[float]:
            v = float(arr[offset])
            return v if np.isfinite(v) else None

        return FrameState(
            frame_index=int(self.frame_index[offset]),
            x=float(self.x[offset]),
            y=float(self.y[offset]),
            v_x=float(self.v_x[offset]),
            v_y=float(self.v_y[offset]),
            a_x=float(self.a_x[offset]),
            a_y=float(self.a_y[offset]),
            lane_id=int(self.lane_ids[offset]),
            leader_id=opt_id(self.leader_ids),
            follower_id=opt_id(self.follower_ids),
            left_preceding_id=opt_id(self.left_preceding_ids),
            left_alongside_id=opt_id(self.left_alongside_ids),
            left_following_id=opt_id(self.left_following_ids),
            right_preceding_id=opt_id(self.right_preceding_ids),
            right_alongside_id=opt_id(self.right_alongside_ids),
            right_following_id=opt_id(self.right_following_ids),
            dhw_raw=opt_val(self.dhw_raw),
            thw_raw=opt_val(self.thw_raw),
            ttc_raw=opt_val(self.ttc_raw),
        )

    def frames(self) -> Iterator[FrameState]:
        for i in range(self.n_frames):
            yield self.state(i)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Track):
            return NotImplemented
        scalar = (
            self.track_id, self.vehicle_class, self.vehicle_length,
            self.vehicle_width, self.driving_direction,
            self.min_thw, self.min_ttc, self.min_dhw,
            self.normalized, self.trimmed,
        )
        other_scalar = (
            other.track_id, other.vehicle_class, other.vehicle_length,
            other.vehicle_width, other.driving_direction,
            other.min_thw, other.min_ttc, other.min_dhw,
            other.normalized, other.trimmed,
        )
        if scalar != other_scalar:
            return False
        return all(
            np.array_equal(getattr(self, name), getattr(other, name), equal_nan=True)
            for name in self._ARRAY_FIELDS
        )


@dataclass(frozen=True, eq=False)
class Recording:
    """One drone video: geometry, lane layout and the track collection."""

    recording_id: int
    frame_rate: float
    location_id: int
    speed_limit: Optional[float]  # km/h, None = unlimited
    lane_layout: LaneLayout
    segment_length: float  # l_r in meters
    duration: float  # seconds
    tracks: tuple[Track, ...]
    cleaned: bool = False
    _by_id: dict = field(init=False, repr=False, compare=False, default_factory=dict)

    def __post_init__(self) -> None:
        if self.frame_rate <= 0:
            raise DataError("frame_rate must be > 0")
        if self.segment_length <= 0:
            raise DataError("segment_length must be > 0")
        known = self.lane_layout.all_ids()
        for track in self.tracks:
            used = set(np.unique(track.lane_ids).tolist())
            if not used <= known:
                raise LayoutError(
                    f"track {track.track_id} uses lane IDs {sorted(used - known)} "
                    f"missing from layout"
                )
        object.__setattr__(self, "_by_id", {t.track_id: t for t in self.tracks})

    @property
    def dt(self) -> float:
        return 1.0 / self.frame_rate

    def track(self, track_id: int) -> Optional[Track]:
        return self._by_id.get(track_id)

    def tracks_in_direction(self, direction: Direction) -> tuple[Track, ...]:
        return tuple(t for t in self.tracks if t.driving_direction == direction)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Recording):
            return NotImplemented
        return (
            self.recording_id == other.recording_id
            and self.frame_rate == other.frame_rate
            and self.location_id == other.location_id
            and self.speed_limit == other.speed_limit
            and self.lane_layout == other.lane_layout
            and self.segment_length == other.segment_length
            and self.duration == other.duration
            and self.cleaned == other.cleaned
            and self.tracks == other.tracks
        )


def normalize_direction(track: Track, layout: LaneLayout) -> Track:
    """Express longitudinal quantities in the vehicle's driving direction.

    Upper-road vehicles travel in decreasing raw x, so x, v_x and a_x are
    mirrored; after normalization forward speed is >= 0 for sane data and
    positive a_x means speeding up. Idempotent.
    """
    used = set(np.unique(track.lane_ids).tolist())
    known = layout.all_ids()
    if not used <= known:
        raise LayoutError(
            f"track {track.track_id} uses unknown lane IDs {sorted(used - known)}"
        )
    if track.normalized:
        return track
    if track.driving_direction == "lower":
        return replace(track, normalized=True)
    return replace(
        track,
        x=-track.x,
        v_x=-track.v_x,
        a_x=-track.a_x,
        normalized=True,
    )


def leader_gap(frame: FrameState, leader_frame: FrameState, leader_length: float) -> LeaderGap:
    """Relative gap/velocity/acceleration for a synchronized follower/leader pair."""
    if frame.frame_index != leader_frame.frame_index:
        raise SynchronizationError(
            f"frame mismatch: follower at {frame.frame_index}, "
            f"leader at {leader_frame.frame_index}"
        )
    return LeaderGap(
        x_r=(leader_frame.x - leader_length) - frame.x,
        v_r=frame.v_x - leader_frame.v_x,
        a_r=frame.a_x - leader_frame.a_x,
        leader_id=frame.leader_id,
    )


def track_duration(track: Track, frame_rate: float) -> float:
    """Visible duration in seconds, counting both end frames."""
    return (track.last_frame - track.first_frame + 1) / frame_rate


def kinematic_violations(track: Track, a_max: float, dt: float) -> np.ndarray:
    """Offsets i where the step x[i] -> x[i+1] is inconsistent with v_x[i].

    Bound: |x(t+1) - x(t) - v(t) dt| <= 0.5 a_max dt^2 + EPS_POS.
    """
    if track.n_frames < 2:
        return np.array([], dtype=np.int64)
    residual = np.abs(np.diff(track.x) - track.v_x[:-1] * dt)
    bound = 0.5 * a_max * dt * dt + EPS_POS
    return np.flatnonzero(residual > bound)
