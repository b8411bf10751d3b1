"""Shared builders for unit tests: hand-made tracks and scripted scenarios."""

from __future__ import annotations

import numpy as np
import pytest

from trajcrit.model import LaneLayout, Recording, Track
from trajcrit.synth import LaneSwitch, Phase, ScenarioScript, VehicleScript

SIMPLE_LAYOUT = LaneLayout(
    upper=((1, "emergency"), (2, "right"), (3, "middle"), (4, "left")),
    lower=((8, "right"), (7, "middle"), (6, "left")),
)


def make_track(
    track_id: int = 1,
    x=None,
    v: float | np.ndarray = 30.0,
    a: float | np.ndarray = 0.0,
    lane: int = 8,
    n: int = 10,
    first_frame: int = 0,
    direction: str = "lower",
    length: float = 5.0,
    leader: int | np.ndarray = 0,
    thw_raw=None,
    ttc_raw=None,
    vehicle_class: str = "car",
    normalized: bool = True,
    y=None,
    v_y=None,
    a_y=None,
) -> Track:
    frames = np.arange(first_frame, first_frame + n, dtype=np.int64)
    if x is None:
        x = 100.0 + 1.2 * np.arange(n)
    x = np.asarray(x, dtype=float)
    n = x.size
    frames = np.arange(first_frame, first_frame + n, dtype=np.int64)

    def arr(value, default=0.0):
        if value is None:
            value = default
        out = np.asarray(value, dtype=float)
        if out.ndim == 0:
            out = np.full(n, float(out))
        return out

    def iarr(value):
        out = np.asarray(value)
        if out.ndim == 0:
            out = np.full(n, int(out))
        return out.astype(np.int64)

    zeros_i = np.zeros(n, dtype=np.int64)
    nan = np.full(n, np.nan)
    return Track(
        track_id=track_id,
        vehicle_class=vehicle_class,
        vehicle_length=length,
        vehicle_width=2.0,
        driving_direction=direction,
        frame_index=frames,
        x=x,
        y=arr(y, 30.0),
        v_x=arr(v),
        v_y=arr(v_y),
        a_x=arr(a),
        a_y=arr(a_y),
        lane_ids=iarr(lane),
        leader_ids=iarr(leader),
        follower_ids=zeros_i.copy(),
        left_preceding_ids=zeros_i.copy(),
        left_alongside_ids=zeros_i.copy(),
        left_following_ids=zeros_i.copy(),
        right_preceding_ids=zeros_i.copy(),
        right_alongside_ids=zeros_i.copy(),
        right_following_ids=zeros_i.copy(),
        dhw_raw=nan.copy(),
        thw_raw=nan.copy() if thw_raw is None else np.asarray(thw_raw, dtype=float),
        ttc_raw=nan.copy() if ttc_raw is None else np.asarray(ttc_raw, dtype=float),
        normalized=normalized,
    )


def make_recording(tracks, duration: float = 60.0, segment_length: float = 1000.0) -> Recording:
    return Recording(
        recording_id=1,
        frame_rate=25.0,
        location_id=1,
        speed_limit=120.0,
        lane_layout=SIMPLE_LAYOUT,
        segment_length=segment_length,
        duration=duration,
        tracks=tuple(tracks),
    )


def pair_script(
    v_follower: float,
    v_leader: float,
    gap0: float,
    duration: float,
    follower_phases: tuple[Phase, ...] = (),
    leader_phases: tuple[Phase, ...] = (),
    follower_lane_plan: tuple[LaneSwitch, ...] = (),
    follower_x0: float = 300.0,
    length: float = 5.0,
    lane_id: int = 2,
    segment_length: float = 5000.0,
    recording_id: int = 50,
    extra_vehicles: tuple[VehicleScript, ...] = (),
) -> ScenarioScript:
    """Leader/follower pair in synthetic script space (lane 2 = lower right)."""
    leader = VehicleScript(
        track_id=1,
        x0=follower_x0 + gap0 + length,
        v0=v_leader,
        lane_id=lane_id,
        length=length,
        phases=leader_phases,
    )
    follower = VehicleScript(
        track_id=2,
        x0=follower_x0,
        v0=v_follower,
        lane_id=lane_id,
        length=length,
        phases=follower_phases,
        lane_plan=follower_lane_plan,
    )
    from trajcrit.synth import SYNTH_LOCATION_2

    return ScenarioScript(
        kind="custom_pair",
        recording_id=recording_id,
        duration=duration,
        segment_length=segment_length,
        vehicles=(leader, follower) + extra_vehicles,
        location_id=SYNTH_LOCATION_2,
    )


def lone_script(
    v0: float,
    duration: float,
    phases: tuple[Phase, ...] = (),
    a_y_spans=(),
    x0: float = 100.0,
    segment_length: float = 5000.0,
    recording_id: int = 51,
) -> ScenarioScript:
    vehicle = VehicleScript(
        track_id=1, x0=x0, v0=v0, lane_id=2, phases=phases,
        a_y_spans=tuple(a_y_spans),
    )
    return ScenarioScript(
        kind="custom_lone",
        recording_id=recording_id,
        duration=duration,
        segment_length=segment_length,
        vehicles=(vehicle,),
    )


@pytest.fixture
def layout() -> LaneLayout:
    return SIMPLE_LAYOUT
