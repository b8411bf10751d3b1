"""Critical-scenario analysis: occurrence tables, rule-based classifiers,
context-binned distributions, THW-undercut durations, the TTC~6s braking
analysis and the RP parameter study.

Only the most critical scenario per vehicle counts: every classifier emits at
most one event per (track, rule), placed at the extremal frame of the rule's
key measure.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError
from .macro import LaneChangeEvent
from .measures import MeasureSeries
from .model import Track

G = 9.81  # m/s^2
FT_100 = 30.48  # m
KMH = 3.6

DEFAULT_THW_BOUNDS = (2.0, 1.0, 2.0 / 3.0, 0.5, 0.4, 0.25, 0.2)
DEFAULT_TTC_BOUNDS = (8.0, 4.0, 2.0, 1.0, 0.8, 0.4, 0.2)

# Context bins: the lowest velocity bin spans [0, 30) km/h.
DEFAULT_VELOCITY_EDGES = (0.0, 30.0, 60.0, 90.0, 120.0, 150.0, 180.0)
DEFAULT_AX_EDGES = (-6.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 6.0)
DEFAULT_AY_EDGES = (-2.0, -1.0, -0.5, -0.2, 0.0, 0.2, 0.5, 1.0, 2.0)
DEFAULT_THW_ROW_EDGES = (0.0, 0.2, 0.25, 0.4, 0.5, 2.0 / 3.0, 1.0)
DEFAULT_TTC_ROW_EDGES = (0.0, 0.2, 0.4, 0.8, 1.0, 2.0, 4.0, 8.0)

CONTEXT_HALF_WINDOW_S = 0.5
LANE_CHANGE_HORIZON_S = 2.0
CAR_FOLLOWING_THW_MAX = 5.0  # beyond this, free flow


@dataclass(frozen=True)
class Condition:
    """Inclusive interval constraint on one per-frame variable.

    Absent (NaN) values never satisfy a condition. With use_abs the bound
    applies to |value|; min_open/max_open make a bound strict.
    """

    var: str  # thw | ttc | dhw | a_x | a_y | v | v_r
    minimum: Optional[float] = None
    maximum: Optional[float] = None
    use_abs: bool = False
    min_open: bool = False
    max_open: bool = False

    def mask(self, variables: dict[str, np.ndarray]) -> np.ndarray:
        values = variables[self.var]
        if self.use_abs:
            values = np.abs(values)
        ok = np.isfinite(values)
        if self.minimum is not None:
            ok &= (values > self.minimum) if self.min_open else (values >= self.minimum)
        if self.maximum is not None:
            ok &= (values < self.maximum) if self.max_open else (values <= self.maximum)
        return ok


@dataclass(frozen=True)
class TriggerRule:
    rule_id: str
    source: str  # benmimoun | cars100 | custom
    conditions: tuple[Condition, ...]
    key_var: str
    key_mode: str  # min | max_abs

    def __post_init__(self) -> None:
        for cond in self.conditions:
            for bound in (cond.minimum, cond.maximum):
                if bound is not None and not np.isfinite(bound):
                    raise ConfigError(f"rule {self.rule_id}: non-finite threshold")


# Table-IV trigger set; TTC conditions require a positive (closing) TTC.
CARS100_RULES: tuple[TriggerRule, ...] = (
    TriggerRule(
        "cars100_ay", "cars100",
        (Condition("a_y", minimum=0.7 * G, use_abs=True),),
        key_var="a_y", key_mode="max_abs",
    ),
    TriggerRule(
        "cars100_ax", "cars100",
        (Condition("a_x", minimum=0.6 * G, use_abs=True),),
        key_var="a_x", key_mode="max_abs",
    ),
    TriggerRule(
        "cars100_ttc_accel", "cars100",
        (Condition("ttc", minimum=0.0, min_open=True, maximum=4.0),
         Condition("a_x", minimum=0.5 * G)),
        key_var="ttc", key_mode="min",
    ),
    TriggerRule(
        "cars100_ttc_brake", "cars100",
        (Condition("ttc", minimum=0.0, min_open=True, maximum=4.0),
         Condition("a_x", maximum=-0.5 * G)),
        key_var="ttc", key_mode="min",
    ),
    TriggerRule(
        "cars100_ttc_accel_dhw", "cars100",
        (Condition("ttc", minimum=0.0, min_open=True, maximum=4.0),
         Condition("a_x", minimum=0.4 * G, maximum=0.5 * G),
         Condition("dhw", maximum=FT_100)),
        key_var="ttc", key_mode="min",
    ),
    TriggerRule(
        "cars100_ttc_brake_dhw", "cars100",
        (Condition("ttc", minimum=0.0, min_open=True, maximum=4.0),
         Condition("a_x", minimum=-0.5 * G, maximum=-0.4 * G),
         Condition("dhw", maximum=FT_100)),
        key_var="ttc", key_mode="min",
    ),
)


@dataclass(frozen=True)
class BenmimounLevel:
    level: int
    threshold: float  # measure bound (TTC or THW, seconds)
    companion: Optional[float]  # braking a_x bound resp. v_r minimum (km/h)


@dataclass(frozen=True)
class BenmimounConfig:
    """Risk-level rules: TTC levels pair with a braking proxy, THW levels with
    a relative-velocity minimum. Only level 1 is text-recoverable; higher
    levels and the acceleration level shifts are config placeholders.
    """

    ttc_levels: tuple[BenmimounLevel, ...] = (
        BenmimounLevel(level=1, threshold=1.75, companion=-1.5),
    )
    thw_levels: tuple[BenmimounLevel, ...] = (
        BenmimounLevel(level=1, threshold=0.35, companion=20.0),
    )

    @classmethod
    def from_dict(cls, data: dict) -> "BenmimounConfig":
        def levels(key: str) -> tuple[BenmimounLevel, ...]:
            out = []
            for item in data.get(key, []):
                if "level" not in item or "threshold" not in item:
                    raise ConfigError(f"benmimoun {key}: need level and threshold")
                out.append(BenmimounLevel(
                    level=int(item["level"]),
                    threshold=float(item["threshold"]),
                    companion=(
                        float(item["companion"]) if item.get("companion") is not None
                        else None
                    ),
                ))
            return tuple(out)

        cfg = cls()
        return cls(
            ttc_levels=levels("ttc_levels") or cfg.ttc_levels,
            thw_levels=levels("thw_levels") or cfg.thw_levels,
        )


@dataclass(frozen=True)
class RiskEvent:
    track_id: int
    rule_id: str
    critical_frame: int
    measure_value: float
    context_v_kmh: float
    context_a_x: float
    context_a_y: float
    lane_change_within_2s: bool
    lane_change_within_pm4s: bool

    def to_dict(self) -> dict:
        return {
            "track_id": self.track_id,
            "rule_id": self.rule_id,
            "critical_frame": self.critical_frame,
            "measure_value": self.measure_value,
            "context_v_kmh": self.context_v_kmh,
            "context_a_x": self.context_a_x,
            "context_a_y": self.context_a_y,
            "lane_change_within_2s": self.lane_change_within_2s,
            "lane_change_within_pm4s": self.lane_change_within_pm4s,
        }


def _variables(track: Track, series: MeasureSeries) -> dict[str, np.ndarray]:
    return {
        "thw": series.thw,
        "ttc": series.ttc,
        "dhw": series.dhw,
        "a_x": track.a_x,
        "a_y": track.a_y,
        "v": track.v_x,
        "v_r": series.v_r,
    }


def _context_means(track: Track, frame: int, frame_rate: float) -> tuple[float, float, float]:
    """Means of v (km/h), a_x, a_y over +-0.5 s around the frame, clipped."""
    half = int(round(CONTEXT_HALF_WINDOW_S * frame_rate))
    off = frame - track.first_frame
    lo = max(off - half, 0)
    hi = min(off + half + 1, track.n_frames)
    return (
        float(np.mean(track.v_x[lo:hi])) * KMH,
        float(np.mean(track.a_x[lo:hi])),
        float(np.mean(track.a_y[lo:hi])),
    )


def annotate_lane_change(
    critical_frame: int,
    track: Track,
    lane_changes: Sequence[LaneChangeEvent],
    horizon_s: float,
    frame_rate: float,
    two_sided: bool = False,
) -> bool:
    """True iff the track changes lanes within the horizon of the frame.

    One-sided windows look only after the critical frame; both get clipped to
    the visible range (leaving the view counts as no lane change).
    """
    horizon = int(round(horizon_s * frame_rate))
    lo = critical_frame - horizon if two_sided else critical_frame + 1
    hi = critical_frame + horizon
    lo = max(lo, track.first_frame)
    hi = min(hi, track.last_frame)
    return any(
        e.track_id == track.track_id and lo <= e.frame_index <= hi
        for e in lane_changes
    )


def _make_event(
    track: Track,
    rule_id: str,
    frame: int,
    value: float,
    lane_changes: Sequence[LaneChangeEvent],
    frame_rate: float,
) -> RiskEvent:
    v_kmh, a_x, a_y = _context_means(track, frame, frame_rate)
    return RiskEvent(
        track_id=track.track_id,
        rule_id=rule_id,
        critical_frame=frame,
        measure_value=value,
        context_v_kmh=v_kmh,
        context_a_x=a_x,
        context_a_y=a_y,
        lane_change_within_2s=annotate_lane_change(
            frame, track, lane_changes, LANE_CHANGE_HORIZON_S, frame_rate
        ),
        lane_change_within_pm4s=annotate_lane_change(
            frame, track, lane_changes, 4.0, frame_rate, two_sided=True
        ),
    )


def classify_benmimoun(
    track: Track,
    series: MeasureSeries,
    lane_changes: Sequence[LaneChangeEvent],
    frame_rate: float,
    config: BenmimounConfig = BenmimounConfig(),
) -> list[RiskEvent]:
    """Risk-level events evaluated at the track's most critical frame.

    TTC level: minimum positive TTC under the threshold with the braking
    proxy (a_x at the critical frame at or below the companion bound). THW
    level: minimum THW under the threshold with the closing speed at the
    critical frame at or above the companion bound (km/h).
    """
    events: list[RiskEvent] = []
    pos_ttc = np.where(series.ttc > 0, series.ttc, np.nan)
    if np.any(np.isfinite(pos_ttc)):
        best = np.nanmin(pos_ttc)
        off = int(np.flatnonzero(pos_ttc == best)[0])
        frame = int(series.frame_index[off])
        for level in config.ttc_levels:
            if best <= level.threshold and (
                level.companion is None or float(track.a_x[off]) <= level.companion
            ):
                events.append(_make_event(
                    track, f"benmimoun_ttc_l{level.level}", frame, float(best),
                    lane_changes, frame_rate,
                ))
    if np.any(np.isfinite(series.thw)):
        best = np.nanmin(series.thw)
        off = int(np.flatnonzero(series.thw == best)[0])
        frame = int(series.frame_index[off])
        v_r_kmh = float(series.v_r[off]) * KMH
        for level in config.thw_levels:
            if best <= level.threshold and (
                level.companion is None
                or (np.isfinite(series.v_r[off]) and v_r_kmh >= level.companion)
            ):
                events.append(_make_event(
                    track, f"benmimoun_thw_l{level.level}", frame, float(best),
                    lane_changes, frame_rate,
                ))
    return events


def eval_cars100_triggers(
    track: Track,
    series: MeasureSeries,
    lane_changes: Sequence[LaneChangeEvent],
    frame_rate: float,
    rules: tuple[TriggerRule, ...] = CARS100_RULES,
) -> list[RiskEvent]:
    """Per-frame predicate triggers; the event sits at the extremal satisfying frame."""
    variables = _variables(track, series)
    events: list[RiskEvent] = []
    for rule in rules:
        mask = np.ones(track.n_frames, dtype=bool)
        for cond in rule.conditions:
            mask &= cond.mask(variables)
        if not np.any(mask):
            continue
        key = variables[rule.key_var]
        if rule.key_mode == "max_abs":
            key = np.abs(key)
            candidates = np.where(mask, key, -np.inf)
            off = int(np.argmax(candidates))
        else:
            candidates = np.where(mask, key, np.inf)
            off = int(np.argmin(candidates))
        events.append(_make_event(
            track, rule.rule_id, int(series.frame_index[off]),
            float(variables[rule.key_var][off]), lane_changes, frame_rate,
        ))
    return events


@dataclass
class OccurrenceTable:
    m: int
    thw: list[dict] = field(default_factory=list)
    ttc: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"m": self.m, "thw": self.thw, "ttc": self.ttc}


def count_threshold_occurrences(
    tracks: Sequence[Track],
    thw_bounds: Sequence[float] = DEFAULT_THW_BOUNDS,
    ttc_bounds: Sequence[float] = DEFAULT_TTC_BOUNDS,
) -> OccurrenceTable:
    """Tracks with min THW <= bound resp. 0 < min positive TTC <= bound."""
    m = len(tracks)
    thw_minima = np.array(
        [t.min_thw if t.min_thw is not None else np.nan for t in tracks]
    )
    ttc_minima = np.array(
        [t.min_ttc if t.min_ttc is not None else np.nan for t in tracks]
    )
    table = OccurrenceTable(m=m)
    for bound in thw_bounds:
        count = int(np.count_nonzero(thw_minima <= bound))
        table.thw.append({
            "bound": bound, "count": count,
            "pct": 100.0 * count / m if m else 0.0,
        })
    for bound in ttc_bounds:
        count = int(np.count_nonzero((ttc_minima > 0) & (ttc_minima <= bound)))
        table.ttc.append({
            "bound": bound, "count": count,
            "pct": 100.0 * count / m if m else 0.0,
        })
    return table


@dataclass(frozen=True)
class MinimaEvent:
    """Per-track most-critical observation with its +-0.5 s context."""

    track_id: int
    measure: str  # thw | ttc
    value: float
    frame: int
    context_v_kmh: float
    context_a_x: float
    context_a_y: float


def minima_events(
    tracks: Sequence[Track],
    series: dict[int, MeasureSeries],
    measure: str,
    frame_rate: float,
) -> list[MinimaEvent]:
    """One event per track at its minimum THW (or minimum positive TTC) frame."""
    if measure not in ("thw", "ttc"):
        raise ConfigError(f"unknown minima measure {measure!r}")
    events: list[MinimaEvent] = []
    for track in tracks:
        ser = series.get(track.track_id)
        if ser is None:
            continue
        values = ser.thw if measure == "thw" else np.where(ser.ttc > 0, ser.ttc, np.nan)
        if not np.any(np.isfinite(values)):
            continue
        best = np.nanmin(values)
        off = int(np.flatnonzero(values == best)[0])
        frame = int(ser.frame_index[off])
        v_kmh, a_x, a_y = _context_means(track, frame, frame_rate)
        events.append(MinimaEvent(
            track_id=track.track_id, measure=measure, value=float(best),
            frame=frame, context_v_kmh=v_kmh, context_a_x=a_x, context_a_y=a_y,
        ))
    return events


@dataclass
class ContextBinTable:
    dimension: str
    measure: str
    row_edges: list[float]
    col_edges: list[float]
    percentages: list[list[float]]  # row-normalized to 100
    row_n: list[int]

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "measure": self.measure,
            "row_edges": self.row_edges,
            "col_edges": self.col_edges,
            "percentages": self.percentages,
            "row_n": self.row_n,
        }


def context_bins(
    events: Sequence[MinimaEvent],
    dimension: str,
    measure: str,
    row_edges: Optional[Sequence[float]] = None,
    col_edges: Optional[Sequence[float]] = None,
) -> ContextBinTable:
    """Rows = measure ranges, columns = context bins; each row sums to 100%.

    The final context bin is open to the right (and the first open to the
    left for acceleration dimensions); empty rows stay all-zero with n=0.
    """
    if dimension not in ("velocity", "a_x", "a_y"):
        raise ConfigError(f"unknown context dimension {dimension!r}")
    if row_edges is None:
        row_edges = DEFAULT_THW_ROW_EDGES if measure == "thw" else DEFAULT_TTC_ROW_EDGES
    if col_edges is None:
        col_edges = {
            "velocity": DEFAULT_VELOCITY_EDGES,
            "a_x": DEFAULT_AX_EDGES,
            "a_y": DEFAULT_AY_EDGES,
        }[dimension]
    row_edges = list(row_edges)
    col_edges = list(col_edges)
    n_rows = len(row_edges) - 1
    n_cols = len(col_edges)  # last bin open-ended to the right
    counts = np.zeros((n_rows, n_cols), dtype=np.int64)
    attr = {
        "velocity": "context_v_kmh", "a_x": "context_a_x", "a_y": "context_a_y",
    }[dimension]
    for event in events:
        if event.measure != measure:
            continue
        row = np.searchsorted(row_edges, event.value, side="left") - 1
        if event.value == row_edges[0]:
            row = 0
        if not 0 <= row < n_rows:
            continue
        ctx = getattr(event, attr)
        col = int(np.searchsorted(col_edges, ctx, side="right") - 1)
        col = min(max(col, 0), n_cols - 1)
        counts[row, col] += 1
    percentages = []
    row_n = []
    for r in range(n_rows):
        total = int(np.sum(counts[r]))
        row_n.append(total)
        if total == 0:
            percentages.append([0.0] * n_cols)
        else:
            percentages.append([100.0 * c / total for c in counts[r]])
    return ContextBinTable(
        dimension=dimension, measure=measure,
        row_edges=row_edges, col_edges=col_edges,
        percentages=percentages, row_n=row_n,
    )


@dataclass
class UndercutResult:
    threshold: float
    v_min_kmh: float
    n_tracks: int
    max_durations: dict[int, float]  # track -> longest undercut episode (s)
    share_ge_1s: float
    share_gt_5s: float

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "v_min_kmh": self.v_min_kmh,
            "n_tracks": self.n_tracks,
            "durations": sorted(self.max_durations.values()),
            "share_ge_1s": self.share_ge_1s,
            "share_gt_5s": self.share_gt_5s,
        }


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal [start, end) runs of consecutive True."""
    if not np.any(mask):
        return []
    padded = np.concatenate(([False], mask, [False]))
    diff = np.diff(padded.astype(np.int8))
    starts = np.flatnonzero(diff == 1)
    ends = np.flatnonzero(diff == -1)
    return list(zip(starts.tolist(), ends.tolist()))


def thw_undercut_durations(
    tracks: Sequence[Track],
    series: dict[int, MeasureSeries],
    frame_rate: float,
    threshold: float = 0.9,
    v_min_kmh: float = 30.0,
    car_following_max: float = CAR_FOLLOWING_THW_MAX,
) -> UndercutResult:
    """Longest per-track episode below the THW threshold during car-following.

    Episodes are contiguous runs of frames with THW <= threshold (and < the
    car-following bound); an episode counts only if its mean velocity is at
    least v_min. Shares are over all tracks passed in.
    """
    v_min = v_min_kmh / KMH
    max_durations: dict[int, float] = {}
    for track in tracks:
        ser = series.get(track.track_id)
        if ser is None:
            continue
        below = (
            np.isfinite(ser.thw)
            & (ser.thw < car_following_max)
            & (ser.thw <= threshold)
        )
        longest = 0.0
        for start, end in _runs(below):
            if float(np.mean(track.v_x[start:end])) < v_min:
                continue
            longest = max(longest, (end - start) / frame_rate)
        if longest > 0:
            max_durations[track.track_id] = longest
    n = len(tracks)
    ge_1 = sum(1 for d in max_durations.values() if d >= 1.0)
    gt_5 = sum(1 for d in max_durations.values() if d > 5.0)
    return UndercutResult(
        threshold=threshold, v_min_kmh=v_min_kmh, n_tracks=n,
        max_durations=max_durations,
        share_ge_1s=ge_1 / n if n else 0.0,
        share_gt_5s=gt_5 / n if n else 0.0,
    )


@dataclass
class Ttc6Result:
    band: tuple[float, float]
    follow_s: float
    selected: int
    share_decelerating: float
    share_active_braking: float
    mean_ax_decelerating: Optional[float]
    mean_ax_active_braking: Optional[float]

    def to_dict(self) -> dict:
        return {
            "band": list(self.band),
            "follow_s": self.follow_s,
            "selected": self.selected,
            "share_decelerating": self.share_decelerating,
            "share_active_braking": self.share_active_braking,
            "mean_ax_decelerating": self.mean_ax_decelerating,
            "mean_ax_active_braking": self.mean_ax_active_braking,
        }


def ttc6_brake_analysis(
    tracks: Sequence[Track],
    series: dict[int, MeasureSeries],
    frame_rate: float,
    band: tuple[float, float] = (5.5, 6.5),
    follow_s: float = 4.0,
    active_brake: float = -1.5,
) -> Ttc6Result:
    """Reaction after first entering TTC = 6.0 +- 0.5 s with 4 s of tailgating.

    Selected tracks enter the TTC band and stay in car-following for the
    following window; shares report minimum a_x < 0 and < the active-braking
    bound inside that window, with the mean minimum deceleration per group.
    """
    window = int(round(follow_s * frame_rate))
    selected = 0
    decel_minima = []
    brake_minima = []
    for track in tracks:
        ser = series.get(track.track_id)
        if ser is None:
            continue
        in_band = np.isfinite(ser.ttc) & (ser.ttc >= band[0]) & (ser.ttc <= band[1])
        hits = np.flatnonzero(in_band)
        if hits.size == 0:
            continue
        start = int(hits[0])
        end = start + window
        if end >= track.n_frames:
            continue
        following = np.isfinite(ser.thw[start:end + 1]) & (
            ser.thw[start:end + 1] < CAR_FOLLOWING_THW_MAX
        )
        if not np.all(following):
            continue
        selected += 1
        a_min = float(np.min(track.a_x[start:end + 1]))
        if a_min < 0:
            decel_minima.append(a_min)
            if a_min < active_brake:
                brake_minima.append(a_min)
    return Ttc6Result(
        band=band, follow_s=follow_s, selected=selected,
        share_decelerating=len(decel_minima) / selected if selected else 0.0,
        share_active_braking=len(brake_minima) / selected if selected else 0.0,
        mean_ax_decelerating=float(np.mean(decel_minima)) if decel_minima else None,
        mean_ax_active_braking=float(np.mean(brake_minima)) if brake_minima else None,
    )


@dataclass(frozen=True)
class RpStudyConfig:
    a: float = 1.0
    b_values: tuple[float, ...] = tuple(float(b) for b in range(1, 11))
    thresholds: tuple[float, ...] = tuple(0.5 * k for k in range(1, 11))
    tailgate_s: float = 4.0  # same leader required this long before AND after
    brake_window_s: float = 0.2
    brake_thresholds: tuple[float, float] = (0.0, -1.5)
    s214_b: float = 4.0
    s214_threshold: float = 2.0

    def __post_init__(self) -> None:
        if not self.b_values or not self.thresholds:
            raise ConfigError("RP study grids must be non-empty")
        if self.tailgate_s <= 0 or self.brake_window_s <= 0:
            raise ConfigError("RP study windows must be positive")


@dataclass
class RpStudyResult:
    config: RpStudyConfig
    m_tailgate: int
    counts: list[list[int]]  # [b][threshold]
    s214: dict

    def to_dict(self) -> dict:
        return {
            "a": self.config.a,
            "b_values": list(self.config.b_values),
            "thresholds": list(self.config.thresholds),
            "tailgate_s": self.config.tailgate_s,
            "m_tailgate": self.m_tailgate,
            "counts": self.counts,
            "s214": self.s214,
        }


def _qualified_mask(track: Track, series: MeasureSeries, window: int) -> np.ndarray:
    """Frames whose +-window neighborhood keeps the same (present) leader."""
    n = track.n_frames
    ok = np.zeros(n, dtype=bool)
    leader = track.leader_ids
    boundaries = np.flatnonzero(np.diff(leader) != 0)
    starts = np.concatenate(([0], boundaries + 1))
    ends = np.concatenate((boundaries, [n - 1]))
    for s, e in zip(starts, ends):
        if leader[s] == 0:
            continue
        lo = s + window
        hi = e - window
        if hi >= lo:
            ok[lo:hi + 1] = True
    return ok


def rp_study(
    tracks: Sequence[Track],
    series: dict[int, MeasureSeries],
    lane_changes: Sequence[LaneChangeEvent],
    frame_rate: float,
    config: RpStudyConfig = RpStudyConfig(),
) -> RpStudyResult:
    """Occurrence grid over (B, RP threshold) plus the S_RP214 braking study.

    A frame qualifies when the same leader is present for the tailgate span
    before and after it; per track and B the critical frame maximizes
    RP = A/THW + B/TTC over qualified closing frames.
    """
    window = int(round(config.tailgate_s * frame_rate))
    brake_window = int(round(config.brake_window_s * frame_rate))
    b_values = config.b_values
    thresholds = config.thresholds
    counts = np.zeros((len(b_values), len(thresholds)), dtype=np.int64)
    m_tailgate = 0

    s214_members: list[tuple[Track, int]] = []  # (track, critical frame offset)
    for track in tracks:
        ser = series.get(track.track_id)
        if ser is None:
            continue
        qualified = _qualified_mask(track, ser, window)
        usable = (
            qualified & np.isfinite(ser.thw) & np.isfinite(ser.ttc) & (ser.ttc > 0)
        )
        if np.any(qualified):
            m_tailgate += 1
        if not np.any(usable):
            continue
        inv_thw = 1.0 / ser.thw[usable]
        inv_ttc = 1.0 / ser.ttc[usable]
        offsets = np.flatnonzero(usable)
        for bi, b in enumerate(b_values):
            rp_vals = config.a * inv_thw + b * inv_ttc
            best = float(np.max(rp_vals))
            for ti, threshold in enumerate(thresholds):
                if best >= threshold:
                    counts[bi, ti] += 1
            if b == config.s214_b and best >= config.s214_threshold:
                off = int(offsets[np.argmax(rp_vals)])
                s214_members.append((track, off))

    m214 = len(s214_members)
    neg_cut, brake_cut = config.brake_thresholds
    neg_members: list[tuple[Track, int]] = []
    brake_members: list[tuple[Track, int]] = []
    for track, off in s214_members:
        hi = min(off + brake_window + 1, track.n_frames)
        a_min = float(np.min(track.a_x[off:hi]))
        if a_min <= neg_cut:
            neg_members.append((track, off))
        if a_min <= brake_cut:
            brake_members.append((track, off))

    def lc_count(members: list[tuple[Track, int]]) -> int:
        return sum(
            1 for track, off in members
            if annotate_lane_change(
                int(track.frame_index[off]), track, lane_changes,
                config.tailgate_s, frame_rate, two_sided=True,
            )
        )

    lc_neg = lc_count(neg_members)
    lc_brake = lc_count(brake_members)
    s214 = {
        "m": m214,
        "braking_neg_count": len(neg_members),
        "braking_neg_share": len(neg_members) / m214 if m214 else 0.0,
        "active_braking_count": len(brake_members),
        "active_braking_share": len(brake_members) / m214 if m214 else 0.0,
        "lane_change_neg_count": lc_neg,
        "lane_change_neg_share_of_group": (
            lc_neg / len(neg_members) if neg_members else 0.0
        ),
        "lane_change_neg_share_of_m": lc_neg / m214 if m214 else 0.0,
        "lane_change_brake_count": lc_brake,
        "lane_change_brake_share_of_group": (
            lc_brake / len(brake_members) if brake_members else 0.0
        ),
        "lane_change_brake_share_of_m": lc_brake / m214 if m214 else 0.0,
    }
    return RpStudyResult(
        config=config, m_tailgate=m_tailgate,
        counts=[[int(c) for c in row] for row in counts],
        s214=s214,
    )


def export_events_csv(events: Sequence[RiskEvent], path: str | Path) -> Path:
    """Event table: track, rule, frame, measure value, context, annotations."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "track_id", "rule_id", "critical_frame", "measure_value",
            "context_v_kmh", "context_a_x", "context_a_y",
            "lane_change_within_2s", "lane_change_within_pm4s",
        ])
        for e in sorted(events, key=lambda e: (e.track_id, e.rule_id)):
            writer.writerow([
                e.track_id, e.rule_id, e.critical_frame, repr(e.measure_value),
                repr(e.context_v_kmh), repr(e.context_a_x), repr(e.context_a_y),
                int(e.lane_change_within_2s), int(e.lane_change_within_pm4s),
            ])
    return path


def load_ruleset(path: str | Path) -> dict:
    """Custom rules file: benmimoun levels and/or generic trigger rules."""
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: ruleset must be a JSON object")
    out: dict = {}
    if "benmimoun" in data:
        out["benmimoun"] = BenmimounConfig.from_dict(data["benmimoun"])
    if "triggers" in data:
        rules = []
        for item in data["triggers"]:
            try:
                conditions = tuple(
                    Condition(
                        var=c["var"],
                        minimum=c.get("min"),
                        maximum=c.get("max"),
                        use_abs=bool(c.get("abs", False)),
                        min_open=bool(c.get("min_open", False)),
                        max_open=bool(c.get("max_open", False)),
                    )
                    for c in item["conditions"]
                )
                rules.append(TriggerRule(
                    rule_id=item["rule_id"],
                    source=item.get("source", "custom"),
                    conditions=conditions,
                    key_var=item["key_var"],
                    key_mode=item.get("key_mode", "min"),
                ))
            except KeyError as err:
                raise ConfigError(f"{path}: trigger rule missing {err}") from err
        out["triggers"] = tuple(rules)
    return out
