"""Data-quality rules: trim corrupted last frames, discard implausible tracks.

Rules (defaults configurable):
  TRIM_EMPTY  single-frame track cannot survive the last-frame trim
  R1          any frame with a negative raw THW (standstill artifact)
  R2          |a_x| or |a_y| beyond the plausibility caps
  R3          kinematic consistency violated on more than k frames
  R4          driving direction inconsistent with the lane layout

Tracks with a recomputed minimum TTC at or below the review threshold are
flagged for manual-review export, never discarded.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DataError
from .model import Recording, Track, kinematic_violations

RULE_TRIM_EMPTY = "TRIM_EMPTY"
RULE_NEGATIVE_THW = "R1"
RULE_IMPLAUSIBLE_ACCEL = "R2"
RULE_KINEMATIC = "R3"
RULE_WRONG_DIRECTION = "R4"

STANDSTILL_SPEED = 1.0 / 3.6  # 1 km/h in m/s


@dataclass(frozen=True)
class RuleConfig:
    a_x_cap: float = 8.0  # m/s^2, beyond the observed extreme of 6.3
    a_y_cap: float = 4.0  # m/s^2
    kinematic_max_violations: int = 3
    ttc_review_threshold: float = 0.8  # s


DEFAULT_RULES = RuleConfig()


@dataclass(frozen=True)
class Discard:
    track_id: int
    rule_id: str
    evidence: str


@dataclass(frozen=True)
class Flag:
    track_id: int
    rule_id: str
    frame: int
    value: float


@dataclass
class CleanReport:
    tracks_in: int = 0
    tracks_out: int = 0
    discarded: list[Discard] = field(default_factory=list)
    frames_trimmed: int = 0
    vehicles_without_leader: int = 0
    flagged: list[Flag] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "tracks_in": self.tracks_in,
            "tracks_out": self.tracks_out,
            "discarded": [
                {"track_id": d.track_id, "rule_id": d.rule_id, "evidence": d.evidence}
                for d in self.discarded
            ],
            "frames_trimmed": self.frames_trimmed,
            "vehicles_without_leader": self.vehicles_without_leader,
            "flagged": [
                {"track_id": f.track_id, "rule_id": f.rule_id,
                 "frame": f.frame, "value": f.value}
                for f in self.flagged
            ],
        }


def trim_last_frame(track: Track) -> Track:
    """Drop the (always corrupted) final recorded frame, exactly once per track."""
    if track.trimmed:
        return track
    if track.n_frames < 2:
        raise DataError(f"track {track.track_id}: nothing left after trim")
    sl = slice(0, track.n_frames - 1)
    updates = {name: getattr(track, name)[sl] for name in Track._ARRAY_FIELDS}
    return replace(track, trimmed=True, **updates)


def _check_track(track: Track, rules: RuleConfig, recording: Recording) -> Discard | None:
    bad = np.isfinite(track.thw_raw) & (track.thw_raw < 0)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        standstill = abs(float(track.v_x[i])) < STANDSTILL_SPEED
        return Discard(
            track.track_id, RULE_NEGATIVE_THW,
            f"thw={float(track.thw_raw[i]):.3f}s at frame {int(track.frame_index[i])}"
            + (" (standstill)" if standstill else ""),
        )

    over_x = np.abs(track.a_x) > rules.a_x_cap
    over_y = np.abs(track.a_y) > rules.a_y_cap
    if np.any(over_x) or np.any(over_y):
        if np.any(over_x):
            i = int(np.flatnonzero(over_x)[0])
            detail = f"a_x={float(track.a_x[i]):.2f}"
        else:
            i = int(np.flatnonzero(over_y)[0])
            detail = f"a_y={float(track.a_y[i]):.2f}"
        return Discard(
            track.track_id, RULE_IMPLAUSIBLE_ACCEL,
            f"{detail} m/s^2 at frame {int(track.frame_index[i])}",
        )

    violations = kinematic_violations(track, rules.a_x_cap, recording.dt)
    if violations.size > rules.kinematic_max_violations:
        return Discard(
            track.track_id, RULE_KINEMATIC,
            f"{violations.size} inconsistent steps, first at frame "
            f"{int(track.frame_index[violations[0]])}",
        )

    direction_ids = set(recording.lane_layout.ids(track.driving_direction))
    used = set(np.unique(track.lane_ids).tolist())
    wrong_lanes = used - direction_ids
    if wrong_lanes:
        return Discard(
            track.track_id, RULE_WRONG_DIRECTION,
            f"lanes {sorted(wrong_lanes)} belong to the opposite direction",
        )
    if float(np.mean(track.v_x)) < 0:
        return Discard(
            track.track_id, RULE_WRONG_DIRECTION,
            f"mean forward velocity {float(np.mean(track.v_x)):.2f} m/s < 0",
        )
    return None


def apply_filters(
    recording: Recording, rules: RuleConfig = DEFAULT_RULES
) -> tuple[Recording, CleanReport]:
    """Discard rule-matching tracks and flag low-TTC tracks for review.

    Pure per-track evaluation; permuting track order changes nothing but the
    (track-id-sorted) report order.
    """
    report = CleanReport(tracks_in=len(recording.tracks))
    kept: list[Track] = []
    for track in recording.tracks:
        verdict = _check_track(track, rules, recording)
        if verdict is not None:
            report.discarded.append(verdict)
            continue
        if track.min_ttc is not None and track.min_ttc <= rules.ttc_review_threshold:
            pos = np.isfinite(track.ttc_raw) & (track.ttc_raw > 0)
            if np.any(pos):
                i = int(np.flatnonzero(pos)[np.argmin(track.ttc_raw[pos])])
                frame = int(track.frame_index[i])
            else:
                frame = track.first_frame
            report.flagged.append(
                Flag(track.track_id, "TTC_REVIEW", frame, track.min_ttc)
            )
        kept.append(track)
    report.discarded.sort(key=lambda d: d.track_id)
    report.flagged.sort(key=lambda f: f.track_id)
    report.tracks_out = len(kept)
    cleaned = replace(recording, tracks=tuple(kept))
    return cleaned, report


def count_leaderless(recording: Recording) -> int:
    """Tracks that never have a leader in the field of view."""
    return sum(1 for t in recording.tracks if not np.any(t.leader_ids != 0))


def clean_recording(
    recording: Recording, rules: RuleConfig = DEFAULT_RULES
) -> tuple[Recording, CleanReport]:
    """Full cleaning pass: trim, filter, flag. Cleaning a cleaned recording is a no-op."""
    if recording.cleaned:
        n = len(recording.tracks)
        report = CleanReport(
            tracks_in=n, tracks_out=n,
            vehicles_without_leader=count_leaderless(recording),
        )
        return recording, report

    trimmed: list[Track] = []
    trim_discards: list[Discard] = []
    frames_trimmed = 0
    for track in recording.tracks:
        if track.n_frames < 2:
            trim_discards.append(
                Discard(track.track_id, RULE_TRIM_EMPTY, "single-frame track")
            )
            continue
        trimmed.append(trim_last_frame(track))
        frames_trimmed += 1

    staged = replace(recording, tracks=tuple(trimmed))
    filtered, report = apply_filters(staged, rules)
    report.tracks_in = len(recording.tracks)
    report.discarded = sorted(
        trim_discards + report.discarded, key=lambda d: d.track_id
    )
    report.frames_trimmed = frames_trimmed
    report.vehicles_without_leader = count_leaderless(filtered)
    return replace(filtered, cleaned=True), report


def export_flagged(report: CleanReport, recording_id: int, out_dir: str | Path) -> Path:
    """Write the manual-review CSV (track_id, rule, frame, value) for one recording."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{recording_id:02d}_flagged.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["track_id", "rule", "frame", "value"])
        for flag in report.flagged:
            writer.writerow([flag.track_id, flag.rule_id, flag.frame, repr(flag.value)])
    return path
