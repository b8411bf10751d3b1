"""Cleaning rules: trimming, discard rules R1-R4, flagging, fixed point."""

from dataclasses import replace

import numpy as np
import pytest

from trajcrit.clean import (
    RULE_IMPLAUSIBLE_ACCEL,
    RULE_KINEMATIC,
    RULE_NEGATIVE_THW,
    RULE_TRIM_EMPTY,
    RULE_WRONG_DIRECTION,
    RuleConfig,
    apply_filters,
    clean_recording,
    count_leaderless,
    export_flagged,
    trim_last_frame,
)
from trajcrit.errors import DataError

from conftest import make_recording, make_track


def consistent_x(v: float, n: int, x0: float = 100.0) -> np.ndarray:
    return x0 + v * 0.04 * np.arange(n)


class TestTrim:
    def test_removes_exactly_one_frame(self):
        track = make_track(n=350, x=consistent_x(30.0, 350))
        trimmed = trim_last_frame(track)
        assert trimmed.n_frames == 349
        assert trim_last_frame(trimmed).n_frames == 349  # once per track

    def test_two_frames(self):
        track = make_track(n=2, x=consistent_x(30.0, 2))
        assert trim_last_frame(track).n_frames == 1

    def test_single_frame_raises(self):
        track = make_track(n=1, x=np.array([5.0]))
        with pytest.raises(DataError):
            trim_last_frame(track)

    def test_single_frame_discarded_in_pipeline(self):
        rec = make_recording([make_track(track_id=1, n=1, x=np.array([5.0]))])
        _, report = clean_recording(rec)
        assert report.discarded[0].rule_id == RULE_TRIM_EMPTY
        assert report.tracks_out == 0


class TestFilters:
    def test_negative_raw_thw_discarded(self):
        thw_raw = np.full(50, np.nan)
        thw_raw[30] = -0.4  # standstill artifact
        v = np.full(50, 0.1)
        track = make_track(track_id=3, n=50, x=np.full(50, 100.0), v=v, thw_raw=thw_raw)
        rec = make_recording([track])
        _, report = apply_filters(rec)
        assert [d.rule_id for d in report.discarded] == [RULE_NEGATIVE_THW]
        assert "standstill" in report.discarded[0].evidence

    def test_implausible_acceleration_discarded(self):
        a = np.zeros(50)
        a[10] = 9.5
        track = make_track(n=50, x=consistent_x(30.0, 50), a=a)
        _, report = apply_filters(make_recording([track]))
        assert [d.rule_id for d in report.discarded] == [RULE_IMPLAUSIBLE_ACCEL]

    def test_kinematic_violations_discarded(self):
        x = consistent_x(30.0, 50)
        x[10:20:2] += 1.0  # five teleports -> ten violating steps
        track = make_track(n=50, x=x, v=30.0)
        _, report = apply_filters(make_recording([track]))
        assert [d.rule_id for d in report.discarded] == [RULE_KINEMATIC]

    def test_few_violations_kept(self):
        x = consistent_x(30.0, 50)
        x[10] += 1.0  # two violating steps stay under the default cap of 3
        track = make_track(n=50, x=x, v=30.0)
        _, report = apply_filters(make_recording([track]))
        assert not report.discarded

    def test_wrong_direction_lane_discarded(self):
        track = make_track(n=20, x=consistent_x(30.0, 20), lane=3, direction="lower")
        _, report = apply_filters(make_recording([track]))
        assert [d.rule_id for d in report.discarded] == [RULE_WRONG_DIRECTION]

    def test_backwards_travel_discarded(self):
        track = make_track(n=20, x=consistent_x(-5.0, 20), v=-5.0)
        _, report = apply_filters(make_recording([track]))
        assert [d.rule_id for d in report.discarded] == [RULE_WRONG_DIRECTION]

    def test_low_ttc_flagged_not_discarded(self):
        ttc_raw = np.full(50, np.nan)
        ttc_raw[20] = 0.7
        track = make_track(n=50, x=consistent_x(30.0, 50), ttc_raw=ttc_raw)
        track = replace(track, min_ttc=0.7)
        rec = make_recording([track])
        cleaned, report = apply_filters(rec)
        assert not report.discarded
        assert [f.track_id for f in report.flagged] == [track.track_id]
        assert report.flagged[0].frame == 20

    def test_clean_platoon_kept_unflagged(self):
        track = make_track(n=50, x=consistent_x(25.0, 50), v=25.0)
        _, report = apply_filters(make_recording([track]))
        assert not report.discarded and not report.flagged

    def test_custom_thresholds(self):
        a = np.zeros(50)
        a[10] = 9.5
        track = make_track(n=50, x=consistent_x(30.0, 50), a=a)
        _, report = apply_filters(
            make_recording([track]), RuleConfig(a_x_cap=12.0)
        )
        assert not report.discarded


class TestPipeline:
    def _tracks(self):
        bad_thw = np.full(50, np.nan)
        bad_thw[5] = -0.1
        return [
            make_track(track_id=1, n=50, x=consistent_x(25.0, 50), v=25.0),
            make_track(track_id=2, n=50, x=np.full(50, 100.0), v=0.05,
                       thw_raw=bad_thw),
            make_track(track_id=3, n=50, x=consistent_x(30.0, 50), v=30.0,
                       a=np.full(50, 9.0)),
        ]

    def test_counts_balance(self):
        rec = make_recording(self._tracks())
        cleaned, report = clean_recording(rec)
        assert report.tracks_in == 3
        assert report.tracks_out == report.tracks_in - len(report.discarded)
        assert report.tracks_out == 1
        assert report.frames_trimmed == 3
        assert cleaned.cleaned

    def test_fixed_point(self):
        rec = make_recording(self._tracks())
        cleaned, _ = clean_recording(rec)
        again, report2 = clean_recording(cleaned)
        assert again == cleaned
        assert not report2.discarded and report2.frames_trimmed == 0

    def test_order_independence(self):
        tracks = self._tracks()
        rec_a = make_recording(tracks)
        rec_b = make_recording(list(reversed(tracks)))
        _, report_a = clean_recording(rec_a)
        _, report_b = clean_recording(rec_b)
        assert report_a.discarded == report_b.discarded
        assert report_a.flagged == report_b.flagged
        assert report_a.tracks_out == report_b.tracks_out

    def test_no_kept_track_violates_rules(self):
        rec = make_recording(self._tracks())
        cleaned, _ = clean_recording(rec)
        for track in cleaned.tracks:
            raw = track.thw_raw[np.isfinite(track.thw_raw)]
            assert not np.any(raw < 0)
            assert np.all(np.abs(track.a_x) <= 8.0)


class TestLeaderless:
    def test_platoon_counts(self):
        head = make_track(track_id=1, n=20, x=consistent_x(25.0, 20, 200.0), v=25.0)
        followers = [
            make_track(track_id=i + 2, n=20,
                       x=consistent_x(25.0, 20, 200.0 - 30.0 * (i + 1)),
                       v=25.0, leader=i + 1)
            for i in range(4)
        ]
        rec = make_recording([head] + followers)
        assert count_leaderless(rec) == 1


class TestFlagExport:
    def test_csv_written(self, tmp_path):
        ttc_raw = np.full(50, np.nan)
        ttc_raw[20] = 0.5
        track = make_track(n=50, x=consistent_x(30.0, 50), ttc_raw=ttc_raw)
        track = replace(track, min_ttc=0.5)
        _, report = apply_filters(make_recording([track]))
        path = export_flagged(report, 1, tmp_path)
        content = path.read_text().splitlines()
        assert content[0] == "track_id,rule,frame,value"
        assert len(content) == 2
