"""Optional reproduction checks against the licensed highD data set.

These run only when TRAJCRIT_DATA_DIR points at a directory containing the
released recording CSV triples (01_recordingMeta.csv, ...). They compare
population-level counts with the published analysis within the documented
tolerances (cleaning rules are under-specified, so counts carry +-2% and the
braking shares +-3 percentage points).
"""

import os
from pathlib import Path

import pytest

from trajcrit import ingest, measures
from trajcrit.clean import clean_recording
from trajcrit.risk import count_threshold_occurrences, rp_study
from trajcrit.macro import all_lane_changes

DATA_DIR = os.environ.get("TRAJCRIT_DATA_DIR")

pytestmark = pytest.mark.skipif(
    not DATA_DIR, reason="TRAJCRIT_DATA_DIR not set; real-data checks skipped"
)

EXPECTED_THW = {2.0: 73452, 1.0: 38607, 2.0 / 3.0: 17674, 0.5: 8697,
                0.4: 4432, 0.25: 1000, 0.2: 419}
EXPECTED_TTC = {8.0: 8164, 4.0: 2145, 2.0: 311, 1.0: 47, 0.8: 29, 0.4: 7,
                0.2: 2}


def _iter_recordings():
    directory = Path(DATA_DIR)
    for meta in sorted(directory.glob("*_recordingMeta.csv")):
        prefix = meta.name.split("_")[0]
        paths = ingest.RawDatasetPaths(
            recording_meta_path=meta,
            tracks_meta_path=directory / f"{prefix}_tracksMeta.csv",
            tracks_path=directory / f"{prefix}_tracks.csv",
        )
        recording, _ = ingest.ingest_dataset(paths)
        cleaned, _ = clean_recording(recording)
        yield cleaned


@pytest.fixture(scope="module")
def all_tracks():
    tracks = []
    series = {}
    lane_changes = []
    frame_rate = 25.0
    for recording in _iter_recordings():
        frame_rate = recording.frame_rate
        ser = measures.compute_all_series(recording.tracks, jobs=os.cpu_count() or 1)
        for track in recording.tracks:
            minima = measures.track_minima(ser[track.track_id])
            from dataclasses import replace

            tracks.append(replace(
                track, min_thw=minima.min_thw, min_ttc=minima.min_ttc,
                min_dhw=minima.min_dhw,
            ))
        series.update(ser)
        lane_changes.extend(all_lane_changes(recording))
    return tracks, series, lane_changes, frame_rate


def test_table_occurrences(all_tracks):
    tracks, _, _, _ = all_tracks
    table = count_threshold_occurrences(
        tracks, tuple(EXPECTED_THW), tuple(EXPECTED_TTC)
    )
    for row in table.thw:
        want = EXPECTED_THW[row["bound"]]
        assert abs(row["count"] - want) <= max(0.02 * want, 2), row
    for row in table.ttc:
        want = EXPECTED_TTC[row["bound"]]
        assert abs(row["count"] - want) <= max(0.02 * want, 2), row


def test_s_rp214_braking_shares(all_tracks):
    tracks, series, lane_changes, frame_rate = all_tracks
    result = rp_study(tracks, series, lane_changes, frame_rate)
    assert abs(result.s214["braking_neg_share"] * 100.0 - 41.7) <= 3.0
    assert abs(result.s214["active_braking_share"] * 100.0 - 2.4) <= 3.0
