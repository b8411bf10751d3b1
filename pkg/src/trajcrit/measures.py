"""Per-frame and per-track criticality measures: DHW, THW, TTC, ETTC, RP.

TTC keeps the dataset's signed convention: positive while closing (collision
at +TTC under constant speeds), negative while diverging. RP consumes only
positive TTC.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .errors import DataError
from .model import LeaderGap, Track

# Singularity guards; the source material never addresses division by zero.
V_EPS = 0.1  # m/s
A_EPS = 0.01  # m/s^2


@dataclass(frozen=True)
class RpParams:
    """Weights of the combined indicator A/THW + B/TTC."""

    a: float = 1.0
    b: float = 4.0

    def __post_init__(self) -> None:
        if self.a < 0 or self.b < 0 or self.a + self.b <= 0:
            raise DataError("RP weights must be non-negative with A + B > 0")


DEFAULT_RP = RpParams()


@dataclass(frozen=True, eq=False)
class MeasureSeries:
    """Per-frame measures for one track; NaN marks an absent value."""

    track_id: int
    frame_index: np.ndarray
    dhw: np.ndarray
    thw: np.ndarray
    ttc: np.ndarray
    ettc: np.ndarray
    rp: np.ndarray
    v_r: np.ndarray
    negative_gap_frames: int = 0


def thw(gap: LeaderGap, v_f: float) -> Optional[float]:
    """Time headway x_r / v_f; absent when the follower is (near) standstill."""
    if v_f <= V_EPS:
        return None
    return gap.x_r / v_f


def ttc(gap: LeaderGap) -> Optional[float]:
    """Signed time to collision x_r / v_r; absent when |v_r| < V_EPS."""
    if abs(gap.v_r) < V_EPS:
        return None
    return gap.x_r / gap.v_r


def _smallest_positive_root(x_r: float, v_r: float, a_r: float) -> Optional[float]:
    """Smallest t > 0 with x_r - v_r t - 0.5 a_r t^2 = 0, else None."""
    if abs(a_r) < A_EPS:
        if abs(v_r) < V_EPS:
            return None
        t = x_r / v_r
        return t if t > 0 else None
    disc = v_r * v_r + 2.0 * a_r * x_r
    if disc < 0:
        return None
    sqrt_disc = np.sqrt(disc)
    # Numerically stable quadratic roots for 0.5 a_r t^2 + v_r t - x_r = 0.
    sign = 1.0 if v_r >= 0 else -1.0
    q = -0.5 * (v_r + sign * sqrt_disc)
    roots = []
    if a_r != 0:
        roots.append(q / (0.5 * a_r))
    if q != 0:
        roots.append(-x_r / q)
    positive = [t for t in roots if t > 0]
    return min(positive) if positive else None


def ettc(gap: LeaderGap) -> Optional[float]:
    """Collision time under constant relative acceleration; absent without a positive root."""
    return _smallest_positive_root(gap.x_r, gap.v_r, gap.a_r)


def rp(
    thw_value: Optional[float],
    ttc_value: Optional[float],
    params: RpParams = DEFAULT_RP,
    thw_only: bool = False,
) -> Optional[float]:
    """A/THW + B/TTC for positive TTC; optionally A/THW alone when TTC is absent."""
    if thw_value is None:
        return None
    if ttc_value is not None and ttc_value > 0:
        return params.a / thw_value + params.b / ttc_value
    if ttc_value is None and thw_only:
        return params.a / thw_value
    return None


def compute_series(
    track: Track,
    tracks_by_id: Mapping[int, Track],
    params: RpParams = DEFAULT_RP,
    thw_only: bool = False,
) -> MeasureSeries:
    """Vectorized measure series for a track, resolving leaders per frame.

    Frames without a resolvable leader frame, or with a negative gap
    (corrupt geometry), get absent measures.
    """
    n = track.n_frames
    nan = np.full(n, np.nan)
    dhw_arr = nan.copy()
    v_l = nan.copy()
    a_l = nan.copy()

    negative_gap = 0
    leader_ids = track.leader_ids
    for lid in np.unique(leader_ids):
        lid = int(lid)
        if lid == 0:
            continue
        leader = tracks_by_id.get(lid)
        if leader is None:
            continue
        sel = np.flatnonzero(leader_ids == lid)
        g = track.frame_index[sel]
        ok = (g >= leader.first_frame) & (g <= leader.last_frame)
        sel = sel[ok]
        if sel.size == 0:
            continue
        off = track.frame_index[sel] - leader.first_frame
        gap = (leader.x[off] - leader.vehicle_length) - track.x[sel]
        valid = gap >= 0
        negative_gap += int(np.count_nonzero(~valid))
        sel = sel[valid]
        off = off[valid]
        dhw_arr[sel] = gap[valid]
        v_l[sel] = leader.v_x[off]
        a_l[sel] = leader.a_x[off]

    with np.errstate(invalid="ignore", divide="ignore"):
        v_f = track.v_x
        v_r = v_f - v_l
        a_r = track.a_x - a_l
        thw_arr = np.where(np.isfinite(dhw_arr) & (v_f > V_EPS), dhw_arr / v_f, np.nan)
        ttc_arr = np.where(
            np.isfinite(dhw_arr) & (np.abs(v_r) >= V_EPS), dhw_arr / v_r, np.nan
        )
        ettc_arr = _ettc_vector(dhw_arr, v_r, a_r)
        rp_arr = np.where(
            np.isfinite(thw_arr) & (ttc_arr > 0),
            params.a / thw_arr + params.b / ttc_arr,
            np.nan,
        )
        if thw_only:
            alone = np.isfinite(thw_arr) & ~np.isfinite(ttc_arr)
            rp_arr = np.where(alone, params.a / thw_arr, rp_arr)

    return MeasureSeries(
        track_id=track.track_id,
        frame_index=track.frame_index,
        dhw=dhw_arr,
        thw=thw_arr,
        ttc=ttc_arr,
        ettc=ettc_arr,
        rp=rp_arr,
        v_r=np.where(np.isfinite(dhw_arr), v_r, np.nan),
        negative_gap_frames=negative_gap,
    )


def _ettc_vector(x_r: np.ndarray, v_r: np.ndarray, a_r: np.ndarray) -> np.ndarray:
    """Vectorized counterpart of _smallest_positive_root."""
    out = np.full(x_r.shape, np.nan)
    have = np.isfinite(x_r) & np.isfinite(v_r) & np.isfinite(a_r)
    if not np.any(have):
        return out

    with np.errstate(invalid="ignore", divide="ignore"):
        # Near-zero relative acceleration reduces to TTC (positive roots only).
        lin = have & (np.abs(a_r) < A_EPS) & (np.abs(v_r) >= V_EPS)
        t_lin = x_r / v_r
        out[lin & (t_lin > 0)] = t_lin[lin & (t_lin > 0)]

        quad = have & (np.abs(a_r) >= A_EPS)
        disc = v_r * v_r + 2.0 * a_r * x_r
        ok = quad & (disc >= 0)
        sqrt_disc = np.sqrt(np.where(ok, disc, 0.0))
        sign = np.where(v_r >= 0, 1.0, -1.0)
        q = -0.5 * (v_r + sign * sqrt_disc)
        r1 = np.where(ok, q / (0.5 * a_r), np.nan)
        r2 = np.where(ok & (q != 0), -x_r / np.where(q != 0, q, 1.0), np.nan)
        r1 = np.where(r1 > 0, r1, np.inf)
        r2 = np.where(r2 > 0, r2, np.inf)
        best = np.minimum(r1, r2)
        hit = ok & np.isfinite(best)
        out[hit] = best[hit]
    return out


@dataclass(frozen=True)
class TrackMinima:
    """Per-track extrema over present values; ties resolve to the earliest frame."""

    min_thw: Optional[float] = None
    min_thw_frame: Optional[int] = None
    min_ttc: Optional[float] = None  # minimum over positive TTC only
    min_ttc_frame: Optional[int] = None
    min_dhw: Optional[float] = None
    min_dhw_frame: Optional[int] = None
    max_rp: Optional[float] = None
    max_rp_frame: Optional[int] = None


def _extremum(
    values: np.ndarray, frames: np.ndarray, largest: bool = False
) -> tuple[Optional[float], Optional[int]]:
    present = np.isfinite(values)
    if not np.any(present):
        return None, None
    sub = values[present]
    target = np.max(sub) if largest else np.min(sub)
    idx = np.flatnonzero(present & (values == target))[0]
    return float(target), int(frames[idx])


def track_minima(series: MeasureSeries) -> TrackMinima:
    """Extrema of a measure series; all-absent series yield all-absent results."""
    frames = series.frame_index
    min_thw, f_thw = _extremum(series.thw, frames)
    pos_ttc = np.where(series.ttc > 0, series.ttc, np.nan)
    min_ttc, f_ttc = _extremum(pos_ttc, frames)
    min_dhw, f_dhw = _extremum(series.dhw, frames)
    max_rp, f_rp = _extremum(series.rp, frames, largest=True)
    return TrackMinima(
        min_thw=min_thw, min_thw_frame=f_thw,
        min_ttc=min_ttc, min_ttc_frame=f_ttc,
        min_dhw=min_dhw, min_dhw_frame=f_dhw,
        max_rp=max_rp, max_rp_frame=f_rp,
    )


def compute_all_series(
    tracks: tuple[Track, ...] | list[Track],
    params: RpParams = DEFAULT_RP,
    thw_only: bool = False,
    jobs: int = 1,
) -> dict[int, MeasureSeries]:
    """Measure series for every track, optionally with a process pool."""
    by_id = {t.track_id: t for t in tracks}
    if jobs <= 1 or len(tracks) < 64:
        return {
            t.track_id: compute_series(t, by_id, params, thw_only) for t in tracks
        }
    from . import _parallel

    return _parallel.series_parallel(list(tracks), params, thw_only, jobs)
