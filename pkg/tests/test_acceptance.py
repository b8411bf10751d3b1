"""Acceptance gate: one test per shipping criterion, each printing a
pass/fail line and enforcing its runtime budget and stated tolerance."""

import time
from contextlib import contextmanager

import numpy as np
import pytest

from trajcrit import ingest, macro, measures, stats, synth
from trajcrit.clean import RULE_NEGATIVE_THW, RuleConfig, clean_recording
from trajcrit.macro import LaneChangeEvent, all_lane_changes
from trajcrit.measures import A_EPS, V_EPS, ettc
from trajcrit.model import LeaderGap
from trajcrit.risk import context_bins, rp_study
from trajcrit.synth import Phase

from test_macro import brute_force_tent
from test_measures import bisect_ettc
from test_risk import (
    G,
    SUITE_RULES,
    classify_all,
    event_set,
    make_minima_event,
    rp_qualifying_script,
    run_scenario,
    scan_min,
)
from conftest import lone_script, pair_script
from trajcrit.synth import AySpan, LaneSwitch


@contextmanager
def criterion(name: str, budget_s: float | None = None):
    start = time.perf_counter()
    try:
        yield
    except Exception:
        print(f"ACCEPTANCE {name}: FAIL")
        raise
    elapsed = time.perf_counter() - start
    if budget_s is not None and elapsed > budget_s:
        print(f"ACCEPTANCE {name}: FAIL (runtime {elapsed:.2f}s > {budget_s:.0f}s)")
        raise AssertionError(f"{name}: runtime {elapsed:.2f}s over budget {budget_s}s")
    print(f"ACCEPTANCE {name}: PASS ({elapsed:.2f}s)")


def test_stationary_flow_identity():
    """Constant platoon (25 m/s, 50 m spacing, 1 lane, 5 min):
    |q - rho*v| / q <= 0.5% on every minute slice."""
    with criterion("stationary-flow-identity", budget_s=5.0):
        truth = synth.generate(synth.constant_platoon(
            speed=25.0, spacing=50.0, duration=300.0,
        ))
        recording = truth.recording
        assert recording.lane_layout.main_lane_count("lower") == 1
        series = measures.compute_all_series(recording.tracks)
        slices = macro.minute_slices(recording, series)
        assert len(slices) == 5
        for sl in slices:
            rel = abs(sl.q_veh_h - sl.rho_veh_km * sl.v_mean_space_kmh) / sl.q_veh_h
            assert rel <= 0.005, f"slice {sl.index}: relative error {rel}"


def test_measure_exactness_all_scenarios(tmp_path):
    """Pipeline THW/TTC/DHW equal the generator's closed forms within 1e-9;
    extrema frames match an exhaustive re-scan."""
    with criterion("measure-exactness", budget_s=10.0):
        for kind, ctor in sorted(synth.SCENARIO_KINDS.items()):
            kwargs = {"seed": 12} if kind == "mixed_traffic" else {}
            truth = synth.generate(ctor(**kwargs))
            paths = synth.write_dataset(truth.recording, tmp_path / kind)
            recording, _ = ingest.ingest_dataset(paths)
            by_id = {t.track_id: t for t in recording.tracks}
            for track in recording.tracks:
                ser = measures.compute_series(track, by_id)
                ref = truth.series[track.track_id]
                for field in ("thw", "ttc", "dhw"):
                    got = getattr(ser, field)
                    want = getattr(ref, field)
                    both = np.isfinite(got) & np.isfinite(want)
                    assert np.array_equal(np.isfinite(got), np.isfinite(want))
                    if np.any(both):
                        assert np.max(np.abs(got[both] - want[both])) <= 1e-9

                minima = measures.track_minima(ser)
                # Exhaustive frame-wise re-scan oracle.
                for field, frame_attr, positive in (
                    ("thw", "min_thw_frame", False),
                    ("ttc", "min_ttc_frame", True),
                    ("dhw", "min_dhw_frame", False),
                ):
                    values = getattr(ser, field)
                    best, best_i = np.inf, None
                    for i, v in enumerate(values):
                        if not np.isfinite(v) or (positive and v <= 0):
                            continue
                        if v < best:
                            best, best_i = v, i
                    expected_frame = (
                        None if best_i is None else int(ser.frame_index[best_i])
                    )
                    assert getattr(minima, frame_attr) == expected_frame, (
                        f"{kind} track {track.track_id} {field}"
                    )


def test_ettc_against_bisection_oracle():
    """10 000 random (x_r, v_r, a_r) triples agree with the bisection
    root-finder within 1e-9 s, including the |a_r| < a_eps reduction."""
    with criterion("ettc-oracle", budget_s=5.0):
        rng = np.random.default_rng(2024)
        triples = np.column_stack([
            rng.uniform(0.5, 200.0, 10_000),
            rng.uniform(-30.0, 30.0, 10_000),
            rng.uniform(-6.0, 6.0, 10_000),
        ])
        # Force coverage of the reduction boundary.
        for a_r in (0.0, A_EPS * 0.5, A_EPS * 0.999, -A_EPS * 0.999,
                    A_EPS * 1.001, -A_EPS * 1.001):
            triples = np.vstack([triples, [50.0, 10.0, a_r], [50.0, -10.0, a_r]])
        mismatches = 0
        for x_r, v_r, a_r in triples:
            ours = ettc(LeaderGap(x_r=x_r, v_r=v_r, a_r=a_r, leader_id=1))
            ref = bisect_ettc(x_r, v_r, a_r)
            if (ours is None) != (ref is None):
                mismatches += 1
            elif ours is not None and abs(ours - ref) > 1e-9:
                mismatches += 1
        assert mismatches == 0


def test_fit_recovery():
    """Logistic(0.122, 0.147) within +-0.01 absolute; GEV(19,16,0.5) and
    GEV(1.1,0.7,0.5) within 5% relative; bit-identical across runs."""
    from test_stats import sample_gev, sample_logistic

    with criterion("fit-recovery", budget_s=60.0):
        logi = sample_logistic(0.122, 0.147, 50_000, seed=501)
        fit = stats.fit_logistic(logi)
        assert abs(fit.location - 0.122) <= 0.01
        assert abs(fit.scale - 0.147) <= 0.01
        assert stats.fit_logistic(logi) == fit  # determinism

        for mu, sigma, xi, seed in ((19.0, 16.0, 0.5, 502), (1.1, 0.7, 0.5, 503)):
            samples = sample_gev(mu, sigma, xi, 50_000, seed=seed)
            gev = stats.fit_gev(samples)
            for got, want in zip(gev.params, (mu, sigma, xi)):
                assert abs(got - want) / abs(want) <= 0.05, (got, want)
            assert stats.fit_gev(samples) == gev


def test_triangular_fit_coverage_and_area():
    """1000 random points: recounted coverage >= 97% and area at or below
    the brute-force grid oracle's best."""
    with criterion("triangular-fit", budget_s=10.0):
        rng = np.random.default_rng(77)
        pts = np.column_stack([
            rng.uniform(0.0, 50.0, 1000),
            rng.gamma(2.0, 2.0, 1000),
        ])
        fit = macro.triangular_fit(pts, coverage_target=0.97)
        inside = np.count_nonzero(
            pts[:, 1] <= macro.tent_value(
                pts[:, 0], fit.apex_x, fit.apex_y, fit.left_zero_x, fit.right_zero_x
            )
        )
        assert inside >= int(np.ceil(0.97 * 1000))
        assert fit.coverage == inside / 1000
        oracle = brute_force_tent(pts, 0.97, apex_x_grid=8, zero_grid=10)
        assert fit.area <= oracle + 1e-9


def _classifier_suite():
    """Scripted scenarios with hand-enumerated event sets (Table III/IV rules,
    boundaries straddled on both sides)."""
    brake = lambda a: pair_script(
        v_follower=30.0, v_leader=27.5, gap0=14.0, duration=8.0,
        follower_phases=(Phase(4.0, 0.0), Phase(1.0, a), Phase(1.0, -(2.5 + a))),
    )

    def brake_gap(gap0):
        return pair_script(
            v_follower=30.0, v_leader=27.5, gap0=gap0, duration=8.0,
            follower_phases=(Phase(4.0, 0.0), Phase(1.0, -2.0), Phase(1.0, -0.5)),
        )

    def tailgate(v_r_kmh, thw_target, frames=100):
        v_f = 25.0
        v_r = v_r_kmh / 3.6
        gap0 = thw_target * v_f + v_r * (frames - 2) / 25.0
        return pair_script(
            v_follower=v_f, v_leader=v_f - v_r, gap0=gap0, duration=frames / 25.0,
        )

    suite = [
        ("ttc_l1_braking", brake(-2.0), {(2, "benmimoun_ttc_l1")}),
        ("ttc_l1_no_braking",
         pair_script(v_follower=30.0, v_leader=20.0, gap0=80.0, duration=6.0),
         set()),
        ("ttc_l1_brake_weak", brake(-1.49), set()),
        ("ttc_l1_brake_strong", brake(-1.51), {(2, "benmimoun_ttc_l1")}),
        ("ttc_l1_threshold_below", brake_gap(14.35), {(2, "benmimoun_ttc_l1")}),
        ("ttc_l1_threshold_above", brake_gap(14.4 + 0.05), set()),
        ("thw_l1_fast", tailgate(25.0, 0.30), {(2, "benmimoun_thw_l1")}),
        ("thw_l1_slow", tailgate(19.9, 0.30), set()),
        ("thw_l1_vr_boundary", tailgate(20.1, 0.30), {(2, "benmimoun_thw_l1")}),
        ("thw_l1_threshold_below", tailgate(25.0, 0.34), {(2, "benmimoun_thw_l1")}),
        ("thw_l1_threshold_above", tailgate(25.0, 0.36), set()),
        ("cars100_ay_hot",
         lone_script(v0=30.0, duration=6.0, a_y_spans=(AySpan(2.0, 3.0, 0.71 * G),)),
         {(1, "cars100_ay")}),
        ("cars100_ay_cold",
         lone_script(v0=30.0, duration=6.0, a_y_spans=(AySpan(2.0, 3.0, 0.69 * G),)),
         set()),
        ("cars100_ax_hot",
         lone_script(v0=38.0, duration=6.0,
                     phases=(Phase(2.0, 0.0), Phase(1.0, -0.61 * G))),
         {(1, "cars100_ax")}),
        ("cars100_ax_cold",
         lone_script(v0=38.0, duration=6.0,
                     phases=(Phase(2.0, 0.0), Phase(1.0, -0.59 * G))),
         set()),
        ("cars100_ttc_accel",
         pair_script(v_follower=20.0, v_leader=15.0, gap0=50.0, duration=4.0,
                     follower_phases=(Phase(2.0, 0.0), Phase(1.0, 0.51 * G))),
         {(2, "cars100_ttc_accel")}),
        ("cars100_ttc_brake",
         pair_script(v_follower=30.0, v_leader=15.0, gap0=100.0, duration=5.0,
                     follower_phases=(Phase(3.0, 0.0), Phase(1.0, -0.51 * G))),
         {(2, "cars100_ttc_brake")}),
        ("cars100_row5_dhw",
         pair_script(v_follower=15.0, v_leader=10.0, gap0=40.0, duration=6.0,
                     follower_phases=(Phase(5.0, 0.0), Phase(1.0, 0.45 * G))),
         {(2, "cars100_ttc_accel_dhw")}),
        ("cars100_row6_dhw",
         pair_script(v_follower=18.0, v_leader=10.0, gap0=50.0, duration=6.0,
                     follower_phases=(Phase(4.0, 0.0), Phase(1.0, -0.45 * G))),
         {(2, "cars100_ttc_brake_dhw")}),
        ("cars100_ax_only_high_ttc",
         pair_script(v_follower=38.0, v_leader=30.0, gap0=400.0, duration=6.0,
                     follower_phases=(Phase(2.0, 0.0), Phase(1.0, -0.61 * G))),
         {(2, "cars100_ax")}),
    ]
    return suite


def test_classifier_ground_truth():
    """Event sets of the scripted suite equal the hand enumeration exactly;
    lane-change annotations match the scripts."""
    with criterion("classifier-ground-truth", budget_s=10.0):
        suite = _classifier_suite()
        assert len(suite) >= 12
        for name, script, expected in suite:
            recording, series = run_scenario(script)
            got = event_set(classify_all(recording, series))
            assert got == expected, f"{name}: {got} != {expected}"

        # Lane-change annotation scenarios (critical frame scripted at t=4 s).
        def approach(switch_after, duration=12.0):
            plan = ()
            if switch_after is not None:
                plan = (LaneSwitch(4.0 + switch_after, 3),)
            return pair_script(
                v_follower=30.0, v_leader=27.5, gap0=14.0, duration=duration,
                follower_phases=(Phase(4.0, 0.0), Phase(1.0, -2.0), Phase(1.0, -0.5)),
                follower_lane_plan=plan,
            )

        for switch_after, duration, expect_2s in (
            (1.0, 12.0, True),
            (3.0, 12.0, False),
            (None, 4.4, False),  # leaves view 0.5 s after the critical frame
        ):
            recording, series = run_scenario(approach(switch_after, duration))
            events = classify_all(recording, series)
            event = next(e for e in events if e.rule_id == "benmimoun_ttc_l1")
            assert event.critical_frame == 100
            assert event.lane_change_within_2s == expect_2s


def test_rp_study_mechanics():
    """S_RP214 qualification, braking window, lane-change windows and grid
    monotonicity on scripted scenarios."""
    with criterion("rp-study-mechanics", budget_s=10.0):
        # Qualifying: stable leader, RP(B=4) crosses 2.0, braking at the peak.
        recording, series = run_scenario(rp_qualifying_script())
        result = rp_study(recording.tracks, series, [], 25.0)
        assert result.m_tailgate == 1
        assert result.s214["m"] == 1
        assert result.s214["braking_neg_count"] == 1
        assert result.s214["active_braking_count"] == 1

        # Leader change 2 s before the would-be peak disqualifies.
        recording, series = run_scenario(
            rp_qualifying_script(switch_before_peak=2.0)
        )
        result = rp_study(recording.tracks, series, all_lane_changes(recording), 25.0)
        assert result.s214["m"] == 0

        # Visibility ending < 4 s after the RP crossing disqualifies.
        recording, series = run_scenario(
            rp_qualifying_script(close_for=7.2, duration=10.8)
        )
        result = rp_study(recording.tracks, series, [], 25.0)
        assert result.m_tailgate == 1 and result.s214["m"] == 0

        # 0.2 s braking window and +-4 s lane-change window mechanics.
        recording, series = run_scenario(rp_qualifying_script())
        track = recording.track(2)
        ser = series[2]
        with np.errstate(invalid="ignore"):
            rp4 = 1.0 / ser.thw + 4.0 / ser.ttc
        leader_ok = np.flatnonzero(track.leader_ids == 1)
        usable = np.isfinite(rp4) & (ser.ttc > 0)
        usable[:leader_ok[0] + 100] = False
        usable[leader_ok[-1] - 100 + 1:] = False
        crit = int(ser.frame_index[int(np.nanargmax(np.where(usable, rp4, -np.inf)))])
        inside = [LaneChangeEvent(2, crit + 50, 2, 3, "leftward")]
        outside = [LaneChangeEvent(2, crit + 150, 2, 3, "leftward")]
        assert rp_study(recording.tracks, series, inside, 25.0).s214[
            "lane_change_neg_share_of_group"] == 1.0
        assert rp_study(recording.tracks, series, outside, 25.0).s214[
            "lane_change_neg_share_of_group"] == 0.0

        # Occurrence grid monotone non-increasing in the RP threshold.
        truth = synth.generate(synth.mixed_traffic(seed=88, duration=60.0))
        cleaned, _ = clean_recording(truth.recording, SUITE_RULES)
        mixed_series = measures.compute_all_series(cleaned.tracks)
        grid = rp_study(cleaned.tracks, mixed_series, [], 25.0)
        for row in grid.counts:
            assert row == sorted(row, reverse=True)


def test_round_trip_and_cleaning(tmp_path):
    """generate -> write -> ingest -> clean is lossless for every scenario
    kind; injected corruption is trimmed/discarded with the right rule."""
    import pandas as pd

    with criterion("round-trip-cleaning", budget_s=10.0):
        for kind, ctor in sorted(synth.SCENARIO_KINDS.items()):
            kwargs = {"seed": 13} if kind == "mixed_traffic" else {}
            truth = synth.generate(ctor(**kwargs))
            paths = synth.write_dataset(truth.recording, tmp_path / kind)
            recording, _ = ingest.ingest_dataset(paths)
            assert recording == truth.recording, kind
            cleaned, report = clean_recording(recording)
            assert report.discarded == [], kind
            assert report.frames_trimmed == len(recording.tracks)

        # Corruption injection on the platoon dataset.
        truth = synth.generate(synth.constant_platoon(
            speed=25.0, spacing=50.0, duration=30.0,
        ))
        base = tmp_path / "corrupt"
        paths = synth.write_dataset(truth.recording, base)
        df = pd.read_csv(paths.tracks_path, float_precision="round_trip")
        victim = int(df["id"].iloc[0])
        rows = df.index[df["id"] == victim]
        mid = rows[len(rows) // 2]
        df.loc[mid, "thw"] = -0.5  # standstill artifact: negative raw THW
        df.loc[mid, "xVelocity"] = 0.2
        last = rows[-1]
        df.loc[last, "x"] = df.loc[last, "x"] + 30.0  # corrupted final frame
        df.to_csv(paths.tracks_path, index=False)

        recording, _ = ingest.ingest_dataset(paths)
        cleaned, report = clean_recording(recording)
        assert [d.rule_id for d in report.discarded] == [RULE_NEGATIVE_THW]
        assert report.discarded[0].track_id == victim
        # Every surviving track is identical to its pristine trimmed self:
        # the corrupted last frame never reaches the analyses.
        for track in cleaned.tracks:
            pristine = truth.recording.track(track.track_id)
            assert np.array_equal(track.x, pristine.x[:-1])


def test_context_bin_normalization():
    """Rows sum to 100% within 1e-9; the lowest velocity bin ends at 30 km/h."""
    with criterion("context-bin-normalization"):
        rng = np.random.default_rng(99)
        events = [
            make_minima_event(
                value=float(rng.uniform(0.01, 0.99)),
                v_kmh=float(rng.uniform(0.0, 200.0)),
                track_id=i,
            )
            for i in range(500)
        ]
        events.append(make_minima_event(value=0.5, v_kmh=29.999, track_id=9001))
        events.append(make_minima_event(value=0.5, v_kmh=30.0, track_id=9002))
        table = context_bins(events, "velocity", "thw")
        for row, n in zip(table.percentages, table.row_n):
            if n > 0:
                assert abs(sum(row) - 100.0) <= 1e-9
        # Boundary events: 29.999 km/h lands in the first bin, 30.0 in the second.
        lone_below = context_bins(
            [make_minima_event(value=0.5, v_kmh=29.999)], "velocity", "thw"
        )
        lone_above = context_bins(
            [make_minima_event(value=0.5, v_kmh=30.0)], "velocity", "thw"
        )
        row_b = lone_below.percentages[lone_below.row_n.index(1)]
        row_a = lone_above.percentages[lone_above.row_n.index(1)]
        assert row_b[0] == 100.0 and row_a[1] == 100.0
