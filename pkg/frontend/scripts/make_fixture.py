"""Regenerate the committed test-fixture bundle from the primary package.

Builds one composite synthetic recording (multi-lane streams, a braking
closing pair and a lane change, so every artifact kind carries data), runs
the full analysis pipeline and emits the bundle into tests/fixtures/bundle.

Usage: python scripts/make_fixture.py
"""

from pathlib import Path

import numpy as np

from trajcrit import synth
from trajcrit.cli import RunConfig, run_pipeline
from trajcrit.report import emit
from trajcrit.synth import LaneSwitch, Phase, ScenarioScript, VehicleScript

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "bundle"


def composite_script() -> ScenarioScript:
    rng = np.random.default_rng(4242)
    vehicles: list[VehicleScript] = []
    tid = 1

    def pulse(entry_t: float) -> tuple[Phase, ...]:
        # A gentle speed wobble (net zero) so acceleration histograms carry a
        # real distribution instead of a point mass at zero. Durations snap
        # to the frame grid.
        lead_in = round((entry_t + float(rng.uniform(0.5, 30.0))) * 25.0) / 25.0
        amp = round(float(rng.uniform(0.1, 0.5)), 2)
        return (Phase(lead_in, 0.0), Phase(2.0, amp), Phase(2.0, -amp))

    # Streams on the two lower lanes of synthetic location 102.
    for lane, speed in ((2, 24.0), (3, 31.0)):
        t_entry = 0.4
        while t_entry < 110.0:
            k_entry = round(t_entry * 25.0)
            is_truck = lane == 2 and rng.uniform() < 0.25
            vehicles.append(VehicleScript(
                track_id=tid,
                x0=-speed * (k_entry / 25.0),
                v0=speed,
                lane_id=lane,
                vehicle_class="truck" if is_truck else "car",
                length=12.0 if is_truck else 4.5,
                phases=pulse(k_entry / 25.0),
            ))
            tid += 1
            t_entry += float(rng.uniform(2.2, 3.6))

    # Upper-road stream for a second driving direction.
    t_entry = 0.8
    while t_entry < 110.0:
        k_entry = round(t_entry * 25.0)
        vehicles.append(VehicleScript(
            track_id=tid, x0=-27.0 * (k_entry / 25.0), v0=27.0, lane_id=5,
            phases=pulse(k_entry / 25.0),
        ))
        tid += 1
        t_entry += float(rng.uniform(2.0, 3.2))

    # A braking closing pair far downstream on its own stretch of lane 2:
    # produces positive TTC frames, risk events and RP-study members.
    vehicles.append(VehicleScript(
        track_id=9001, x0=2600.0, v0=25.0, lane_id=2, length=5.0,
    ))
    vehicles.append(VehicleScript(
        track_id=9002, x0=2540.0, v0=30.0, lane_id=2, length=5.0,
        phases=(Phase(7.2, 0.0), Phase(2.0, -2.5)),
    ))
    # A lane change for the lane-change-rate artifact.
    vehicles.append(VehicleScript(
        track_id=9003, x0=2400.0, v0=31.0, lane_id=2,
        lane_plan=(LaneSwitch(6.0, 3),),
    ))
    return ScenarioScript(
        kind="frontend_fixture",
        recording_id=42,
        duration=120.0,
        segment_length=3600.0,
        vehicles=tuple(vehicles),
        location_id=synth.SYNTH_LOCATION_2,
    )


def main() -> None:
    truth = synth.generate(composite_script())
    config = RunConfig(scenario="frontend_fixture", seed=0, out_dir=str(OUT))
    bundle = run_pipeline(truth.recording, None, config, None)
    bundle.input_digest = "fixture"
    emit(bundle, OUT)
    print(f"wrote {len(bundle.artifacts)} artifacts to {OUT}")


if __name__ == "__main__":
    main()
