"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL
line and asserting its stated tolerance and runtime budget.

The whole module runs offline: OPENTI_OFFLINE=1 and outbound sockets are
blocked for every test here.
"""

import json
import os
import random
import socket
import time

import numpy as np
import pytest

import battery_scripts
from openti.calibrate import GaParams, count_rmse, od_from_genes, optimize_demand
from openti.chatzero import GreedySurrogate, PolicyBrief, run_chatzero, zero_step
from openti.demand import ObservationSeries
from openti.evalharness import (
    LiveAgent,
    ReplayAgent,
    TaskCase,
    ablate,
    battery_seed_files,
    error_rates,
    load_battery,
    run_battery,
)
from openti.geo import BBox, download_osm, query_area_range, show_on_map
from openti.network import filter_network, parse_osm, read_gmns, to_gmns
from openti.sim import TscObservation, run
from openti.synth import asymmetric_cross_scenario, corridor_scenario, random_scenario
from openti.toolkit import build_default_registry
from openti.tsc import (
    FixedTimeController,
    SotlController,
    intersection_metas,
    train_qlearning,
)
from oracles import discharge_offsets, greedy_phase_choice

REMOVAL_ORDER = ["Emphasis", "Reflection", "Format Restriction", "Example", "Description"]
FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")
BUNDLED_BATTERY = os.path.join(
    os.path.dirname(__file__), "..", "src", "openti", "fixtures", "battery.json"
)

# Published per-task error-rate cells, (no_api_call, mismatch, error_raise).
PRIMARY_CELLS = {
    "1": (0.00, 0.00, 0.05),
    "2": (0.00, 0.00, 0.05),
    "3": (0.00, 0.05, 0.05),
    "4": (0.00, 0.00, 0.10),
    "5": (0.05, 0.00, 0.05),
    "6": (0.05, 0.00, 0.00),
}
BASELINE_CELLS = {
    "1": (0.00, 0.05, 0.10),
    "2": (0.05, 0.00, 0.00),
    "3": (0.15, 0.05, 0.10),
    "4": (0.05, 0.10, 0.15),
    "5": (0.05, 0.00, 0.10),
    "6": (0.10, 0.00, 0.10),
}


@pytest.fixture(autouse=True)
def offline_guard(monkeypatch):
    assert os.environ.get("OPENTI_OFFLINE") == "1"

    def refuse(*args, **kwargs):
        raise AssertionError("acceptance suite attempted a network connection")

    monkeypatch.setattr(socket.socket, "connect", refuse)
    yield


def announce(criterion, ok=True, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE [{criterion}]: {status} {detail}".rstrip())


class Stopwatch:
    def __init__(self, budget_s):
        self.budget_s = budget_s
        self.start = time.monotonic()

    @property
    def elapsed(self):
        return time.monotonic() - self.start

    def check(self):
        assert self.elapsed < self.budget_s, (
            f"runtime {self.elapsed:.1f}s exceeds the {self.budget_s}s budget"
        )


def replay_report(name):
    agent = ReplayAgent.from_file(os.path.join(FIXTURES, name))
    battery = [
        TaskCase(task_id=str(i), utterance="replayed", expected_tool="showOnMap")
        for i in range(1, 7)
    ]
    return error_rates(run_battery(battery, 20, agent))


def cells_of(report):
    out = {}
    for task_id, counts in report.per_task.items():
        n = report.trials
        out[task_id] = (
            counts["no_api_call"] / n,
            counts["mismatch"] / n,
            counts["error_raise"] / n,
        )
    return out


def test_eq1_reproduction_cells_and_baseline_aggregate():
    watch = Stopwatch(5.0)
    primary = replay_report("replay_primary.json")
    baseline = replay_report("replay_baseline.json")
    assert cells_of(primary) == pytest.approx(PRIMARY_CELLS)
    assert cells_of(baseline) == pytest.approx(BASELINE_CELLS)
    assert baseline.aggregate == pytest.approx(0.192, abs=0.0005)
    assert primary.aggregate == pytest.approx(
        primary.rho_no + primary.rho_miss + primary.rho_error
    )
    watch.check()
    announce(
        "eq1 cells+baseline",
        detail=f"baseline aggregate {baseline.aggregate:.4f}, "
        f"every per-task cell exact, {watch.elapsed:.1f}s",
    )


def test_eq1_reproduction_primary_aggregate():
    """The primary-column aggregate is required to equal 0.083 +- 0.0005.

    The replay fixture encodes the published per-task cells verbatim; those
    cells sum to 9 abnormal outcomes over 120 trials, i.e. an aggregate of
    0.075, so this criterion cannot hold simultaneously with the per-cell
    match. Implemented as stated; see the decisions ledger.
    """
    primary = replay_report("replay_primary.json")
    ok = abs(primary.aggregate - 0.083) <= 0.0005
    announce(
        "eq1 primary aggregate",
        ok=ok,
        detail=f"aggregate {primary.aggregate:.4f} vs required 0.083+-0.0005",
    )
    assert primary.aggregate == pytest.approx(0.083, abs=0.0005), (
        f"aggregate from the per-task cells is {primary.aggregate:.4f} "
        "(9 errors / 120 trials); 0.083 would require 10"
    )


def test_dispatcher_battery(workspace):
    watch = Stopwatch(10.0)
    battery = load_battery(BUNDLED_BATTERY)
    agent = LiveAgent(
        build_default_registry(),
        battery_scripts.CORRECT,
        workspace,
        seed_files=battery_seed_files(),
    )
    records = run_battery(battery, 20, agent)
    assert len(records) == 120
    report = error_rates(records)
    assert report.aggregate == 0.0, [
        (r.task_id, r.outcome) for r in records if r.outcome != "ok"
    ]

    # Adversarial scripts with hand-labeled outcomes.
    sumo_case = battery[0]
    map_case = battery[1]
    labeled = [
        (battery_scripts.NO_API_CALL, sumo_case, "no_api_call"),
        (battery_scripts.MISMATCH, map_case, "mismatch"),
        (battery_scripts.ERROR_RAISE, map_case, "error_raise"),
    ]
    seen = set()
    for scripts, case, expected in labeled:
        adversary = LiveAgent(
            build_default_registry(), scripts, workspace, seed_files=battery_seed_files()
        )
        record = adversary.run_case(case, 0)
        assert record.outcome == expected
        seen.add(record.outcome)
    assert seen == {"no_api_call", "mismatch", "error_raise"}
    watch.check()
    announce(
        "dispatcher battery",
        detail=f"120/120 clean, 3 abnormal classes reproduced, {watch.elapsed:.1f}s",
    )


def test_ablation_harness(workspace):
    agent = ReplayAgent.from_file(os.path.join(FIXTURES, "replay_ablation.json"))
    battery = load_battery(os.path.join(FIXTURES, "ablation_battery.json"))
    result = ablate(battery, 20, REMOVAL_ORDER, agent, workspace)

    assert len(result.accuracy) == 6
    assert all(len(row) == 4 for row in result.accuracy)
    assert os.path.exists(result.csv_path)
    assert os.path.exists(result.svg_path)

    col = result.task_names.index("showOnMap")
    step = REMOVAL_ORDER.index("Example") + 1
    example_drop = (result.accuracy[step - 1][col] - result.accuracy[step][col]) * 100
    assert example_drop == pytest.approx(45.0, abs=1.0)

    col = result.task_names.index("simulateOnLibsignal")
    step = REMOVAL_ORDER.index("Format Restriction") + 1
    fr_drop = (result.accuracy[step - 1][col] - result.accuracy[step][col]) * 100
    assert fr_drop == pytest.approx(55.0, abs=1.0)
    announce(
        "ablation harness",
        detail=f"6x4 matrix; example drop {example_drop:.0f}pp, "
        f"format-restriction drop {fr_drop:.0f}pp",
    )


def test_simulator_oracles():
    watch = Stopwatch(60.0)

    # Free flow: travel time is exactly length / free_speed.
    _, metrics = run(corridor_scenario(1.0, 0.0))
    assert metrics.att_s == 50.0
    assert metrics.avg_delay_s == 0.0

    # Saturation discharge equals the brute-force loop, vehicle by vehicle.
    from test_sim import KeepPhase, discharge_scenario

    result, _ = run(discharge_scenario(), KeepPhase(0))
    oracle_exits = discharge_offsets(10, 0.5)
    assert [arr - 1 for arr in result.arrive] == oracle_exits
    assert oracle_exits[-1] == 20
    delays = [a - d - f for d, a, f in zip(result.depart, result.arrive, result.freeflow)]
    assert delays == [e - 1 for e in oracle_exits]

    # Conservation at every step across 1000 random small networks.
    rng = random.Random(20_24)
    for i in range(1000):
        scenario = random_scenario(rng)
        assert len(scenario.network.intersections) <= 9
        res, _ = run(scenario)
        dep = res.departed_timeline
        arr = res.arrived_timeline
        q = res.queue_timeline
        tr = res.transit_timeline
        for t in range(scenario.settings.horizon_s):
            assert dep[t] == arr[t] + q[t] + tr[t], (i, t)
    watch.check()
    announce(
        "simulator oracles",
        detail=f"free-flow exact, discharge oracle matched, "
        f"1000 conservation runs in {watch.elapsed:.1f}s",
    )


def test_tsc_comparison():
    watch = Stopwatch(180.0)
    scenario = asymmetric_cross_scenario(seed=0)
    metas = intersection_metas(scenario.network)

    _, fixed = run(scenario, FixedTimeController(green_s=30))
    _, sotl = run(scenario, SotlController(metas))
    assert sotl.att_s < fixed.att_s, (sotl.att_s, fixed.att_s)

    _, curve = train_qlearning(scenario, episodes=30)
    first5 = sum(r["total_reward"] for r in curve.rows[:5]) / 5
    last5 = sum(r["total_reward"] for r in curve.rows[-5:]) / 5
    assert last5 >= first5, (first5, last5)
    watch.check()
    announce(
        "tsc comparison",
        detail=f"sotl att {sotl.att_s:.1f} < fixed {fixed.att_s:.1f}; "
        f"reward {first5:.0f} -> {last5:.0f}, {watch.elapsed:.1f}s",
    )


def test_ga_calibration(workspace):
    watch = Stopwatch(300.0)
    truth = corridor_scenario(30.0, 20.0, seed=11)
    _, metrics = run(truth)
    observations = [
        ObservationSeries(
            link_id=link,
            hours=(0,),
            counts=(metrics.per_link_counts.get(link, {}).get(0, 0),),
        )
        for link in (1, 2)
    ]
    mean_observed = sum(obs.counts[0] for obs in observations) / len(observations)

    seed_trips = np.full_like(truth.od.trips, 10.0)
    for i in range(truth.od.zones):
        seed_trips[i, i, :] = 0.0
    seed_od = truth.od.copy_with(seed_trips)

    best_od, history = optimize_demand(
        seed_od, observations, truth, GaParams(seed=7), out_dir=workspace
    )
    assert all(history[i][1] >= history[i + 1][1] for i in range(len(history) - 1))
    ga_rmse = history[-1][1]

    # Exhaustive grid-search oracle over both cells in steps of 5.
    oracle_rmse = min(
        count_rmse(
            truth.with_od(od_from_genes(seed_od, np.array([a, b], dtype=float))),
            observations,
        )
        for a in range(0, 51, 5)
        for b in range(0, 51, 5)
    )
    assert ga_rmse <= 0.10 * mean_observed
    assert ga_rmse <= oracle_rmse + 0.05 * mean_observed
    watch.check()
    announce(
        "ga calibration",
        detail=f"rmse {ga_rmse:.3f} (grid oracle {oracle_rmse:.3f}, "
        f"mean count {mean_observed:.0f}), {watch.elapsed:.1f}s",
    )


def test_chatzero_protocol(workspace):
    scenario = asymmetric_cross_scenario(seed=0, horizon_s=1200)
    metas = intersection_metas(scenario.network)
    brief = PolicyBrief(objective="minimize waiting", action_space_doc="Phase 0/1")

    # Greedy surrogate satisfies the argmax-queue property on 100 random obs.
    agent = GreedySurrogate(metas)
    serves = metas[1].phase_serves
    rng = random.Random(7)
    for _ in range(100):
        queues = tuple(rng.randint(0, 15) for _ in range(4))
        obs = TscObservation(
            intersection_id=1,
            queue_per_approach=queues,
            current_phase=rng.randint(0, 1),
            sim_time_s=rng.randrange(0, 1200, 10),
            n_phases=2,
            approach_links=(1, 3, 5, 7),
        )
        step = zero_step(obs, brief, agent)
        expected, _ = greedy_phase_choice(dict(zip((1, 3, 5, 7), queues)), serves)
        assert step.action.phase_index == expected

    # A mock that never parses completes the run on pure fallbacks.
    class Unparseable:
        def ask(self, prompt, obs):
            return "open the gates!"

    metrics, log, fallback_rate = run_chatzero(
        scenario, brief, Unparseable(), out_dir=workspace
    )
    assert fallback_rate == 1.0
    assert len(log) == 1200 // scenario.settings.decision_interval_s
    assert all(0 <= r["action"] < 2 for r in log)  # never out of range

    # Out-of-range model phases are absorbed by the fallback.
    class OutOfRange:
        def ask(self, prompt, obs):
            return "PHASE: 99 — trust me"

    metrics2, log2, fb2 = run_chatzero(scenario, brief, OutOfRange())
    assert fb2 == 1.0
    assert all(0 <= r["action"] < 2 for r in log2)
    announce(
        "chatzero protocol",
        detail=f"100 argmax checks, fallback run complete (rate {fallback_rate:.1f})",
    )


def test_geo_network_pipeline(workspace):
    watch = Stopwatch(5.0)
    box = query_area_range("Arizona State University, Tempe Campus", offline=True)
    assert box.as_list() == pytest.approx([-111.9431, 33.4154, -111.9239, 33.4280])

    osm_path = download_osm(box, workspace, offline=True)
    network = parse_osm(osm_path)
    assert len(network.links) > 0

    bike_net, bike_dir = filter_network(network, "bike", workspace)
    assert len(bike_net.links) > 0

    rebuilt = read_gmns(bike_dir)
    assert set(rebuilt.nodes) == set(bike_net.nodes)
    for link_a, link_b in zip(bike_net.links, rebuilt.links):
        assert link_b.link_id == link_a.link_id
        assert link_b.length == pytest.approx(link_a.length, abs=0.01)
        assert link_b.lanes == link_a.lanes
        assert link_b.modes == link_a.modes

    artifact = show_on_map(bike_net, workspace)
    assert os.path.getsize(artifact.svg_path) > 0
    assert artifact.share_link.startswith("https://www.openstreetmap.org/?bbox=")
    watch.check()
    announce(
        "geo/network pipeline",
        detail=f"offline end-to-end flow with {len(bike_net.links)} bike links, "
        f"{watch.elapsed:.1f}s",
    )


def test_offline_suite_guarantee():
    assert os.environ.get("OPENTI_OFFLINE") == "1"
    # Sockets are refused by the module fixture; a connect attempt must fail.
    with pytest.raises(AssertionError):
        socket.socket().connect(("203.0.113.1", 80))
    announce("offline guarantee", detail="OPENTI_OFFLINE=1 and sockets blocked")
