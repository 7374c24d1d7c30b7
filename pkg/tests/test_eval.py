import os

import pytest

import battery_scripts
from openti.dispatch import DispatchOutcome
from openti.errors import UnevenTrials
from openti.evalharness import (
    AblationResult,
    EvalRecord,
    LiveAgent,
    ReplayAgent,
    TaskCase,
    ablate,
    battery_seed_files,
    classify,
    error_rates,
    load_battery,
    run_battery,
)
from openti.toolkit import build_default_registry

REMOVAL_ORDER = ["Emphasis", "Reflection", "Format Restriction", "Example", "Description"]


def records_from_counts(per_task):
    records = []
    for task_id, counts in per_task.items():
        for outcome, n in counts.items():
            records.extend(
                EvalRecord(task_id=task_id, outcome=outcome) for _ in range(n)
            )
    return records


class TestErrorRates:
    def test_worked_arithmetic_example(self):
        records = records_from_counts(
            {
                "t1": {"ok": 18, "no_api_call": 1, "error_raise": 1},
                "t2": {"ok": 18, "mismatch": 2},
            }
        )
        report = error_rates(records)
        assert report.aggregate == pytest.approx(0.10)
        assert report.rho_no == pytest.approx(0.025)
        assert report.rho_miss == pytest.approx(0.05)
        assert report.rho_error == pytest.approx(0.025)

    def test_zero_errors(self):
        report = error_rates(records_from_counts({"a": {"ok": 20}, "b": {"ok": 20}}))
        assert report.aggregate == 0.0
        assert (report.rho_no, report.rho_miss, report.rho_error) == (0.0, 0.0, 0.0)

    def test_aggregate_is_component_sum(self):
        records = records_from_counts(
            {
                "a": {"ok": 15, "no_api_call": 2, "mismatch": 2, "error_raise": 1},
                "b": {"ok": 19, "error_raise": 1},
                "c": {"ok": 12, "no_api_call": 4, "mismatch": 4},
            }
        )
        report = error_rates(records)
        assert report.aggregate == pytest.approx(
            report.rho_no + report.rho_miss + report.rho_error
        )

    def test_uneven_trials_rejected(self):
        records = records_from_counts({"a": {"ok": 20}, "b": {"ok": 19}})
        with pytest.raises(UnevenTrials):
            error_rates(records)


class TestClassify:
    def case(self, expected_params=None):
        return TaskCase(
            task_id="2",
            utterance="show the campus",
            expected_tool="showOnMap",
            expected_params=expected_params,
        )

    def outcome(self, status="ok", tools=("showOnMap",), arguments=None):
        return DispatchOutcome(
            status=status,
            reply="done",
            matched_tool=tools[-1] if tools else "",
            tools_used=tuple(tools),
            arguments=arguments or {},
        )

    def test_expected_tool_ok(self):
        assert classify(self.outcome(), self.case()) == "ok"

    def test_wrong_tool_is_mismatch(self):
        outcome = self.outcome(tools=("queryAreaRange",))
        assert classify(outcome, self.case()) == "mismatch"

    def test_no_tools_is_no_api_call(self):
        assert classify(self.outcome(tools=()), self.case()) == "no_api_call"

    def test_statuses_pass_through(self):
        for status in ("no_api_call", "mismatch", "error_raise"):
            outcome = DispatchOutcome(status=status, reply="r")
            assert classify(outcome, self.case()) == status

    def test_wrong_parameters_count_as_error_raise(self):
        outcome = self.outcome(arguments={"bbox": [0, 0, 1, 1]})
        case = self.case(expected_params={"bbox": [-111.9431, 33.4154, -111.9239, 33.428]})
        assert classify(outcome, case) == "error_raise"

    def test_classification_is_pure(self):
        outcome = self.outcome(tools=("queryAreaRange",))
        first = classify(outcome, self.case())
        second = classify(outcome, self.case())
        assert first == second == "mismatch"


class TestReplayAgent:
    def test_battery_of_six_times_20(self, fixture_dir):
        agent = ReplayAgent.from_file(os.path.join(fixture_dir, "replay_primary.json"))
        battery = load_battery(
            os.path.join(os.path.dirname(battery_scripts.__file__), "..",
                         "src", "openti", "fixtures", "battery.json")
        )
        records = run_battery(battery, 20, agent)
        assert len(records) == 120
        report = error_rates(records)
        assert report.per_task["1"]["error_raise"] == 1
        assert report.per_task["4"]["error_raise"] == 2
        assert report.aggregate == pytest.approx(9 / 120)

    def test_baseline_replay_aggregate(self, fixture_dir):
        agent = ReplayAgent.from_file(os.path.join(fixture_dir, "replay_baseline.json"))
        battery = [
            TaskCase(task_id=str(i), utterance="x", expected_tool="showOnMap")
            for i in range(1, 7)
        ]
        report = error_rates(run_battery(battery, 20, agent))
        assert report.aggregate == pytest.approx(23 / 120)

    def test_fixture_row_sum_enforced(self):
        agent = ReplayAgent(trials=20, table={"1": {"ok": 5}})
        case = TaskCase(task_id="1", utterance="x", expected_tool="t")
        with pytest.raises(ValueError):
            agent.run_case(case, 0)


class TestLiveBattery:
    def live_agent(self, scripts, workspace):
        return LiveAgent(
            build_default_registry(),
            scripts,
            workspace,
            seed_files=battery_seed_files(),
        )

    def test_correct_scripts_all_ok(self, workspace):
        battery = load_battery(
            os.path.join(os.path.dirname(__file__), "..",
                         "src", "openti", "fixtures", "battery.json")
        )
        agent = self.live_agent(battery_scripts.CORRECT, workspace)
        records = run_battery(battery, 2, agent)
        assert all(r.outcome == "ok" for r in records), [
            (r.task_id, r.outcome) for r in records if r.outcome != "ok"
        ]

    def test_adversarial_three_classes(self, workspace):
        sumo_case = TaskCase(
            task_id="1",
            utterance="Run the SUMO simulation for the campus map.",
            expected_tool="simulateOnSUMO",
        )
        map_case = TaskCase(
            task_id="2",
            utterance="Show Arizona State University, Tempe Campus on the map.",
            expected_tool="showOnMap",
        )
        no_call = self.live_agent(battery_scripts.NO_API_CALL, workspace)
        assert no_call.run_case(sumo_case, 0).outcome == "no_api_call"

        mismatch = self.live_agent(battery_scripts.MISMATCH, workspace)
        assert mismatch.run_case(map_case, 0).outcome == "mismatch"

        error = self.live_agent(battery_scripts.ERROR_RAISE, workspace)
        assert error.run_case(map_case, 0).outcome == "error_raise"


class TestAblate:
    def battery(self, fixture_dir):
        return load_battery(os.path.join(fixture_dir, "ablation_battery.json"))

    def test_replay_matrix_shape_and_drops(self, fixture_dir, workspace):
        agent = ReplayAgent.from_file(os.path.join(fixture_dir, "replay_ablation.json"))
        result = ablate(self.battery(fixture_dir), 20, REMOVAL_ORDER, agent, workspace)
        assert len(result.accuracy) == 6
        assert all(len(row) == 4 for row in result.accuracy)
        col = result.task_names.index("showOnMap")
        example_step = REMOVAL_ORDER.index("Example") + 1
        drop = result.accuracy[example_step - 1][col] - result.accuracy[example_step][col]
        assert drop == pytest.approx(0.45, abs=0.01)
        col = result.task_names.index("simulateOnLibsignal")
        fr_step = REMOVAL_ORDER.index("Format Restriction") + 1
        drop = result.accuracy[fr_step - 1][col] - result.accuracy[fr_step][col]
        assert drop == pytest.approx(0.55, abs=0.01)
        with open(result.csv_path) as fh:
            lines = fh.read().splitlines()
        assert len(lines) == 7  # header + six masks
        assert os.path.exists(result.svg_path)

    def test_live_perfect_agent_accuracy_one(self, fixture_dir, workspace):
        agent = LiveAgent(
            build_default_registry(),
            battery_scripts.CORRECT,
            workspace,
            seed_files=battery_seed_files(),
        )
        result = ablate(self.battery(fixture_dir), 2, REMOVAL_ORDER, agent, workspace)
        for row in result.accuracy:
            assert row == [1.0, 1.0, 1.0, 1.0]

    def test_bad_removal_order_rejected(self, fixture_dir, workspace):
        agent = ReplayAgent.from_file(os.path.join(fixture_dir, "replay_ablation.json"))
        with pytest.raises(ValueError):
            ablate(self.battery(fixture_dir), 20, ["Emphasis"], agent, workspace)

    def test_heatmap_deterministic(self, fixture_dir, workspace, tmp_path_factory):
        agent = ReplayAgent.from_file(os.path.join(fixture_dir, "replay_ablation.json"))
        other = str(tmp_path_factory.mktemp("ab2"))
        first = ablate(self.battery(fixture_dir), 20, REMOVAL_ORDER, agent, workspace)
        second = ablate(self.battery(fixture_dir), 20, REMOVAL_ORDER, agent, other)
        with open(first.svg_path, "rb") as fh_a, open(second.svg_path, "rb") as fh_b:
            assert fh_a.read() == fh_b.read()


def test_eval_report_save(workspace):
    report = error_rates(records_from_counts({"a": {"ok": 20}}))
    path = report.save(os.path.join(workspace, "eval_report.json"))
    import json

    with open(path) as fh:
        payload = json.load(fh)
    assert payload["aggregate"] == 0.0
    assert payload["trials"] == 20
