"""Task battery execution, the three-way error taxonomy and error rates.

A battery is a list of task cases, each dispatched `trials` times against an
agent (live dispatcher with a scripted mock, or a replay of recorded
outcomes). Classification of a dispatch is a pure function of its outcome:

  ok           expected tool ran, parameters consistent
  no_api_call  answered without any tool although one was expected
  mismatch     a different tool did the work
  error_raise  right tool but bad input, a failing handler, or grammar noise

Error rate = (1/T) sum_t n_err_t / n_trials_t, decomposed into the
no-call / mismatch / error-raise components with the same averaging, so the
aggregate is exactly the sum of the three components.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from .descriptors import PROMPT_FIELD_NAMES
from .dispatch import DispatchOutcome, Dispatcher
from .errors import UnevenTrials
from .gateway import Gateway, MockBackend
from .session import SessionState
from .svgutil import SvgCanvas, gray

OUTCOMES = ("ok", "no_api_call", "mismatch", "error_raise")


@dataclass(frozen=True)
class TaskCase:
    task_id: str
    utterance: str
    expected_tool: str
    expected_params: dict = None


@dataclass(frozen=True)
class EvalRecord:
    task_id: str
    outcome: str
    matched_tool: str = ""
    transcript_ref: str = ""

    def __post_init__(self):
        if self.outcome not in OUTCOMES:
            raise ValueError(f"bad outcome {self.outcome!r}")


@dataclass
class EvalReport:
    task_count: int
    trials: int
    per_task: dict  # task_id -> {outcome: count}
    rho_no: float
    rho_miss: float
    rho_error: float
    aggregate: float

    def to_json(self) -> dict:
        return {
            "task_count": self.task_count,
            "trials": self.trials,
            "per_task": self.per_task,
            "rho_no": self.rho_no,
            "rho_miss": self.rho_miss,
            "rho_error": self.rho_error,
            "aggregate": self.aggregate,
        }

    def save(self, path) -> str:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return str(path)


def battery_seed_files() -> dict:
    """Input files every live battery session starts with: a small map plus
    a metrics report and a training curve for the analysis tasks."""
    fixture_osm = os.path.join(
        os.path.dirname(__file__), "fixtures", "osm", "asu_tempe.osm"
    )
    with open(fixture_osm, "r", encoding="utf-8") as fh:
        osm_text = fh.read()
    metrics = json.dumps(
        {
            "att_s": 120.0,
            "throughput": 180,
            "avg_queue": 3.5,
            "avg_delay_s": 45.0,
            "total_reward": -1260.0,
            "per_link_counts": {"1": {"8": 180}},
            "no_arrivals": False,
        }
    )
    curve = (
        "episode,total_reward,att_s,throughput,avg_queue,avg_delay_s\n"
        "0,-1500.0,130.0,170,4.0,50.0\n"
        "1,-1200.0,121.0,178,3.4,44.0\n"
    )
    return {"map.osm": osm_text, "metrics.json": metrics, "training_curve.csv": curve}


def load_battery(path) -> list:
    with open(path, "r", encoding="utf-8") as fh:
        entries = json.load(fh)
    return [
        TaskCase(
            task_id=str(e["task_id"]),
            utterance=e["utterance"],
            expected_tool=e["expected_tool"],
            expected_params=e.get("expected_params"),
        )
        for e in entries
    ]


def classify(outcome: DispatchOutcome, case: TaskCase) -> str:
    """Map a dispatch outcome onto the taxonomy; pure and replayable."""
    if outcome.status != "ok":
        return outcome.status
    if case.expected_tool and case.expected_tool not in outcome.tools_used:
        return "mismatch" if outcome.tools_used else "no_api_call"
    if case.expected_params:
        for key, wanted in case.expected_params.items():
            if outcome.arguments.get(key) != wanted:
                return "error_raise"  # right tool, wrong information
    return "ok"


class LiveAgent:
    """Runs each trial through the real dispatcher with a scripted mock."""

    def __init__(self, registry, scripts, workspace, max_query=3, seed_files=None):
        self.registry = registry
        self.scripts = list(scripts)
        self.workspace = workspace
        self.max_query = max_query
        self.seed_files = dict(seed_files or {})

    def run_case(self, case: TaskCase, trial: int, mask=frozenset()) -> EvalRecord:
        session = SessionState(self.workspace)
        for name, data in self.seed_files.items():
            with open(os.path.join(session.artifact_dir, name), "w", encoding="utf-8") as fh:
                fh.write(data)
        gateway = Gateway(MockBackend(self.scripts))
        dispatcher = Dispatcher(
            self.registry, gateway, max_query=self.max_query, ablation_mask=mask
        )
        outcome = dispatcher.dispatch(session, case.utterance, expected_tool=case.expected_tool)
        return EvalRecord(
            task_id=case.task_id,
            outcome=classify(outcome, case),
            matched_tool=outcome.matched_tool,
            transcript_ref=session.session_id,
        )


class ReplayAgent:
    """Replays recorded outcome tallies; trials expand deterministically."""

    def __init__(self, trials: int, table: dict, steps: list = None):
        self.trials = trials
        self.table = table  # task_id -> {outcome: count}
        self.steps = steps  # ablation: list of tables indexed by |mask|

    @classmethod
    def from_file(cls, path) -> "ReplayAgent":
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        return cls(
            trials=int(payload["trials"]),
            table=payload.get("tasks", {}),
            steps=payload.get("steps"),
        )

    def _counts(self, case: TaskCase, mask) -> dict:
        if self.steps is not None:
            return self.steps[len(mask)][case.task_id]
        return self.table[case.task_id]

    def run_case(self, case: TaskCase, trial: int, mask=frozenset()) -> EvalRecord:
        counts = self._counts(case, mask)
        sequence = []
        for outcome in OUTCOMES:
            sequence.extend([outcome] * int(counts.get(outcome, 0)))
        if len(sequence) != self.trials:
            raise ValueError(
                f"task {case.task_id}: fixture rows sum to {len(sequence)}, "
                f"expected {self.trials}"
            )
        outcome = sequence[trial]
        return EvalRecord(
            task_id=case.task_id,
            outcome=outcome,
            matched_tool=case.expected_tool if outcome == "ok" else "",
            transcript_ref=f"replay:{case.task_id}:{trial}",
        )


def run_battery(battery, trials: int, agent, seed: int = 0, mask=frozenset()) -> list:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    records = []
    for case in battery:
        for trial in range(trials):
            records.append(agent.run_case(case, trial, mask))
    return records


def error_rates(records) -> EvalReport:
    if not records:
        raise ValueError("no records")
    per_task = {}
    for record in records:
        counts = per_task.setdefault(
            record.task_id, {outcome: 0 for outcome in OUTCOMES}
        )
        counts[record.outcome] += 1
    totals = {task: sum(counts.values()) for task, counts in per_task.items()}
    trial_counts = set(totals.values())
    if len(trial_counts) != 1:
        raise UnevenTrials(f"per-task trial counts differ: {sorted(totals.items())}")
    n = trial_counts.pop()
    t_count = len(per_task)

    def rate(outcome):
        return sum(counts[outcome] / n for counts in per_task.values()) / t_count

    rho_no = rate("no_api_call")
    rho_miss = rate("mismatch")
    rho_error = rate("error_raise")
    return EvalReport(
        task_count=t_count,
        trials=n,
        per_task=per_task,
        rho_no=rho_no,
        rho_miss=rho_miss,
        rho_error=rho_error,
        aggregate=rho_no + rho_miss + rho_error,
    )


@dataclass
class AblationResult:
    mask_labels: list
    task_names: list
    accuracy: list  # rows = masks, cols = tasks
    csv_path: str = ""
    svg_path: str = ""


def ablate(battery, trials: int, removal_order, agent, out_dir) -> AblationResult:
    """Cumulative prompt-component removal, re-running the battery per mask."""
    if sorted(removal_order) != sorted(PROMPT_FIELD_NAMES):
        raise ValueError(
            f"removal_order must be a permutation of {PROMPT_FIELD_NAMES}"
        )
    masks = [frozenset()]
    for name in removal_order:
        masks.append(masks[-1] | {name})
    labels = ["none"] + ["-" + " -".join(removal_order[: k + 1]) for k in range(len(removal_order))]

    task_names = [case.expected_tool for case in battery]
    matrix = []
    for mask in masks:
        row = []
        for case in battery:
            records = run_battery([case], trials, agent, mask=mask)
            ok = sum(1 for r in records if r.outcome == "ok")
            row.append(ok / trials)
        matrix.append(row)

    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "ablation.csv")
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("mask," + ",".join(task_names) + "\n")
        for label, row in zip(labels, matrix):
            fh.write(label + "," + ",".join(f"{v:.4f}" for v in row) + "\n")
    svg_path = _heatmap(matrix, labels, task_names, os.path.join(out_dir, "ablation.svg"))
    return AblationResult(
        mask_labels=labels,
        task_names=task_names,
        accuracy=matrix,
        csv_path=csv_path,
        svg_path=svg_path,
    )


def _heatmap(matrix, row_labels, col_labels, path) -> str:
    cell = 96.0
    left, top = 230.0, 60.0
    rows, cols = len(matrix), len(matrix[0])
    canvas = SvgCanvas(left + cols * cell + 20, top + rows * cell + 20)
    for c, name in enumerate(col_labels):
        canvas.text(left + c * cell + cell / 2, top - 12, name, size=11, anchor="middle")
    for r, row in enumerate(matrix):
        canvas.text(left - 8, top + r * cell + cell / 2 + 4, row_labels[r], size=11, anchor="end")
        for c, value in enumerate(row):
            canvas.rect(
                left + c * cell, top + r * cell, cell, cell,
                fill=gray(value), stroke="#ffffff", stroke_width=1.0,
            )
            text_fill = "#ffffff" if value > 0.5 else "#000000"
            canvas.text(
                left + c * cell + cell / 2,
                top + r * cell + cell / 2 + 4,
                f"{value:.2f}",
                size=12,
                fill=text_fill,
                anchor="middle",
            )
    canvas.write(path)
    return path
