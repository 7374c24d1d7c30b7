"""Simulation driver, controller protocol and the metric suite.

The driver advances the kernel one decision interval at a time; between
intervals every signalized intersection is observed and its controller asked
for the next phase. Metrics at the horizon:

  att_s       mean travel time of arrived vehicles (0 + flag when none)
  throughput  arrivals within the horizon
  avg_queue   time-mean of the total queued vehicle count
  avg_delay_s mean (travel - free-flow travel) over arrived vehicles
  total_reward  - sum over decision steps of the total queue at that step
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..errors import ControllerError, SchemaError
from .kernel import StepKernel
from .scenario import Scenario
from .state import build_kernel_inputs

METRIC_FIELDS = ("att_s", "throughput", "avg_queue", "avg_delay_s", "total_reward", "per_link_counts")


@dataclass(frozen=True)
class TscObservation:
    intersection_id: int
    queue_per_approach: tuple
    current_phase: int
    sim_time_s: int
    n_phases: int
    approach_links: tuple  # link ids aligned with queue_per_approach


@dataclass(frozen=True)
class TscAction:
    phase_index: int


@dataclass
class MetricsReport:
    att_s: float
    throughput: int
    avg_queue: float
    avg_delay_s: float
    total_reward: float
    per_link_counts: dict  # link_id -> {hour: count}
    no_arrivals: bool = False

    def to_json(self) -> dict:
        return {
            "att_s": self.att_s,
            "throughput": self.throughput,
            "avg_queue": self.avg_queue,
            "avg_delay_s": self.avg_delay_s,
            "total_reward": self.total_reward,
            "per_link_counts": {
                str(link): {str(h): c for h, c in hours.items()}
                for link, hours in self.per_link_counts.items()
            },
            "no_arrivals": self.no_arrivals,
        }

    def save(self, path) -> str:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return str(path)

    @classmethod
    def from_json(cls, payload: dict) -> "MetricsReport":
        for fieldname in METRIC_FIELDS:
            if fieldname not in payload:
                raise SchemaError(f"metrics payload missing field {fieldname!r}")
        counts = {
            int(link): {int(h): int(c) for h, c in hours.items()}
            for link, hours in payload["per_link_counts"].items()
        }
        return cls(
            att_s=float(payload["att_s"]),
            throughput=int(payload["throughput"]),
            avg_queue=float(payload["avg_queue"]),
            avg_delay_s=float(payload["avg_delay_s"]),
            total_reward=float(payload["total_reward"]),
            per_link_counts=counts,
            no_arrivals=bool(payload.get("no_arrivals", False)),
        )

    @classmethod
    def load(cls, path) -> "MetricsReport":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


@dataclass
class SimResult:
    depart: list
    arrive: list  # -1 for vehicles still in the network
    freeflow: list
    queue_timeline: list
    departed_timeline: list
    arrived_timeline: list
    transit_timeline: list
    decision_queue_totals: list
    phase_changes: list  # [(t, node_id, from_phase, to_phase)]
    counts: dict  # link_id -> {hour: count}

    def travel_times(self):
        return [
            arr - dep for dep, arr in zip(self.depart, self.arrive) if arr >= 0
        ]

    def delays(self):
        return [
            arr - dep - ff
            for dep, arr, ff in zip(self.depart, self.arrive, self.freeflow)
            if arr >= 0
        ]


class CyclingController:
    """Rotates phases on a fixed wall-clock green split; the engine default."""

    def __init__(self, green_s=30):
        if green_s <= 0:
            raise ValueError("green_s must be > 0")
        self.green_s = green_s

    def act(self, obs: TscObservation) -> TscAction:
        return TscAction(phase_index=(obs.sim_time_s // self.green_s) % obs.n_phases)


class SimDriver:
    def __init__(self, scenario: Scenario, horizon=None):
        self.scenario = scenario
        horizon = int(horizon if horizon is not None else scenario.settings.horizon_s)
        interval = scenario.settings.decision_interval_s
        if horizon <= 0 or horizon % interval:
            raise ValueError("horizon must be a positive multiple of the decision interval")
        self.horizon = horizon
        self.interval = interval
        self.inputs = build_kernel_inputs(scenario, horizon=horizon)
        self.kernel = StepKernel(self.inputs)
        self.decision_queue_totals = []
        self.phase_changes = []
        self._phase_counts = self.inputs.phase_cnt
        self._hours = list(scenario.od.hours) or [0]

    @property
    def done(self) -> bool:
        return self.kernel.t >= self.horizon

    @property
    def sim_time(self) -> int:
        return self.kernel.t

    def observations(self):
        obs = []
        inp = self.inputs
        for i in range(inp.n_intersections):
            a0, a1 = inp.app_off[i], inp.app_off[i + 1]
            approaches = inp.app_flat[a0:a1]
            obs.append(
                TscObservation(
                    intersection_id=inp.node_ids[i],
                    queue_per_approach=tuple(self.kernel.queue_len(a) for a in approaches),
                    current_phase=int(self.kernel.phase_view(i)),
                    sim_time_s=int(self.kernel.t),
                    n_phases=int(self._phase_counts[i]),
                    approach_links=tuple(inp.link_ids[a] for a in approaches),
                )
            )
        return obs

    def apply_actions(self, actions: dict):
        """actions: node_id -> TscAction. Invalid phases never reach the kernel."""
        inp = self.inputs
        index = {node_id: i for i, node_id in enumerate(inp.node_ids)}
        for node_id, action in actions.items():
            if node_id not in index:
                raise ControllerError(f"unknown intersection {node_id}")
            i = index[node_id]
            phase = action.phase_index
            if not 0 <= phase < self._phase_counts[i]:
                raise ControllerError(
                    f"intersection {node_id}: phase {phase} out of range "
                    f"[0, {self._phase_counts[i]})"
                )
            before = int(self.kernel.phase_view(i))
            if self.kernel.set_phase(i, phase):
                self.phase_changes.append((int(self.kernel.t), node_id, before, phase))

    def advance_interval(self):
        self.kernel.advance(self.interval)
        self.decision_queue_totals.append(int(self.kernel.queue_total_at(self.kernel.t - 1)))

    def finish(self):
        if not self.done:
            raise ValueError("run not complete")
        k = self.kernel
        inp = self.inputs
        depart = list(inp.depart)
        arrive = list(k.arrive)[: inp.n_vehicles]
        freeflow = list(inp.freeflow)
        travel = [a - d for d, a in zip(depart, arrive) if a >= 0]
        arrived = len(travel)
        counts = {}
        kernel_counts = k.counts
        for idx in range(inp.n_links):
            row = kernel_counts[idx]
            hours = {self._hours[h]: int(row[h]) for h in range(inp.n_hours) if row[h]}
            if hours:
                counts[inp.link_ids[idx]] = hours
        queue_timeline = list(k.queue_timeline)
        result = SimResult(
            depart=depart,
            arrive=arrive,
            freeflow=freeflow,
            queue_timeline=queue_timeline,
            departed_timeline=list(k.departed_timeline),
            arrived_timeline=list(k.arrived_timeline),
            transit_timeline=list(k.transit_timeline),
            decision_queue_totals=list(self.decision_queue_totals),
            phase_changes=list(self.phase_changes),
            counts=counts,
        )
        delays = [a - d - f for d, a, f in zip(depart, arrive, freeflow) if a >= 0]
        metrics = MetricsReport(
            att_s=(sum(travel) / arrived) if arrived else 0.0,
            throughput=arrived,
            avg_queue=sum(queue_timeline) / self.horizon,
            avg_delay_s=(sum(delays) / arrived) if arrived else 0.0,
            total_reward=-float(sum(self.decision_queue_totals)),
            per_link_counts=counts,
            no_arrivals=arrived == 0,
        )
        if metrics.throughput > k.departed:
            raise AssertionError("throughput exceeds departures")
        return result, metrics


def run(scenario: Scenario, controller=None, horizon_override=None):
    """Simulate the scenario under a controller; returns (SimResult, MetricsReport)."""
    controller = controller or CyclingController()
    driver = SimDriver(scenario, horizon=horizon_override)
    if hasattr(controller, "begin_episode"):
        controller.begin_episode()
    while not driver.done:
        actions = {}
        for obs in driver.observations():
            action = controller.act(obs)
            if not isinstance(action, TscAction):
                raise ControllerError(f"controller returned {type(action).__name__}")
            actions[obs.intersection_id] = action
        driver.apply_actions(actions)
        driver.advance_interval()
    return driver.finish()
