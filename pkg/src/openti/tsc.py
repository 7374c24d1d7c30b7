"""Signal-control policy zoo and the tabular Q-learning trainer.

All controllers speak the same protocol: act(TscObservation) -> TscAction,
one call per intersection per decision interval. Multi-intersection control
is decentralized; every intersection keeps its own state/table.
"""

from __future__ import annotations

import csv
import json
import random
from bisect import bisect_right
from dataclasses import dataclass, field

from .errors import EmptyCurve, InvalidSpec
from .sim import SimDriver, TscAction
from .svgutil import SvgCanvas

POLICY_KINDS = ("fixedtime", "sotl", "qlearning", "chatzero")

FIXEDTIME_DEFAULTS = {"green_s": 30}
SOTL_DEFAULTS = {"theta": 30.0, "min_green_s": 10, "mu": 3}
QLEARNING_DEFAULTS = {
    "alpha": 0.1,
    "gamma": 0.95,
    "epsilon0": 0.2,
    "epsilon_decay": 0.995,
    "bins": (0, 1, 4, 8),
}


@dataclass(frozen=True)
class PolicySpec:
    kind: str
    params: dict = field(default_factory=dict)

    def merged(self) -> dict:
        defaults = {
            "fixedtime": FIXEDTIME_DEFAULTS,
            "sotl": SOTL_DEFAULTS,
            "qlearning": QLEARNING_DEFAULTS,
            "chatzero": {},
        }[self.kind]
        out = dict(defaults)
        out.update(self.params)
        return out


@dataclass(frozen=True)
class IntersectionMeta:
    node_id: int
    n_phases: int
    approaches: tuple  # link ids, observation order
    phase_serves: tuple  # per phase: frozenset of served approach link ids


def intersection_metas(network) -> dict:
    metas = {}
    for inter in network.intersections:
        serves = tuple(
            frozenset(m[0] for m in phase) for phase in inter.phases
        )
        metas[inter.node_id] = IntersectionMeta(
            node_id=inter.node_id,
            n_phases=len(inter.phases),
            approaches=tuple(inter.approaches),
            phase_serves=serves,
        )
    return metas


class FixedTimeController:
    """Rotate phases every green_s seconds of wall-clock time."""

    def __init__(self, green_s=30):
        if green_s <= 0:
            raise InvalidSpec("fixedtime: green_s must be > 0")
        self.green_s = int(green_s)

    def act(self, obs) -> TscAction:
        return TscAction(phase_index=(obs.sim_time_s // self.green_s) % obs.n_phases)


class SotlController:
    """Self-organizing threshold rule.

    Switch away from the current phase once the red-side pressure
    (queued vehicles on red approaches x seconds since the last switch)
    reaches theta, the minimum green has elapsed, and no platoon larger
    than mu is crossing.
    """

    def __init__(self, metas, theta=30.0, min_green_s=10, mu=3):
        if theta <= 0 or min_green_s < 0 or mu < 0:
            raise InvalidSpec("sotl: theta > 0, min_green_s >= 0, mu >= 0 required")
        self.metas = metas
        self.theta = float(theta)
        self.min_green_s = int(min_green_s)
        self.mu = int(mu)
        self._last_switch = {}

    def begin_episode(self):
        self._last_switch = {}

    def act(self, obs) -> TscAction:
        meta = self.metas[obs.intersection_id]
        cur = obs.current_phase
        last = self._last_switch.get(obs.intersection_id, 0)
        elapsed = obs.sim_time_s - last
        served = meta.phase_serves[cur]
        green_q = sum(
            q for link, q in zip(obs.approach_links, obs.queue_per_approach) if link in served
        )
        red_q = sum(obs.queue_per_approach) - green_q
        if (
            elapsed >= self.min_green_s
            and red_q * elapsed >= self.theta
            and green_q <= self.mu
        ):
            self._last_switch[obs.intersection_id] = obs.sim_time_s
            return TscAction(phase_index=(cur + 1) % meta.n_phases)
        return TscAction(phase_index=cur)


class QLearningController:
    """Tabular Q(s, a) with epsilon-greedy exploration.

    State: per-approach queue lengths discretized through `bins`, plus the
    current phase. One table per intersection. Ties in the greedy argmax go
    to the lowest phase index.
    """

    def __init__(self, alpha=0.1, gamma=0.95, epsilon0=0.2, epsilon_decay=0.995, bins=(0, 1, 4, 8)):
        if not 0 < alpha <= 1:
            raise InvalidSpec("qlearning: alpha must be in (0, 1]")
        if not 0 <= gamma <= 1:
            raise InvalidSpec("qlearning: gamma must be in [0, 1]")
        if not 0 <= epsilon0 <= 1 or not 0 < epsilon_decay <= 1:
            raise InvalidSpec("qlearning: bad epsilon settings")
        if list(bins) != sorted(bins) or bins[0] != 0:
            raise InvalidSpec("qlearning: bins must be ascending and start at 0")
        self.alpha = alpha
        self.gamma = gamma
        self.epsilon = epsilon0
        self.epsilon_decay = epsilon_decay
        self.bins = list(bins)
        self.tables = {}  # node_id -> {state: [q values]}
        self.rng = random.Random(0)
        self._prev = {}  # node_id -> (state, action)

    def begin_episode(self, rng=None):
        self._prev = {}
        if rng is not None:
            self.rng = rng

    def state_key(self, obs):
        buckets = tuple(bisect_right(self.bins, q) - 1 for q in obs.queue_per_approach)
        return (buckets, obs.current_phase)

    def _values(self, node_id, state, n_phases):
        table = self.tables.setdefault(node_id, {})
        if state not in table:
            table[state] = [0.0] * n_phases
        return table[state]

    def act(self, obs) -> TscAction:
        state = self.state_key(obs)
        values = self._values(obs.intersection_id, state, obs.n_phases)
        if self.epsilon > 0 and self.rng.random() < self.epsilon:
            action = self.rng.randrange(obs.n_phases)
        else:
            best = max(values)
            action = values.index(best)  # lowest index wins ties
        self._prev[obs.intersection_id] = (state, action)
        return TscAction(phase_index=action)

    def observe_transition(self, obs, reward):
        """Update Q for the previous (state, action) at this intersection,
        bootstrapping from the state just observed."""
        if obs.intersection_id not in self._prev:
            return
        state, action = self._prev[obs.intersection_id]
        next_state = self.state_key(obs)
        next_values = self._values(obs.intersection_id, next_state, obs.n_phases)
        values = self._values(obs.intersection_id, state, obs.n_phases)
        target = reward + self.gamma * max(next_values)
        values[action] = values[action] + self.alpha * (target - values[action])
        if not all(v == v and abs(v) < 1e12 for v in values):
            raise ArithmeticError("Q values diverged")

    def checkpoint(self, path) -> str:
        payload = {
            str(node): {
                ",".join(map(str, state[0])) + "|" + str(state[1]): values
                for state, values in table.items()
            }
            for node, table in self.tables.items()
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return str(path)


def make_policy(spec: PolicySpec, metas=None):
    """Instantiate a controller from its spec; chatzero wiring happens in
    the meta-control module and needs a brief + agent in params."""
    if spec.kind not in POLICY_KINDS:
        raise InvalidSpec(f"unknown policy kind {spec.kind!r}")
    params = spec.merged()
    if spec.kind == "fixedtime":
        return FixedTimeController(green_s=params["green_s"])
    if spec.kind == "sotl":
        if metas is None:
            raise InvalidSpec("sotl needs intersection metadata")
        return SotlController(
            metas,
            theta=params["theta"],
            min_green_s=params["min_green_s"],
            mu=params["mu"],
        )
    if spec.kind == "qlearning":
        return QLearningController(
            alpha=params["alpha"],
            gamma=params["gamma"],
            epsilon0=params["epsilon0"],
            epsilon_decay=params["epsilon_decay"],
            bins=tuple(params["bins"]),
        )
    from .chatzero import ChatZeroController  # local import avoids a cycle

    if "brief" not in params or "agent" not in params:
        raise InvalidSpec("chatzero needs a policy brief and a control agent")
    if metas is None:
        raise InvalidSpec("chatzero needs intersection metadata")
    return ChatZeroController(metas, params["brief"], params["agent"])


CURVE_HEADER = ["episode", "total_reward", "att_s", "throughput", "avg_queue", "avg_delay_s"]


@dataclass
class TrainingCurve:
    rows: list = field(default_factory=list)  # dict rows with CURVE_HEADER keys

    def append(self, episode, metrics):
        self.rows.append(
            {
                "episode": episode,
                "total_reward": metrics.total_reward,
                "att_s": metrics.att_s,
                "throughput": metrics.throughput,
                "avg_queue": metrics.avg_queue,
                "avg_delay_s": metrics.avg_delay_s,
            }
        )

    def save_csv(self, path) -> str:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            writer = csv.DictWriter(fh, fieldnames=CURVE_HEADER, lineterminator="\n")
            writer.writeheader()
            for row in self.rows:
                writer.writerow(row)
        return str(path)

    @classmethod
    def load_csv(cls, path) -> "TrainingCurve":
        rows = []
        with open(path, "r", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                rows.append(
                    {
                        "episode": int(row["episode"]),
                        "total_reward": float(row["total_reward"]),
                        "att_s": float(row["att_s"]),
                        "throughput": int(float(row["throughput"])),
                        "avg_queue": float(row["avg_queue"]),
                        "avg_delay_s": float(row["avg_delay_s"]),
                    }
                )
        return cls(rows=rows)


def train_qlearning(scenario, episodes: int, spec: PolicySpec = None):
    """Episodic training: full reset of traffic each episode, the table and
    the decayed epsilon persist. Reward per decision: -(queue sum observed
    at the next decision point)."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    spec = spec or PolicySpec(kind="qlearning")
    if spec.kind != "qlearning":
        raise InvalidSpec("train_qlearning requires a qlearning spec")
    policy = make_policy(spec)
    curve = TrainingCurve()
    for episode in range(episodes):
        rng = random.Random(scenario.settings.seed * 100_003 + episode)
        policy.begin_episode(rng)
        driver = SimDriver(scenario)
        while not driver.done:
            actions = {}
            for obs in driver.observations():
                policy.observe_transition(obs, -float(sum(obs.queue_per_approach)))
                actions[obs.intersection_id] = policy.act(obs)
            driver.apply_actions(actions)
            driver.advance_interval()
        _, metrics = driver.finish()
        curve.append(episode, metrics)
        policy.epsilon *= policy.epsilon_decay
    return policy, curve


def visualize_training(curve: TrainingCurve, out_dir) -> str:
    """Line chart of total_reward and att_s per episode, fixed layout."""
    import os

    if not curve.rows:
        raise EmptyCurve("no episodes to plot")
    width, height, pad = 640.0, 360.0, 48.0
    canvas = SvgCanvas(width, height)
    episodes = [row["episode"] for row in curve.rows]
    series = (
        ("total_reward", "#2060b0"),
        ("att_s", "#b03030"),
    )
    x_span = max(max(episodes) - min(episodes), 1)

    canvas.line(pad, height - pad, width - pad, height - pad, stroke="#444444")
    canvas.line(pad, pad, pad, height - pad, stroke="#444444")
    for name, color in series:
        values = [row[name] for row in curve.rows]
        lo, hi = min(values), max(values)
        span = max(hi - lo, 1e-9)
        points = []
        for ep, value in zip(episodes, values):
            x = pad + (ep - min(episodes)) / x_span * (width - 2 * pad)
            y = height - pad - (value - lo) / span * (height - 2 * pad)
            points.append((x, y))
        if len(points) == 1:
            canvas.circle(points[0][0], points[0][1], 4.0, fill=color)
        else:
            canvas.polyline(points, stroke=color, stroke_width=2.0)
    canvas.text(pad, pad - 12, "total_reward (blue) / att_s (red) per episode", size=13)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "training_curve.svg")
    canvas.write(path)
    return path
