"""Log analysis and result explanation.

logAnalyzer summarizes one metrics/curve file or compares two; the
comparison knows which direction is better for each metric. resultExplainer
renders a plain-language reading of a metrics report and can append a
clearly labeled model-generated summary.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from .errors import UnreadableLog
from .sim import MetricsReport
from .tsc import TrainingCurve

# metric -> (smaller_is_better, gloss)
METRIC_DIRECTIONS = {
    "att_s": (True, "average travel time of arrived vehicles, seconds"),
    "throughput": (False, "vehicles that reached their destination"),
    "avg_queue": (True, "time-averaged number of waiting vehicles"),
    "avg_delay_s": (True, "average seconds lost versus free flow"),
    "total_reward": (False, "negated accumulated queue; larger means less waiting"),
}


@dataclass
class AnalysisReport:
    text: str
    metrics_a: dict
    metrics_b: dict = None
    deltas: dict = field(default_factory=dict)  # metric -> (delta, winner)


def _metrics_from_file(path) -> dict:
    if not os.path.exists(path):
        raise UnreadableLog(f"{path}: no such file")
    if path.endswith(".json"):
        try:
            report = MetricsReport.load(path)
        except ValueError as exc:
            line = getattr(exc, "lineno", "?")
            raise UnreadableLog(f"{path}: invalid JSON at line {line}")
        return {name: getattr(report, name) for name in METRIC_DIRECTIONS}
    if path.endswith(".csv"):
        try:
            curve = TrainingCurve.load_csv(path)
        except (ValueError, KeyError) as exc:
            raise UnreadableLog(f"{path}: bad training curve ({exc})")
        if not curve.rows:
            raise UnreadableLog(f"{path}: empty training curve at line 2")
        last = curve.rows[-1]
        return {name: last[name] for name in METRIC_DIRECTIONS}
    raise UnreadableLog(f"{path}: expected a metrics .json or a training-curve .csv")


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.3f}"
    return str(value)


def analyze_logs(path_a, path_b=None) -> AnalysisReport:
    metrics_a = _metrics_from_file(path_a)
    if path_b is None:
        lines = [f"Summary of {os.path.basename(path_a)}:"]
        for name, (_, gloss) in METRIC_DIRECTIONS.items():
            lines.append(f"  {name} = {_fmt(metrics_a[name])}  ({gloss})")
        return AnalysisReport(text="\n".join(lines), metrics_a=metrics_a)

    metrics_b = _metrics_from_file(path_b)
    deltas = {}
    lines = [
        f"Comparison: a = {os.path.basename(path_a)}, b = {os.path.basename(path_b)} "
        "(delta = b - a):"
    ]
    for name, (smaller_better, _) in METRIC_DIRECTIONS.items():
        delta = metrics_b[name] - metrics_a[name]
        if delta == 0:
            winner = "tie"
        elif (delta < 0) == smaller_better:
            winner = "b"
        else:
            winner = "a"
        deltas[name] = (delta, winner)
        direction = "smaller is better" if smaller_better else "larger is better"
        lines.append(
            f"  {name}: a={_fmt(metrics_a[name])} b={_fmt(metrics_b[name])} "
            f"delta={_fmt(delta)} -> {'tie' if winner == 'tie' else 'better: ' + winner} "
            f"({direction})"
        )
    return AnalysisReport(
        text="\n".join(lines), metrics_a=metrics_a, metrics_b=metrics_b, deltas=deltas
    )


MODEL_SUMMARY_LABEL = "[model-generated summary]"


def explain_result(report: MetricsReport, gateway=None) -> str:
    """Deterministic template rendering; optional labeled model gloss."""
    lines = ["Simulation result:"]
    if report.no_arrivals:
        lines.append(
            "  No vehicle reached its destination within the horizon; travel-time "
            "figures below are reported as 0 and should not be compared."
        )
    lines.append(
        f"  Average travel time: {report.att_s:.1f} s per arrived vehicle."
    )
    lines.append(f"  Throughput: {report.throughput} vehicles completed their trip.")
    lines.append(
        f"  Average queue: {report.avg_queue:.2f} vehicles were waiting at any moment."
    )
    lines.append(
        f"  Average delay: {report.avg_delay_s:.1f} s lost per vehicle versus free flow."
    )
    lines.append(
        f"  Total reward: {report.total_reward:.0f} (negated queue accumulation; "
        "closer to 0 means less waiting)."
    )
    busiest = sorted(
        report.per_link_counts.items(),
        key=lambda kv: (-sum(kv[1].values()), kv[0]),
    )
    if busiest:
        link, hours = busiest[0]
        lines.append(
            f"  Busiest link: {link} with {sum(hours.values())} crossings."
        )
    text = "\n".join(lines)
    if gateway is not None:
        prompt = (
            "Summarize this traffic simulation result in two sentences for a "
            "non-expert:\n" + text
        )
        response = gateway.complete([("user", prompt)])
        text += f"\n{MODEL_SUMMARY_LABEL} {response.content}"
    return text
