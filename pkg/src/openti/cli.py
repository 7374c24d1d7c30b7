"""Command-line entry point.

Exit codes: 0 on success, 1 on operational errors (OpenTiError), 2 on usage
errors (argparse). Every subcommand honors --offline and --seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import OpenTiError

DEFAULT_REMOVAL_ORDER = (
    "Emphasis",
    "Reflection",
    "Format Restriction",
    "Example",
    "Description",
)


def _common(parser):
    parser.add_argument("--offline", action="store_true", help="force the scripted mock backend")
    parser.add_argument("--seed", type=int, default=0, help="deterministic seed")
    parser.add_argument(
        "--workspace", default="workspace", help="directory for sessions and outputs"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="openti",
        description="Tool-augmented traffic analysis: maps, demand, simulation, signal control.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_chat = sub.add_parser("chat", help="interactive agent REPL")
    _common(p_chat)
    p_chat.add_argument("--scripts", help="mock script file (defaults to the bundled demo)")
    p_chat.add_argument("--max-query", type=int, default=3)

    p_tool = sub.add_parser("tool", help="run a single tool directly")
    tool_sub = p_tool.add_subparsers(dest="tool_command", required=True)
    p_tool_run = tool_sub.add_parser("run", help="execute one tool with JSON parameters")
    _common(p_tool_run)
    p_tool_run.add_argument("name", help="tool name from the catalog")
    p_tool_run.add_argument("--params", default="{}", help="JSON object of parameters")

    p_sim = sub.add_parser("sim", help="simulate a map end to end")
    _common(p_sim)
    p_sim.add_argument("--osm", required=True, help=".osm input file")
    p_sim.add_argument("--horizon", type=int, default=600)
    p_sim.add_argument("--rows", type=int, default=2)
    p_sim.add_argument("--cols", type=int, default=2)
    p_sim.add_argument("--trips", type=float, default=200.0)
    p_sim.add_argument("--beta", type=float, default=1.0)
    p_sim.add_argument("--out", default="sim_out")

    p_train = sub.add_parser("train", help="train a signal-control policy")
    _common(p_train)
    p_train.add_argument("--osm", help="optional .osm file; default synthetic intersection")
    p_train.add_argument("--episodes", type=int, default=10)
    p_train.add_argument(
        "--algorithm", choices=("fixedtime", "sotl", "qlearning"), default="qlearning"
    )
    p_train.add_argument("--horizon", type=int, default=3600)
    p_train.add_argument("--out", default="train_out")

    p_cal = sub.add_parser("calibrate", help="fit demand to observed link counts")
    _common(p_cal)
    p_cal.add_argument("--counts", required=True, help="counts.csv (link_id,hour,count)")
    p_cal.add_argument("--osm", help="optional .osm network; default two-zone corridor")
    p_cal.add_argument("--generations", type=int, default=30)
    p_cal.add_argument("--population", type=int, default=20)
    p_cal.add_argument("--out", default="calibrate_out")

    p_eval = sub.add_parser("eval", help="run a task battery and report error rates")
    _common(p_eval)
    p_eval.add_argument("--battery", help="battery JSON (defaults to the bundled 6 tasks)")
    p_eval.add_argument("--trials", type=int, default=20)
    p_eval.add_argument("--llm", choices=("mock", "replay"), default="mock")
    p_eval.add_argument("--scripts", help="mock script file for --llm mock")
    p_eval.add_argument("--replay", help="replay fixture for --llm replay")
    p_eval.add_argument("--out", default="eval_report.json")

    p_abl = sub.add_parser("ablate", help="cumulative prompt-component ablation")
    _common(p_abl)
    p_abl.add_argument("--battery", help="battery JSON (defaults to the 4 ablation tasks)")
    p_abl.add_argument("--trials", type=int, default=20)
    p_abl.add_argument("--scripts", help="mock script file (live mode)")
    p_abl.add_argument("--replay", help="replay fixture")
    p_abl.add_argument("--out", default="ablation_out")

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    _common(p_serve)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8716)
    p_serve.add_argument("--scripts", help="mock script file for offline mode")

    return parser


def _apply_offline(args):
    if getattr(args, "offline", False):
        os.environ["OPENTI_OFFLINE"] = "1"


def _registry_and_gateway(args):
    from .gateway import Gateway, backend_from_env
    from .toolkit import build_default_registry

    registry = build_default_registry()
    gateway = Gateway(backend_from_env(getattr(args, "scripts", None)))
    return registry, gateway


def cmd_chat(args) -> int:
    from .dispatch import Dispatcher
    from .session import SessionState

    registry, gateway = _registry_and_gateway(args)
    dispatcher = Dispatcher(registry, gateway, max_query=args.max_query)
    session = SessionState(args.workspace)
    print(f"session {session.session_id}; empty line or EOF quits")
    while True:
        try:
            line = input("> ").strip()
        except EOFError:
            break
        if not line:
            break
        outcome = dispatcher.dispatch(session, line)
        if outcome.status != "ok":
            print(f"[{outcome.status}] {outcome.reply}")
        else:
            print(outcome.reply)
        for ref in outcome.attachments:
            print(f"  [{ref.kind}] {ref.path}")
    return 0


def cmd_tool_run(args) -> int:
    from .actions import AgentAction
    from .descriptors import extract_params
    from .registry import ToolContext
    from .toolkit import build_default_registry

    registry = build_default_registry()
    if args.name not in registry:
        print(f"unknown tool {args.name!r}; catalog: {', '.join(registry.names())}",
              file=sys.stderr)
        return 1
    try:
        arguments = json.loads(args.params)
    except ValueError as exc:
        print(f"--params is not valid JSON: {exc}", file=sys.stderr)
        return 2
    descriptor, handler = registry.get(args.name)
    os.makedirs(args.workspace, exist_ok=True)
    ctx = ToolContext(
        workspace=args.workspace,
        offline=os.environ.get("OPENTI_OFFLINE", "") == "1",
        seed=args.seed,
    )
    action = AgentAction(kind="tool_call", tool_name=args.name, arguments=arguments)
    params = extract_params(descriptor, action)
    result = handler(params, ctx)
    print(result.text)
    for kind, path, label in result.artifacts:
        print(f"  [{kind}] {path}")
    return 0


def cmd_sim(args) -> int:
    from .demand import build_zones, generate_demand
    from .network import parse_osm
    from .sim import SimSettings, assemble_scenario, run

    network = parse_osm(args.osm)
    zones = build_zones(network, args.rows, args.cols)
    od = generate_demand(zones, args.trips, args.beta, hours=(8,))
    horizon = max(args.horizon - args.horizon % 10, 10)
    scenario = assemble_scenario(network, od, zones, SimSettings(horizon_s=horizon, seed=args.seed))
    _, metrics = run(scenario)
    os.makedirs(args.out, exist_ok=True)
    path = metrics.save(os.path.join(args.out, "metrics.json"))
    print(
        f"att {metrics.att_s:.1f} s, throughput {metrics.throughput}, "
        f"avg queue {metrics.avg_queue:.2f}; metrics at {path}"
    )
    return 0


def cmd_train(args) -> int:
    from .demand import build_zones, generate_demand
    from .network import parse_osm
    from .sim import SimSettings, assemble_scenario, run
    from .synth import asymmetric_cross_scenario
    from .tsc import (
        PolicySpec,
        TrainingCurve,
        intersection_metas,
        make_policy,
        train_qlearning,
        visualize_training,
    )

    horizon = max(args.horizon - args.horizon % 10, 10)
    if args.osm:
        network = parse_osm(args.osm)
        zones = build_zones(network, 2, 2)
        od = generate_demand(zones, 200.0, 1.0, hours=(8,))
        scenario = assemble_scenario(
            network, od, zones, SimSettings(horizon_s=horizon, seed=args.seed)
        )
    else:
        scenario = asymmetric_cross_scenario(seed=args.seed, horizon_s=horizon)
    os.makedirs(args.out, exist_ok=True)
    if args.algorithm == "qlearning":
        policy, curve = train_qlearning(scenario, args.episodes)
        policy.checkpoint(os.path.join(args.out, "qtable.json"))
    else:
        controller = make_policy(
            PolicySpec(kind=args.algorithm), intersection_metas(scenario.network)
        )
        curve = TrainingCurve()
        for episode in range(args.episodes):
            if hasattr(controller, "begin_episode"):
                controller.begin_episode()
            _, metrics = run(scenario)
            curve.append(episode, metrics)
    curve_path = curve.save_csv(os.path.join(args.out, "training_curve.csv"))
    visualize_training(curve, args.out)
    last = curve.rows[-1]
    print(
        f"{args.algorithm}: {len(curve.rows)} episodes, final reward "
        f"{last['total_reward']:.0f}, att {last['att_s']:.1f} s; curve at {curve_path}"
    )
    return 0


def cmd_calibrate(args) -> int:
    from .calibrate import GaParams, optimize_demand
    from .demand import build_zones, generate_demand, read_counts_csv, write_demand_csv
    from .network import parse_osm
    from .sim import SimSettings, assemble_scenario
    from .synth import corridor_scenario

    observations = read_counts_csv(args.counts)
    if args.osm:
        network = parse_osm(args.osm)
        zones = build_zones(network, 2, 2)
        od = generate_demand(zones, 200.0, 1.0, hours=tuple(observations[0].hours))
        scenario = assemble_scenario(
            network, od, zones, SimSettings(horizon_s=3600 * len(od.hours), seed=args.seed)
        )
    else:
        scenario = corridor_scenario(
            10.0, 10.0, n_hours=len(observations[0].hours), seed=args.seed
        )
    ga = GaParams(population=args.population, generations=args.generations, seed=args.seed)
    best_od, history = optimize_demand(scenario.od, observations, scenario, ga, out_dir=args.out)
    write_demand_csv(best_od, os.path.join(args.out, "demand.csv"))
    print(
        f"final rmse {history[-1][1]:.3f} after {len(history)} generations; "
        f"outputs in {args.out}"
    )
    return 0


def _load_battery(path):
    from .evalharness import load_battery

    if path:
        return load_battery(path)
    return load_battery(os.path.join(os.path.dirname(__file__), "fixtures", "battery.json"))


def cmd_eval(args) -> int:
    from .evalharness import LiveAgent, ReplayAgent, error_rates, run_battery
    from .gateway import MockBackend, default_scripts_path
    from .toolkit import build_default_registry

    battery = _load_battery(args.battery)
    if args.llm == "replay":
        if not args.replay:
            print("--llm replay requires --replay FILE", file=sys.stderr)
            return 2
        agent = ReplayAgent.from_file(args.replay)
    else:
        scripts_path = args.scripts or default_scripts_path()
        scripts = [(e["pattern"], e["response"]) for e in json.load(open(scripts_path))]
        agent = LiveAgent(
            build_default_registry(), scripts, args.workspace, seed_files=_seed_files()
        )
    records = run_battery(battery, args.trials, agent, seed=args.seed)
    report = error_rates(records)
    report.save(args.out)
    print(
        f"aggregate error rate {report.aggregate:.4f} "
        f"(no-call {report.rho_no:.4f}, mismatch {report.rho_miss:.4f}, "
        f"error-raise {report.rho_error:.4f}); report at {args.out}"
    )
    return 0


def _seed_files():
    from .evalharness import battery_seed_files

    return battery_seed_files()


def cmd_ablate(args) -> int:
    from .evalharness import LiveAgent, ReplayAgent, ablate

    if args.battery:
        battery = _load_battery(args.battery)
    else:
        battery = [
            case
            for case in _load_battery(None)
            if case.expected_tool
            in ("queryAreaRange", "showOnMap", "autoDownloadOpenStreetMapFile", "simulateOnLibsignal")
        ]
        if not battery:
            print("default battery holds no ablation tasks; pass --battery", file=sys.stderr)
            return 2
    if args.replay:
        agent = ReplayAgent.from_file(args.replay)
    else:
        from .gateway import default_scripts_path
        from .toolkit import build_default_registry

        scripts_path = args.scripts or default_scripts_path()
        scripts = [(e["pattern"], e["response"]) for e in json.load(open(scripts_path))]
        agent = LiveAgent(
            build_default_registry(), scripts, args.workspace, seed_files=_seed_files()
        )
    result = ablate(battery, args.trials, list(DEFAULT_REMOVAL_ORDER), agent, args.out)
    print(f"ablation matrix at {result.csv_path}; heatmap at {result.svg_path}")
    return 0


def cmd_serve(args) -> int:
    from .service import ServiceConfig, serve

    serve(
        ServiceConfig(
            host=args.host,
            port=args.port,
            workspace=args.workspace,
            offline=bool(args.offline or os.environ.get("OPENTI_OFFLINE") == "1"),
            mock_scripts=args.scripts,
        )
    )
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _apply_offline(args)
    try:
        if args.command == "chat":
            return cmd_chat(args)
        if args.command == "tool":
            return cmd_tool_run(args)
        if args.command == "sim":
            return cmd_sim(args)
        if args.command == "train":
            return cmd_train(args)
        if args.command == "calibrate":
            return cmd_calibrate(args)
        if args.command == "eval":
            return cmd_eval(args)
        if args.command == "ablate":
            return cmd_ablate(args)
        if args.command == "serve":
            return cmd_serve(args)
        parser.error(f"unknown command {args.command!r}")
    except OpenTiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
