"""Benchmark: compiled step core vs the pure-Python twin.

Builds a 3x3 signalized grid under load, advances both kernels through an
identical phase plan, verifies their outputs are bit-identical, and reports
wall time. Run:  python benchmarks/bench_kernel.py [--horizon 3600]
"""

import argparse
import sys
import time

import numpy as np


def build_scenario(horizon):
    from openti.demand import ODMatrix, build_zones
    from openti.sim import SimSettings, assemble_scenario
    from openti.synth import grid_network

    network = grid_network(3, 3, length_m=300.0, lanes=2)
    zones = build_zones(network, 2, 2)
    n = zones.n
    trips = np.zeros((n, n, 1))
    for o in range(n):
        for d in range(n):
            if o != d:
                trips[o, d, 0] = 400.0
    od = ODMatrix(zones=n, hours=(8,), trips=trips)
    return assemble_scenario(
        network, od, zones, SimSettings(horizon_s=horizon, seed=0)
    )


def drive(kernel_cls, inputs, interval):
    kernel = kernel_cls(inputs)
    start = time.perf_counter()
    for t in range(0, inputs.horizon, interval):
        if t % 30 == 0:
            for i in range(inputs.n_intersections):
                kernel.set_phase(i, (t // 30) % 2)
        kernel.advance(interval)
    elapsed = time.perf_counter() - start
    return kernel, elapsed


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--horizon", type=int, default=3600)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    from openti.sim.pykernel import StepKernel as PyKernel
    from openti.sim.state import build_kernel_inputs

    try:
        from openti.sim._stepcore import StepKernel as CompiledKernel
    except ImportError:
        print("compiled kernel not built; nothing to compare")
        return 1

    scenario = build_scenario(args.horizon)
    inputs = build_kernel_inputs(scenario)
    interval = scenario.settings.decision_interval_s
    print(
        f"scenario: {inputs.n_links} links, {inputs.n_vehicles} vehicles, "
        f"{inputs.n_intersections} signals, horizon {inputs.horizon}s"
    )

    py_best, cy_best = None, None
    for _ in range(args.repeat):
        py_kernel, py_time = drive(PyKernel, inputs, interval)
        cy_kernel, cy_time = drive(CompiledKernel, inputs, interval)
        py_best = py_time if py_best is None else min(py_best, py_time)
        cy_best = cy_time if cy_best is None else min(cy_best, cy_time)

    identical = (
        list(py_kernel.arrive) == list(cy_kernel.arrive)
        and [list(r) for r in py_kernel.counts] == [list(r) for r in cy_kernel.counts]
        and list(py_kernel.queue_timeline) == list(cy_kernel.queue_timeline)
    )
    print(f"pure python : {py_best * 1e3:8.2f} ms")
    print(f"compiled    : {cy_best * 1e3:8.2f} ms")
    print(f"speedup     : {py_best / cy_best:8.1f} x")
    print(f"identical   : {identical}")
    if not identical:
        print("ERROR: kernel outputs diverged", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
