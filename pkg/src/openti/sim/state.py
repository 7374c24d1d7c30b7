"""Flat kernel inputs shared by the compiled and the pure-Python step core.

Everything is reduced to integer/float arrays so both kernels execute the
same arithmetic in the same order and stay bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

from .scenario import LOST_TIME_S, Scenario, traversal_s


@dataclass
class KernelInputs:
    # links
    n_links: int
    travel: list  # int seconds per link
    lanes: list
    exit_ctl: list  # intersection index controlling the link exit, or -1
    link_ids: list  # kernel index -> public link id
    # vehicles (sorted by departure time)
    n_vehicles: int
    depart: list
    path_flat: list
    path_off: list  # len n_vehicles + 1
    freeflow: list  # int free-flow seconds per vehicle
    # intersections
    n_intersections: int
    node_ids: list
    app_flat: list
    app_off: list  # len n_intersections + 1
    phase_cnt: list
    green_base: list  # len n_intersections + 1; g = green_base[i] + p*napp + a
    green_flat: list  # 0/1 per (i, p, approach)
    out_off: list  # len(green_flat) + 1
    out_flat: list  # allowed outgoing link indices per (i, p, approach)
    # run parameters
    horizon: int
    n_hours: int
    sat_rate: float
    lost_time: int


def build_kernel_inputs(scenario: Scenario, horizon=None) -> KernelInputs:
    network = scenario.network
    horizon = int(horizon if horizon is not None else scenario.settings.horizon_s)

    link_index = {}
    travel, lanes, link_ids = [], [], []
    for idx, link in enumerate(network.links):
        link_index[link.link_id] = idx
        travel.append(traversal_s(link))
        lanes.append(link.lanes)
        link_ids.append(link.link_id)
    exit_ctl = [-1] * len(network.links)

    intersections = sorted(network.intersections, key=lambda i: i.node_id)
    node_ids, app_flat, app_off = [], [], [0]
    phase_cnt, green_base, green_flat = [], [0], []
    out_off, out_flat = [0], []
    for i_idx, inter in enumerate(intersections):
        node_ids.append(inter.node_id)
        approaches = [link_index[l] for l in inter.approaches]
        for a in approaches:
            app_flat.append(a)
            exit_ctl[a] = i_idx
        app_off.append(len(app_flat))
        phase_cnt.append(len(inter.phases))
        green_base.append(green_base[-1] + len(inter.phases) * len(approaches))
        for phase in inter.phases:
            by_in = {}
            for in_id, out_id in phase:
                by_in.setdefault(link_index[in_id], set()).add(link_index[out_id])
            for a in approaches:
                outs = sorted(by_in.get(a, ()))
                green_flat.append(1 if outs else 0)
                out_flat.extend(outs)
                out_off.append(len(out_flat))

    depart, path_flat, path_off, freeflow = [], [], [0], []
    link_count = 0
    for t, route in scenario.departures:
        depart.append(int(t))
        ff = 0
        for link_id in route:
            idx = link_index[link_id]
            path_flat.append(idx)
            ff += travel[idx]
            link_count += 1
        path_off.append(link_count)
        freeflow.append(ff)

    return KernelInputs(
        n_links=len(network.links),
        travel=travel,
        lanes=lanes,
        exit_ctl=exit_ctl,
        link_ids=link_ids,
        n_vehicles=len(depart),
        depart=depart,
        path_flat=path_flat,
        path_off=path_off,
        freeflow=freeflow,
        n_intersections=len(intersections),
        node_ids=node_ids,
        app_flat=app_flat,
        app_off=app_off,
        phase_cnt=phase_cnt,
        green_base=green_base,
        green_flat=green_flat,
        out_off=out_off,
        out_flat=out_flat,
        horizon=horizon,
        n_hours=max(1, len(scenario.od.hours)),
        sat_rate=float(scenario.settings.saturation_rate),
        lost_time=LOST_TIME_S,
    )
