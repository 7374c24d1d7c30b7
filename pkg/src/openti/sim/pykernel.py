"""Pure-Python step kernel: the reference semantics.

One call to advance(n) runs n one-second steps with fixed signal decisions.
Per second: spawn departures, complete link traversals, discharge queues of
movements in the active phase at <= saturation_rate * lanes veh/s via a
fractional accumulator, then record the bookkeeping timelines.

The compiled twin in _stepcore.pyx mirrors this file statement for
statement; any semantic change must land in both.
"""

from __future__ import annotations


class StepKernel:
    def __init__(self, inp):
        self.inp = inp
        self.horizon = inp.horizon
        self.t = 0

        v = inp.n_vehicles
        self.pos = [-1] * v  # index into path_flat; -1 before departure
        self.arrive = [-1] * v
        self.bucket_head = [-1] * (inp.horizon + 1)
        self.bucket_tail = [-1] * (inp.horizon + 1)
        self.bucket_next = [-1] * v
        self.spawn_ptr = 0

        n_links = inp.n_links
        self.q_items = [[] for _ in range(n_links)]
        self.q_head = [0] * n_links
        self.acc = [0.0] * n_links

        n_i = inp.n_intersections
        self.cur_phase = [0] * n_i
        self.pending_phase = [0] * n_i
        self.lost = [0] * n_i

        self.counts = [[0] * inp.n_hours for _ in range(n_links)]
        self.queue_timeline = [0] * inp.horizon
        self.departed_timeline = [0] * inp.horizon
        self.arrived_timeline = [0] * inp.horizon
        self.transit_timeline = [0] * inp.horizon

        self.q_total = 0
        self.departed = 0
        self.arrived = 0
        self.in_transit = 0

    # -- driver-facing accessors ------------------------------------------------

    def queue_len(self, link_idx) -> int:
        return len(self.q_items[link_idx]) - self.q_head[link_idx]

    def queue_total_at(self, t) -> int:
        return self.queue_timeline[t]

    def phase_view(self, i_idx) -> int:
        return self.pending_phase[i_idx] if self.lost[i_idx] > 0 else self.cur_phase[i_idx]

    def set_phase(self, i_idx, phase) -> bool:
        """Request a phase; switching costs the all-red lost time. Returns
        True when an actual switch was scheduled."""
        if phase == self.phase_view(i_idx):
            return False
        if phase == self.cur_phase[i_idx] and self.lost[i_idx] > 0:
            # Cancel a pending switch back to the running phase.
            self.pending_phase[i_idx] = phase
            self.lost[i_idx] = 0
            return False
        self.pending_phase[i_idx] = phase
        self.lost[i_idx] = self.inp.lost_time
        return True

    # -- core loop ------------------------------------------------------------------

    def _schedule(self, veh, finish_t):
        if finish_t >= self.horizon:
            return  # never completes within the run; stays in transit
        if self.bucket_head[finish_t] == -1:
            self.bucket_head[finish_t] = veh
        else:
            self.bucket_next[self.bucket_tail[finish_t]] = veh
        self.bucket_tail[finish_t] = veh
        self.bucket_next[veh] = -1

    def advance(self, n_steps):
        inp = self.inp
        travel = inp.travel
        lanes = inp.lanes
        exit_ctl = inp.exit_ctl
        depart = inp.depart
        path_flat = inp.path_flat
        path_off = inp.path_off
        n_hours = inp.n_hours
        sat = inp.sat_rate
        counts = self.counts
        pos = self.pos

        for _ in range(n_steps):
            t = self.t
            if t >= self.horizon:
                break
            hb = t // 3600
            if hb >= n_hours:
                hb = n_hours - 1

            # 1. departures scheduled for this second
            while self.spawn_ptr < inp.n_vehicles and depart[self.spawn_ptr] == t:
                veh = self.spawn_ptr
                self.spawn_ptr += 1
                self.departed += 1
                if path_off[veh] == path_off[veh + 1]:
                    self.arrive[veh] = t
                    self.arrived += 1
                    continue
                pos[veh] = path_off[veh]
                self.in_transit += 1
                self._schedule(veh, t + travel[path_flat[pos[veh]]])

            # 2. traversal completions
            veh = self.bucket_head[t]
            self.bucket_head[t] = -1
            while veh != -1:
                nxt = self.bucket_next[veh]
                link = path_flat[pos[veh]]
                if pos[veh] == path_off[veh + 1] - 1:
                    counts[link][hb] += 1
                    self.arrive[veh] = t
                    self.arrived += 1
                    self.in_transit -= 1
                elif exit_ctl[link] == -1:
                    counts[link][hb] += 1
                    pos[veh] += 1
                    self._schedule(veh, t + travel[path_flat[pos[veh]]])
                else:
                    self.q_items[link].append(veh)
                    self.q_total += 1
                    self.in_transit -= 1
                veh = nxt

            # 3. signalized discharge
            for i in range(inp.n_intersections):
                if self.lost[i] > 0:
                    self.lost[i] -= 1
                    if self.lost[i] == 0:
                        self.cur_phase[i] = self.pending_phase[i]
                    continue
                p = self.cur_phase[i]
                a0 = inp.app_off[i]
                napp = inp.app_off[i + 1] - a0
                gbase = inp.green_base[i] + p * napp
                for a in range(napp):
                    link = inp.app_flat[a0 + a]
                    g = gbase + a
                    if not inp.green_flat[g]:
                        continue
                    self.acc[link] += sat * lanes[link]
                    while self.acc[link] >= 1.0:
                        head = self.q_head[link]
                        if head >= len(self.q_items[link]):
                            break
                        veh = self.q_items[link][head]
                        nxt_link = path_flat[pos[veh] + 1]
                        allowed = False
                        for k in range(inp.out_off[g], inp.out_off[g + 1]):
                            if inp.out_flat[k] == nxt_link:
                                allowed = True
                                break
                        if not allowed:
                            break
                        self.q_head[link] += 1
                        self.q_total -= 1
                        self.acc[link] -= 1.0
                        counts[link][hb] += 1
                        pos[veh] += 1
                        self.in_transit += 1
                        self._schedule(veh, t + travel[nxt_link])
                    if self.q_head[link] >= len(self.q_items[link]):
                        self.q_items[link].clear()
                        self.q_head[link] = 0
                        self.acc[link] = 0.0
                    elif self.acc[link] > 1.0:
                        self.acc[link] = 1.0

            # 4. timelines (state at the end of the second)
            self.queue_timeline[t] = self.q_total
            self.departed_timeline[t] = self.departed
            self.arrived_timeline[t] = self.arrived
            self.transit_timeline[t] = self.in_transit
            self.t = t + 1
