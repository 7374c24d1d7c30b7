# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled step kernel: statement-for-statement twin of pykernel.py.

Same state layout, same arithmetic, same ordering; results are
bit-identical to the pure-Python kernel (asserted by the test suite and
the benchmark).
"""

import numpy as np


cdef class StepKernel:
    cdef public object inp
    cdef public int horizon, t
    cdef int n_vehicles, n_links, n_intersections, n_hours, lost_time, spawn_ptr
    cdef double sat
    cdef public int q_total, departed, arrived, in_transit

    cdef int[:] travel, lanes, exit_ctl, depart, path_flat, path_off
    cdef int[:] app_flat, app_off, phase_cnt, green_base, green_flat, out_off, out_flat
    cdef int[:] pos, arrive_arr, bucket_head, bucket_tail, bucket_next
    cdef int[:] q_buf, q_start, q_len
    cdef double[:] acc
    cdef int[:] cur_phase_arr, pending_phase_arr, lost_arr
    cdef long long[:, :] counts_arr
    cdef int[:] queue_tl, departed_tl, arrived_tl, transit_tl

    def __init__(self, inp):
        self.inp = inp
        self.horizon = inp.horizon
        self.t = 0
        self.n_vehicles = inp.n_vehicles
        self.n_links = inp.n_links
        self.n_intersections = inp.n_intersections
        self.n_hours = inp.n_hours
        self.lost_time = inp.lost_time
        self.sat = inp.sat_rate
        self.spawn_ptr = 0

        def arr(values):
            return np.asarray(values, dtype=np.intc)

        self.travel = arr(inp.travel)
        self.lanes = arr(inp.lanes)
        self.exit_ctl = arr(inp.exit_ctl)
        self.depart = arr(inp.depart)
        self.path_flat = arr(inp.path_flat if inp.path_flat else [0])
        self.path_off = arr(inp.path_off)
        self.app_flat = arr(inp.app_flat if inp.app_flat else [0])
        self.app_off = arr(inp.app_off)
        self.phase_cnt = arr(inp.phase_cnt if inp.phase_cnt else [0])
        self.green_base = arr(inp.green_base)
        self.green_flat = arr(inp.green_flat if inp.green_flat else [0])
        self.out_off = arr(inp.out_off)
        self.out_flat = arr(inp.out_flat if inp.out_flat else [0])

        v = max(inp.n_vehicles, 1)
        self.pos = np.full(v, -1, dtype=np.intc)
        self.arrive_arr = np.full(v, -1, dtype=np.intc)
        self.bucket_head = np.full(inp.horizon + 1, -1, dtype=np.intc)
        self.bucket_tail = np.full(inp.horizon + 1, -1, dtype=np.intc)
        self.bucket_next = np.full(v, -1, dtype=np.intc)

        n_links = max(inp.n_links, 1)
        self.q_buf = np.zeros(n_links * v, dtype=np.intc)
        self.q_start = np.zeros(n_links, dtype=np.intc)
        self.q_len = np.zeros(n_links, dtype=np.intc)
        self.acc = np.zeros(n_links, dtype=np.float64)

        n_i = max(inp.n_intersections, 1)
        self.cur_phase_arr = np.zeros(n_i, dtype=np.intc)
        self.pending_phase_arr = np.zeros(n_i, dtype=np.intc)
        self.lost_arr = np.zeros(n_i, dtype=np.intc)

        self.counts_arr = np.zeros((n_links, inp.n_hours), dtype=np.int64)
        self.queue_tl = np.zeros(inp.horizon, dtype=np.intc)
        self.departed_tl = np.zeros(inp.horizon, dtype=np.intc)
        self.arrived_tl = np.zeros(inp.horizon, dtype=np.intc)
        self.transit_tl = np.zeros(inp.horizon, dtype=np.intc)

        self.q_total = 0
        self.departed = 0
        self.arrived = 0
        self.in_transit = 0

    # -- driver-facing accessors ----------------------------------------------

    def queue_len(self, int link_idx):
        return self.q_len[link_idx]

    def queue_total_at(self, int t):
        return self.queue_tl[t]

    def phase_view(self, int i_idx):
        if self.lost_arr[i_idx] > 0:
            return self.pending_phase_arr[i_idx]
        return self.cur_phase_arr[i_idx]

    def set_phase(self, int i_idx, int phase):
        if phase == self.phase_view(i_idx):
            return False
        if phase == self.cur_phase_arr[i_idx] and self.lost_arr[i_idx] > 0:
            self.pending_phase_arr[i_idx] = phase
            self.lost_arr[i_idx] = 0
            return False
        self.pending_phase_arr[i_idx] = phase
        self.lost_arr[i_idx] = self.lost_time
        return True

    # -- snapshots for metrics / equivalence checks ------------------------------

    @property
    def arrive(self):
        return list(self.arrive_arr[: self.n_vehicles])

    @property
    def counts(self):
        return [list(row) for row in np.asarray(self.counts_arr)[: self.n_links]]

    @property
    def queue_timeline(self):
        return list(self.queue_tl)

    @property
    def departed_timeline(self):
        return list(self.departed_tl)

    @property
    def arrived_timeline(self):
        return list(self.arrived_tl)

    @property
    def transit_timeline(self):
        return list(self.transit_tl)

    # -- core loop ---------------------------------------------------------------

    cdef void _schedule(self, int veh, int finish_t):
        if finish_t >= self.horizon:
            return
        if self.bucket_head[finish_t] == -1:
            self.bucket_head[finish_t] = veh
        else:
            self.bucket_next[self.bucket_tail[finish_t]] = veh
        self.bucket_tail[finish_t] = veh
        self.bucket_next[veh] = -1

    def advance(self, int n_steps):
        cdef int step, t, hb, veh, nxt, link, i, p, a0, napp, gbase, a, g, k
        cdef int head, nxt_link, vcap
        cdef bint allowed
        cdef double sat = self.sat

        vcap = max(self.n_vehicles, 1)
        for step in range(n_steps):
            t = self.t
            if t >= self.horizon:
                break
            hb = t // 3600
            if hb >= self.n_hours:
                hb = self.n_hours - 1

            # 1. departures scheduled for this second
            while self.spawn_ptr < self.n_vehicles and self.depart[self.spawn_ptr] == t:
                veh = self.spawn_ptr
                self.spawn_ptr += 1
                self.departed += 1
                if self.path_off[veh] == self.path_off[veh + 1]:
                    self.arrive_arr[veh] = t
                    self.arrived += 1
                    continue
                self.pos[veh] = self.path_off[veh]
                self.in_transit += 1
                self._schedule(veh, t + self.travel[self.path_flat[self.pos[veh]]])

            # 2. traversal completions
            veh = self.bucket_head[t]
            self.bucket_head[t] = -1
            while veh != -1:
                nxt = self.bucket_next[veh]
                link = self.path_flat[self.pos[veh]]
                if self.pos[veh] == self.path_off[veh + 1] - 1:
                    self.counts_arr[link, hb] += 1
                    self.arrive_arr[veh] = t
                    self.arrived += 1
                    self.in_transit -= 1
                elif self.exit_ctl[link] == -1:
                    self.counts_arr[link, hb] += 1
                    self.pos[veh] += 1
                    self._schedule(veh, t + self.travel[self.path_flat[self.pos[veh]]])
                else:
                    self.q_buf[link * vcap + (self.q_start[link] + self.q_len[link]) % vcap] = veh
                    self.q_len[link] += 1
                    self.q_total += 1
                    self.in_transit -= 1
                veh = nxt

            # 3. signalized discharge
            for i in range(self.n_intersections):
                if self.lost_arr[i] > 0:
                    self.lost_arr[i] -= 1
                    if self.lost_arr[i] == 0:
                        self.cur_phase_arr[i] = self.pending_phase_arr[i]
                    continue
                p = self.cur_phase_arr[i]
                a0 = self.app_off[i]
                napp = self.app_off[i + 1] - a0
                gbase = self.green_base[i] + p * napp
                for a in range(napp):
                    link = self.app_flat[a0 + a]
                    g = gbase + a
                    if not self.green_flat[g]:
                        continue
                    self.acc[link] += sat * self.lanes[link]
                    while self.acc[link] >= 1.0:
                        if self.q_len[link] == 0:
                            break
                        veh = self.q_buf[link * vcap + self.q_start[link] % vcap]
                        nxt_link = self.path_flat[self.pos[veh] + 1]
                        allowed = False
                        for k in range(self.out_off[g], self.out_off[g + 1]):
                            if self.out_flat[k] == nxt_link:
                                allowed = True
                                break
                        if not allowed:
                            break
                        self.q_start[link] = (self.q_start[link] + 1) % vcap
                        self.q_len[link] -= 1
                        self.q_total -= 1
                        self.acc[link] -= 1.0
                        self.counts_arr[link, hb] += 1
                        self.pos[veh] += 1
                        self.in_transit += 1
                        self._schedule(veh, t + self.travel[nxt_link])
                    if self.q_len[link] == 0:
                        self.q_start[link] = 0
                        self.acc[link] = 0.0
                    elif self.acc[link] > 1.0:
                        self.acc[link] = 1.0

            # 4. timelines (state at the end of the second)
            self.queue_tl[t] = self.q_total
            self.departed_tl[t] = self.departed
            self.arrived_tl[t] = self.arrived
            self.transit_tl[t] = self.in_transit
            self.t = t + 1
