"""Operator-side schedulers.

Offline: the greedy critical-interval algorithm for total-energy demands
(flat-rate version for time-invariant cost, marginal-equalizing version for
per-slot coefficients) and the continuous relaxation lower bound for
constant-power demands.  Online: the average-rate heuristic and the
Controlled Release policy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .core import (
    CONSTANT_POWER,
    TOTAL_ENERGY,
    ConfigurationError,
    CostModel,
    IntervalStat,
    JobSet,
    ModelError,
    Schedule,
    evaluate_cost,
)


@dataclass(frozen=True)
class OperatorResult:
    schedule: Schedule
    cost: float
    critical_intervals: tuple[IntervalStat, ...] = ()

    def to_dict(self) -> dict:
        return {
            "cost": self.cost,
            "loads": list(self.schedule.loads),
            "allocation": [
                {"job": j, "slot": t, "amount": v}
                for j, t, v in self.schedule.entries
            ],
        }


def _require_te(jobs: JobSet, op: str) -> None:
    if jobs.n and jobs.model != TOTAL_ENERGY:
        raise ModelError(f"{op} schedules total-energy jobs only")


def _result(jobs: JobSet, alloc: dict, cost: CostModel, criticals=()) -> OperatorResult:
    schedule = Schedule.from_map(alloc, jobs.horizon)
    return OperatorResult(schedule, evaluate_cost(schedule, cost), tuple(criticals))


def _candidate_intervals(entries):
    """(k, l) pairs over arrival/deadline events that contain >= 1 job."""
    events = sorted({e[1] for e in entries} | {e[2] for e in entries})
    pairs = []
    for ki, k in enumerate(events):
        for l in events[ki:]:
            contained = [e for e in entries if e[1] >= k and e[2] <= l]
            if contained:
                pairs.append((k, l, contained))
    return pairs


def _contract(entries, k, l):
    """Remove slots [k, l] from the current timeline, remap job windows."""
    span = l - k + 1

    def shift(t):
        return t if t < k else t - span

    out = []
    for jid, a, d, e in entries:
        na = shift(a) if (a < k or a > l) else k
        nd = shift(d) if (d < k or d > l) else k - 1
        out.append((jid, na, nd, e))
    return out


def _edf_fill(members, k, l, rate, slot_map, alloc):
    """Serve ``members`` earliest-deadline-first at a flat per-slot rate."""
    remaining = {jid: e for jid, _, _, e in members}
    order = sorted(members, key=lambda m: (m[2], m[1], m[0]))
    for t in range(k, l + 1):
        capacity = rate
        for jid, a, _, _ in order:
            if a > t or remaining[jid] <= 0.0:
                continue
            take = min(remaining[jid], capacity)
            if take > 0.0:
                key = (jid, slot_map[t])
                alloc[key] = alloc.get(key, 0.0) + take
                remaining[jid] -= take
                capacity -= take
            if capacity <= 1e-12:
                break
    leftover = max(remaining.values(), default=0.0)
    assert leftover <= 1e-6, "critical interval must absorb its jobs"


def yds_schedule(jobs: JobSet, cost: CostModel) -> OperatorResult:
    """Optimal offline schedule for total-energy demands, uniform cost.

    Repeatedly find the interval of maximum energy intensity among
    intervals bounded by arrivals/deadlines, serve its contained jobs EDF
    at the flat intensity rate, delete them and contract the timeline.
    Ties go to the smallest k, then smallest l.
    """
    _require_te(jobs, "yds_schedule")
    if not cost.is_uniform:
        raise ConfigurationError(
            "yds_schedule handles uniform cost; use yds_time_dependent"
        )
    entries = [(j.id, j.arrival, j.deadline, j.energy) for j in jobs]
    slot_map = list(range(jobs.horizon + 1))
    alloc: dict = {}
    criticals = []
    while entries:
        best = None  # (-g, k, l, contained)
        for k, l, contained in _candidate_intervals(entries):
            g = sum(e for _, _, _, e in contained) / (l - k + 1)
            key = (-g, k, l)
            if best is None or key < best[0]:
                best = (key, k, l, contained, g)
        _, k, l, contained, g = best
        _edf_fill(contained, k, l, g, slot_map, alloc)
        slots = tuple(slot_map[k : l + 1])
        criticals.append(
            IntervalStat(k=slots[0], l=slots[-1], intensity=g, slots=slots)
        )
        served = {jid for jid, _, _, _ in contained}
        entries = [e for e in entries if e[0] not in served]
        entries = _contract(entries, k, l)
        del slot_map[k : l + 1]
    return _result(jobs, alloc, cost, criticals)


def avr_schedule(
    jobs: JobSet, cost: CostModel, divisor_plus_one: bool = False
) -> OperatorResult:
    """Average-rate heuristic: spread each job evenly over its window.

    ``divisor_plus_one`` switches the per-slot rate to e / (l + 1), the
    form used in the competitive-ratio analysis; it under-serves each job
    by e / (l + 1) and exists for bound experiments only.
    """
    _require_te(jobs, "avr_schedule")
    alloc: dict = {}
    for j in jobs:
        width = j.allowance + (1 if divisor_plus_one else 0)
        share = j.energy / width
        for t in range(j.arrival, j.deadline + 1):
            key = (j.id, t)
            alloc[key] = alloc.get(key, 0.0) + share
    return _result(jobs, alloc, cost)


def yds_time_dependent(jobs: JobSet, cost: CostModel) -> OperatorResult:
    """Critical-interval scheduling under per-slot coefficients.

    The interval score is the energy derivative: the minimum marginal cost
    c_t * b * E^(b-1) over the interval under its locally optimal schedule
    (computed by the coordinate water-filling equalizer).  The critical
    interval keeps its local schedule; the timeline and the coefficient
    vector contract around it.
    """
    _require_te(jobs, "yds_time_dependent")
    coeffs = cost.coeff_array(jobs.horizon)
    b = cost.b
    entries = [(j.id, j.arrival, j.deadline, j.energy) for j in jobs]
    slot_map = list(range(jobs.horizon + 1))
    cur_coeffs = coeffs.copy()
    alloc: dict = {}
    criticals = []
    caps = np.inf
    while entries:
        best = None
        for k, l, contained in _candidate_intervals(entries):
            lo = np.array([a for _, a, _, _ in contained], dtype=np.int64)
            hi = np.array([d for _, _, d, _ in contained], dtype=np.int64)
            work = np.array([e for _, _, _, e in contained])
            local_alloc, loads, _, _ = kernels.equalize(
                lo, hi, work, np.full(len(contained), caps), cur_coeffs, b,
                tol=1e-10, max_sweeps=20000,
            )
            window = slice(k, l + 1)
            if b == 1.0:
                marginals = cur_coeffs[window]
            else:
                marginals = b * cur_coeffs[window] * loads[window] ** (b - 1.0)
            gamma = float(marginals.min())
            key = (-gamma, k, l)
            if best is None or key < best[0]:
                intensity = float(work.sum()) / (l - k + 1)
                best = (key, k, l, contained, local_alloc, gamma, intensity)
        _, k, l, contained, local_alloc, gamma, intensity = best
        for idx, (jid, _, _, _) in enumerate(contained):
            for t in range(k, l + 1):
                amount = local_alloc[idx, t]
                if amount > 0.0:
                    key = (jid, slot_map[t])
                    alloc[key] = alloc.get(key, 0.0) + amount
        slots = tuple(slot_map[k : l + 1])
        criticals.append(
            IntervalStat(
                k=slots[0], l=slots[-1], intensity=intensity,
                derivative=gamma, slots=slots,
            )
        )
        served = {jid for jid, _, _, _ in contained}
        entries = [e for e in entries if e[0] not in served]
        entries = _contract(entries, k, l)
        del slot_map[k : l + 1]
        cur_coeffs = np.delete(cur_coeffs, np.s_[k : l + 1])
    return _result(jobs, alloc, cost, criticals)


def cp_relaxed_lower_bound(jobs: JobSet, cost: CostModel) -> OperatorResult:
    """Continuous relaxation of the constant-power problem.

    Jobs may be served at any rate in [0, p] per slot inside their window
    as long as the total work s * p is met; the convex optimum lower-bounds
    every feasible integral schedule.
    """
    if jobs.n and jobs.model != CONSTANT_POWER:
        raise ModelError("cp_relaxed_lower_bound needs constant-power jobs")
    if jobs.n == 0:
        return _result(jobs, {}, cost)
    coeffs = cost.coeff_array(jobs.horizon)
    lo = jobs.arrivals
    hi = jobs.deadlines
    work = np.array([j.service * j.power for j in jobs])
    caps = np.array([j.power for j in jobs])
    alloc_mat, _, _, _ = kernels.equalize(
        lo, hi, work, caps, coeffs, cost.b, tol=1e-8, max_sweeps=20000
    )
    alloc = {}
    for i, j in enumerate(jobs):
        for t in range(j.arrival, j.deadline + 1):
            if alloc_mat[i, t] > 1e-12:
                alloc[(j.id, t)] = float(alloc_mat[i, t])
    return _result(jobs, alloc, cost)


def cr_schedule_online(
    jobs: JobSet, cost: CostModel, threshold: Optional[float] = None
) -> OperatorResult:
    """Controlled Release policy for constant-power demands.

    Per slot, first serve every job that can no longer be delayed, then
    admit pending jobs in deadline order while the slot load stays below
    the threshold.  With ``threshold=None`` the threshold is the running
    average load estimate over the jobs seen so far.
    """
    if jobs.n and jobs.model != CONSTANT_POWER:
        raise ModelError("cr_schedule_online needs constant-power jobs")
    by_arrival: dict[int, list] = {}
    for j in jobs:
        by_arrival.setdefault(j.arrival, []).append(j)
    remaining: dict[int, int] = {}
    active: list = []
    seen_work = 0.0
    seen_lo: Optional[int] = None
    seen_hi: Optional[int] = None
    alloc: dict = {}
    for t in range(jobs.horizon + 1):
        for j in by_arrival.get(t, []):
            active.append(j)
            remaining[j.id] = j.service
            seen_work += j.power * j.service
            seen_lo = j.arrival if seen_lo is None else min(seen_lo, j.arrival)
            seen_hi = j.deadline if seen_hi is None else max(seen_hi, j.deadline)
        if not active:
            continue
        if threshold is None:
            thr = seen_work / (seen_hi - seen_lo + 1)
        else:
            thr = threshold
        load = 0.0
        pending = []
        for j in sorted(active, key=lambda x: (x.deadline, x.id)):
            if t + remaining[j.id] - 1 >= j.deadline:
                alloc[(j.id, t)] = j.power
                remaining[j.id] -= 1
                load += j.power
            else:
                pending.append(j)
        for j in pending:
            if load >= thr:
                break
            alloc[(j.id, t)] = j.power
            remaining[j.id] -= 1
            load += j.power
        active = [j for j in active if remaining[j.id] > 0]
    assert not active, "forced service guarantees deadlines"
    return _result(jobs, alloc, cost)
