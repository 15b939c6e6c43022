"""Full-budget attacks: compress every demand to kill scheduling slack.

Offline attacks solve the clique-partition maximization exactly (interval
DP for total-energy jobs, a subjob DP for constant-power jobs); online
attacks batch active jobs greedily at forced deadlines in O(n).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .core import (
    CONSTANT_POWER,
    TOTAL_ENERGY,
    AttackResult,
    CostModel,
    Job,
    JobSet,
    ModelError,
    SizeLimitError,
)


@dataclass(frozen=True)
class Clique:
    """Jobs compressed together; every member's window contains ``slot``."""

    members: tuple[int, ...]
    slot: int


@dataclass(frozen=True)
class CliquePartition:
    cliques: tuple[Clique, ...]
    total_cost: float


def _require_model(jobs: JobSet, model: str, op: str) -> None:
    if jobs.n and jobs.model != model:
        raise ModelError(f"{op} needs {model} jobs, got {jobs.model}")


def _empty_result(jobs: JobSet) -> AttackResult:
    return AttackResult(
        forged=JobSet((), jobs.horizon),
        modified_ids=frozenset(),
        enforced_cost=0.0,
        mapping={},
        partition=CliquePartition((), 0.0),
    )


def _clique_slot(members: list[Job], coeffs: Optional[np.ndarray]) -> int:
    """Compression slot: earliest intersection slot, or argmax coefficient."""
    lo = max(j.arrival for j in members)
    hi = min(j.deadline for j in members)
    if coeffs is None:
        return lo
    window = coeffs[lo : hi + 1]
    return lo + int(np.argmax(window))


def _te_result(
    jobs: JobSet, cost: CostModel, cliques: list[Clique]
) -> AttackResult:
    """Assemble the forged set obtained by compressing each clique."""
    forged_specs = []  # (slot, original job)
    for c in cliques:
        for jid in c.members:
            forged_specs.append((c.slot, jobs[jid]))
    forged_specs.sort(key=lambda item: (item[0], item[1].id))
    forged_jobs = []
    mapping: dict[int, tuple[int, ...]] = {}
    modified = set()
    for fid, (slot, job) in enumerate(forged_specs):
        forged_jobs.append(Job(fid, slot, slot, energy=job.energy))
        mapping[job.id] = (fid,)
        if (slot, slot) != (job.arrival, job.deadline):
            modified.add(job.id)
    forged = JobSet(tuple(forged_jobs), jobs.horizon)
    loads = np.zeros(jobs.horizon + 1)
    for slot, job in forged_specs:
        loads[slot] += job.energy
    enforced = cost.evaluate(loads)
    total = sum(
        cost.cost(c.slot, sum(jobs[j].energy for j in c.members)) for c in cliques
    )
    return AttackResult(
        forged=forged,
        modified_ids=frozenset(modified),
        enforced_cost=enforced,
        mapping=mapping,
        partition=CliquePartition(tuple(cliques), total),
    )


def offline_full_attack_te(jobs: JobSet, cost: CostModel) -> AttackResult:
    """Optimal offline full attack for total-energy demands.

    Interval DP over the clique-partition space: the best partition of the
    jobs contained in [k, l] splits around a locally maximal clique at some
    slot z.  Endpoints are restricted to arrival/deadline events.  With
    per-slot coefficients each clique compresses at the costliest slot of
    its members' common window.
    """
    _require_model(jobs, TOTAL_ENERGY, "offline_full_attack_te")
    cost.check_horizon(jobs.horizon)
    if jobs.n == 0:
        return _empty_result(jobs)
    events = np.unique(np.concatenate([jobs.arrivals, jobs.deadlines]))
    coeffs = cost.coeff_array(jobs.horizon)
    values, best_z, idx_le, idx_ge = kernels.attack_value_tables(
        jobs.arrivals, jobs.deadlines, jobs.energies, events, coeffs,
        cost.b, cost.is_uniform,
    )
    coeff_arr = None if cost.is_uniform else coeffs
    cliques: list[Clique] = []

    def reconstruct(ki: int, li: int) -> None:
        z = int(best_z[ki, li])
        if z < 0:
            return
        k, l = int(events[ki]), int(events[li])
        members = [
            j
            for j in jobs
            if j.arrival >= k and j.deadline <= l and j.contains(z)
        ]
        slot = _clique_slot(members, coeff_arr)
        cliques.append(Clique(tuple(j.id for j in members), slot))
        if z - 1 >= k:
            reconstruct(ki, int(idx_le[z - 1]))
        if z + 1 <= l:
            reconstruct(int(idx_ge[z + 1]), li)

    reconstruct(0, len(events) - 1)
    return _te_result(jobs, cost, cliques)


def online_full_attack_te(jobs: JobSet, cost: CostModel) -> AttackResult:
    """O(n) online full attack: hold active jobs, compress all of them to
    the first slot that is a deadline of any active job."""
    _require_model(jobs, TOTAL_ENERGY, "online_full_attack_te")
    cost.check_horizon(jobs.horizon)
    if jobs.n == 0:
        return _empty_result(jobs)
    cliques: list[Clique] = []
    active: list[Job] = []
    by_arrival: dict[int, list[Job]] = {}
    for j in jobs:
        by_arrival.setdefault(j.arrival, []).append(j)
    for t in range(jobs.horizon + 1):
        active.extend(by_arrival.get(t, []))
        if active and any(j.deadline == t for j in active):
            cliques.append(Clique(tuple(j.id for j in active), t))
            active = []
    assert not active, "every job flushes at its own deadline at the latest"
    return _te_result(jobs, cost, cliques)


# ---------------------------------------------------------------------------
# constant-power model
# ---------------------------------------------------------------------------

CP_SERVICE_GUARD = 14

_NEG_INF = float("-inf")


def _overlap(a: int, d: int, k: int, l: int) -> int:
    return max(0, min(d, l) - max(a, k) + 1)


def offline_full_attack_cp(
    jobs: JobSet, cost: CostModel, max_total_service: int = CP_SERVICE_GUARD
) -> AttackResult:
    """Optimal offline full attack for constant-power demands.

    Each job is split into unit-slot subjobs; the DP partitions subjobs
    into cliques taking at most one subjob per original job, tracking the
    remaining subjob counts per interval.  State space is exponential, so
    instances are guarded by ``max_total_service`` total service slots.
    """
    _require_model(jobs, CONSTANT_POWER, "offline_full_attack_cp")
    cost.check_horizon(jobs.horizon)
    if jobs.n == 0:
        return _empty_result(jobs)
    total_service = sum(j.service for j in jobs)
    if total_service > max_total_service:
        raise SizeLimitError(
            f"total service {total_service} exceeds the DP guard "
            f"{max_total_service}"
        )
    coeffs = cost.coeff_array(jobs.horizon)
    arr = {j.id: j.arrival for j in jobs}
    dl = {j.id: j.deadline for j in jobs}
    pw = {j.id: j.power for j in jobs}
    memo: dict = {}
    choice: dict = {}

    def solve(k: int, l: int, counts: tuple[tuple[int, int], ...]) -> float:
        if not counts:
            return 0.0
        key = (k, l, counts)
        if key in memo:
            return memo[key]
        for jid, m in counts:
            if m > _overlap(arr[jid], dl[jid], k, l):
                memo[key] = _NEG_INF
                return _NEG_INF
        best = _NEG_INF
        best_choice = None
        count_map = dict(counts)
        ids = [jid for jid, _ in counts]
        for z in range(k, l + 1):
            clique = [jid for jid in ids if arr[jid] <= z <= dl[jid]]
            if not clique:
                continue
            cval = coeffs[z] * sum(pw[jid] for jid in clique) ** cost.b
            in_clique = set(clique)
            ranges = []
            feasible = True
            for jid in ids:
                rem = count_map[jid] - (1 if jid in in_clique else 0)
                cap_l = _overlap(arr[jid], dl[jid], k, z - 1)
                cap_r = _overlap(arr[jid], dl[jid], z + 1, l)
                lo = max(0, rem - cap_r)
                hi = min(rem, cap_l)
                if lo > hi:
                    feasible = False
                    break
                ranges.append((jid, rem, range(lo, hi + 1)))
            if not feasible:
                continue
            for split in _split_products(ranges):
                left = tuple((jid, m) for jid, m in split if m > 0)
                right = tuple(
                    (jid, rem - m)
                    for (jid, rem, _), (_, m) in zip(ranges, split)
                    if rem - m > 0
                )
                lval = solve(k, z - 1, left) if z - 1 >= k else (
                    0.0 if not left else _NEG_INF
                )
                if lval == _NEG_INF:
                    continue
                rval = solve(z + 1, l, right) if z + 1 <= l else (
                    0.0 if not right else _NEG_INF
                )
                if rval == _NEG_INF:
                    continue
                val = cval + lval + rval
                if val > best:
                    best = val
                    best_choice = (z, tuple(clique), left, right)
        memo[key] = best
        choice[key] = best_choice
        return best

    def _split_products(ranges):
        # cartesian product of per-job split ranges, ascending => the tie
        # rule "smallest z, then lexicographically smallest left split"
        if not ranges:
            yield ()
            return
        (jid, rem, rng), rest = ranges[0], ranges[1:]
        for m in rng:
            for tail in _split_products(rest):
                yield ((jid, m),) + tail

    lo = min(j.arrival for j in jobs)
    hi = max(j.deadline for j in jobs)
    top = tuple((j.id, j.service) for j in jobs)
    value = solve(lo, hi, top)
    assert value > _NEG_INF, "original instance is always feasible"

    slots_per_job: dict[int, list[int]] = {j.id: [] for j in jobs}
    cliques: list[Clique] = []

    def walk(k: int, l: int, counts: tuple) -> None:
        if not counts:
            return
        picked = choice.get((k, l, counts))
        if picked is None:
            return
        z, clique, left, right = picked
        cliques.append(Clique(tuple(clique), z))
        for jid in clique:
            slots_per_job[jid].append(z)
        walk(k, z - 1, left)
        walk(z + 1, l, right)

    walk(lo, hi, top)

    forged_specs = []  # (start, end, service, original job)
    for j in jobs:
        slots = sorted(slots_per_job[j.id])
        assert len(slots) == j.service
        run_start = slots[0]
        prev = slots[0]
        for t in slots[1:]:
            if t == prev + 1:
                prev = t
                continue
            forged_specs.append((run_start, prev, prev - run_start + 1, j))
            run_start = prev = t
        forged_specs.append((run_start, prev, prev - run_start + 1, j))
    forged_specs.sort(key=lambda item: (item[0], item[3].id, item[1]))
    forged_jobs = []
    mapping: dict[int, list[int]] = {j.id: [] for j in jobs}
    for fid, (start, end, service, job) in enumerate(forged_specs):
        forged_jobs.append(Job(fid, start, end, service=service, power=job.power))
        mapping[job.id].append(fid)
    forged = JobSet(tuple(forged_jobs), jobs.horizon)
    modified = {
        j.id
        for j in jobs
        if [
            (f.arrival, f.deadline, f.service)
            for f in (forged[k] for k in mapping[j.id])
        ]
        != [(j.arrival, j.deadline, j.service)]
    }
    loads = np.zeros(jobs.horizon + 1)
    for start, end, _, job in forged_specs:
        loads[start : end + 1] += job.power
    enforced = cost.evaluate(loads)
    total = sum(
        cost.cost(c.slot, sum(pw[j] for j in c.members)) for c in cliques
    )
    return AttackResult(
        forged=forged,
        modified_ids=frozenset(modified),
        enforced_cost=enforced,
        mapping={k: tuple(v) for k, v in mapping.items()},
        partition=CliquePartition(tuple(cliques), total),
    )


def online_full_attack_cp(jobs: JobSet, cost: CostModel) -> AttackResult:
    """O(n) online full attack: when some active job hits its last possible
    start slot, restart every active job there back to back."""
    _require_model(jobs, CONSTANT_POWER, "online_full_attack_cp")
    cost.check_horizon(jobs.horizon)
    if jobs.n == 0:
        return _empty_result(jobs)
    by_arrival: dict[int, list[Job]] = {}
    for j in jobs:
        by_arrival.setdefault(j.arrival, []).append(j)
    active: list[Job] = []
    batches: list[tuple[int, list[Job]]] = []
    for t in range(jobs.horizon + 1):
        active.extend(by_arrival.get(t, []))
        if active and any(j.deadline == t + j.service - 1 for j in active):
            batches.append((t, active))
            active = []
    assert not active
    forged_specs = []
    cliques = []
    for t, batch in batches:
        cliques.append(Clique(tuple(j.id for j in batch), t))
        for j in batch:
            forged_specs.append((t, t + j.service - 1, j))
    forged_specs.sort(key=lambda item: (item[0], item[2].id))
    forged_jobs = []
    mapping = {}
    modified = set()
    for fid, (start, end, job) in enumerate(forged_specs):
        forged_jobs.append(
            Job(fid, start, end, service=job.service, power=job.power)
        )
        mapping[job.id] = (fid,)
        if (start, end) != (job.arrival, job.deadline):
            modified.add(job.id)
    forged = JobSet(tuple(forged_jobs), jobs.horizon)
    loads = np.zeros(jobs.horizon + 1)
    for start, end, job in forged_specs:
        loads[start : end + 1] += job.power
    enforced = cost.evaluate(loads)
    total = sum(
        cost.cost(t, sum(j.power for j in batch)) for t, batch in batches
    )
    return AttackResult(
        forged=forged,
        modified_ids=frozenset(modified),
        enforced_cost=enforced,
        mapping=mapping,
        partition=CliquePartition(tuple(cliques), total),
    )
