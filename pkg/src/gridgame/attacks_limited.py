"""Budget-constrained attacks: at most B = floor(beta * n) modified jobs.

The offline greedy lower-bound attack picks whole cliques of the optimal
full-budget partition knapsack-style; the upper bound solves the attack
exactly against the baseline serve-on-arrival operator via a budgeted
interval DP.  Online variants sample jobs to modify with probability beta.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .attacks_full import (
    Clique,
    CliquePartition,
    offline_full_attack_cp,
    offline_full_attack_te,
)
from .core import (
    CONSTANT_POWER,
    TOTAL_ENERGY,
    AttackResult,
    Budget,
    ConfigurationError,
    CostModel,
    Job,
    JobSet,
    ModelError,
)
from .scheduling import cr_schedule_online, yds_schedule, yds_time_dependent


@dataclass(frozen=True)
class LimitedBounds:
    """Computable envelope for the limited-attack value C_maxmin.

    ``c1`` is the cost enforced by the greedy attack (a feasible attack,
    hence a lower bound when the operator is optimal); ``c2`` is the exact
    optimum against the baseline operator (an upper bound).
    """

    c1: float
    c2: Optional[float] = None


@dataclass(frozen=True)
class KnapsackChoice:
    chosen: tuple[int, ...]  # indices into the input list, pick order
    beta1: float  # usable fraction of the first unchosen item
    next_index: Optional[int]  # first unchosen item, None if all chosen


def fractional_knapsack_greedy(
    items: Sequence[tuple[float, float]], fraction: float
) -> KnapsackChoice:
    """Greedy prefix of value/weight-sorted items within a weight budget.

    The budget is ``fraction`` times the total weight.  Sorting is stable,
    so equal ratios keep their input order.  Returns the chosen indices,
    the first unchosen index and the fraction beta1 of it that would still
    fit.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ConfigurationError("fraction must lie in [0, 1]")
    if any(w <= 0 for _, w in items):
        raise ConfigurationError("weights must be positive")
    if not items:
        return KnapsackChoice((), 0.0, None)
    order = sorted(range(len(items)), key=lambda i: -items[i][0] / items[i][1])
    budget = fraction * sum(w for _, w in items)
    chosen = []
    used = 0.0
    next_index = None
    for i in order:
        w = items[i][1]
        if used + w <= budget + 1e-9:
            chosen.append(i)
            used += w
        else:
            next_index = i
            break
    beta1 = 0.0
    if next_index is not None:
        beta1 = max(0.0, (budget - used) / items[next_index][1])
    return KnapsackChoice(tuple(chosen), beta1, next_index)


def _build_te_forged(
    jobs: JobSet, compressed: dict[int, int], cost: CostModel,
    partition: Optional[CliquePartition], evaluate_enforced: bool = True,
) -> AttackResult:
    """Forged set that compresses ``compressed[job] = slot`` and keeps the
    rest untouched; enforced cost is the optimal operator's cost on it."""
    specs = []
    for j in jobs:
        if j.id in compressed:
            t = compressed[j.id]
            specs.append((t, t, j))
        else:
            specs.append((j.arrival, j.deadline, j))
    specs.sort(key=lambda item: (item[0], item[2].id))
    forged_jobs = []
    mapping = {}
    modified = set()
    for fid, (a, d, job) in enumerate(specs):
        forged_jobs.append(Job(fid, a, d, energy=job.energy))
        mapping[job.id] = (fid,)
        if (a, d) != (job.arrival, job.deadline):
            modified.add(job.id)
    forged = JobSet(tuple(forged_jobs), jobs.horizon)
    if not evaluate_enforced:
        enforced = float("nan")
    elif cost.is_uniform:
        enforced = yds_schedule(forged, cost).cost
    else:
        enforced = yds_time_dependent(forged, cost).cost
    return AttackResult(
        forged=forged,
        modified_ids=frozenset(modified),
        enforced_cost=enforced,
        mapping=mapping,
        partition=partition,
    )


def offline_limited_attack_te(
    jobs: JobSet, budget: Budget, cost: CostModel
) -> AttackResult:
    """Greedy offline limited attack for total-energy demands.

    Runs the full-budget partition, then either compresses whole cliques
    chosen knapsack-style under the job budget, or compresses the
    highest-energy jobs of the first unchosen clique, whichever forces
    more cost.  The enforced cost is the full system cost: compressed
    cliques plus the operator's optimal schedule of untouched jobs.
    """
    if jobs.n and jobs.model != TOTAL_ENERGY:
        raise ModelError("offline_limited_attack_te needs total-energy jobs")
    if jobs.n == 0:
        return _build_te_forged(jobs, {}, cost, CliquePartition((), 0.0))
    full = offline_full_attack_te(jobs, cost)
    cliques = sorted(full.partition.cliques, key=lambda c: c.slot)
    energy = {j.id: j.energy for j in jobs}
    values = [
        cost.cost(c.slot, sum(energy[m] for m in c.members)) for c in cliques
    ]
    items = [(values[i], float(len(cliques[i].members))) for i in range(len(cliques))]
    choice = fractional_knapsack_greedy(items, budget.beta)
    c1_value = sum(values[i] for i in choice.chosen)
    b_size = budget.size
    c2_value = -1.0
    c2_members: list[int] = []
    c2_clique: Optional[Clique] = None
    if choice.next_index is not None:
        nxt = cliques[choice.next_index]
        ranked = sorted(nxt.members, key=lambda m: (-energy[m], m))
        c2_members = ranked[: min(b_size, len(ranked))]
        c2_value = cost.cost(nxt.slot, sum(energy[m] for m in c2_members))
        c2_clique = Clique(tuple(sorted(c2_members)), nxt.slot)
    if c1_value >= c2_value:
        adopted = tuple(cliques[i] for i in sorted(choice.chosen))
        compressed = {m: c.slot for c in adopted for m in c.members}
        partition = CliquePartition(adopted, c1_value)
    else:
        compressed = {m: c2_clique.slot for m in c2_members}
        partition = CliquePartition((c2_clique,), c2_value)
    return _build_te_forged(jobs, compressed, cost, partition)


def upper_bound_limited_te(
    jobs: JobSet, budget: Budget, cost: CostModel
) -> float:
    """Exact optimal limited attack against the baseline operator.

    Budgeted interval DP: split around a clique anchored at the arrival of
    one unmodified job, fill it with the highest-energy jobs spanning that
    slot, leave the remaining spanning jobs as untouched singletons, and
    distribute the leftover budget over the two subintervals.  Requires
    pairwise-distinct arrivals (see ``refine_slots``).
    """
    if jobs.n and jobs.model != TOTAL_ENERGY:
        raise ModelError("upper_bound_limited_te needs total-energy jobs")
    if not cost.is_uniform:
        raise ModelError("the baseline-operator bound is time-invariant only")
    if jobs.n == 0:
        return 0.0
    arrivals = [j.arrival for j in jobs]
    if len(set(arrivals)) != jobs.n:
        raise ConfigurationError(
            "upper_bound_limited_te needs distinct arrivals; "
            "preprocess with refine_slots"
        )
    b = cost.b
    events = sorted({j.arrival for j in jobs} | {j.deadline for j in jobs})
    by_arrival = {j.arrival: j for j in jobs}
    memo: dict = {}

    def solve(ki: int, li: int, m: int) -> float:
        key = (ki, li, m)
        if key in memo:
            return memo[key]
        k, l = events[ki], events[li]
        contained = [j for j in jobs if j.arrival >= k and j.deadline <= l]
        if not contained:
            memo[key] = 0.0
            return 0.0
        best = -1.0
        for z in sorted(j.arrival for j in contained):
            anchor = by_arrival[z]
            span = [j for j in contained if j.arrival <= z <= j.deadline]
            pool = sorted(
                (j for j in span if j.id != anchor.id),
                key=lambda j: (-j.energy, j.id),
            )
            prefix = [0.0]
            for j in pool:
                prefix.append(prefix[-1] + j.energy)
            suffix = [0.0] * (len(pool) + 1)
            for i in range(len(pool) - 1, -1, -1):
                suffix[i] = suffix[i + 1] + pool[i].energy ** b
            left = None
            if z - 1 >= k:
                lidx = max(i for i in range(ki, li + 1) if events[i] <= z - 1)
                left = (ki, lidx)
            right = None
            if z + 1 <= l:
                ridx = min(i for i in range(ki, li + 1) if events[i] >= z + 1)
                right = (ridx, li)
            for i in range(min(m, len(pool)) + 1):
                base = (anchor.energy + prefix[i]) ** b + suffix[i]
                rem = m - i
                if left and right:
                    for j2 in range(rem + 1):
                        val = (
                            base
                            + solve(left[0], left[1], j2)
                            + solve(right[0], right[1], rem - j2)
                        )
                        if val > best:
                            best = val
                elif left:
                    val = base + solve(left[0], left[1], rem)
                    if val > best:
                        best = val
                elif right:
                    val = base + solve(right[0], right[1], rem)
                    if val > best:
                        best = val
                else:
                    if base > best:
                        best = base
        memo[key] = best
        return best

    return solve(0, len(events) - 1, budget.size)


def limited_bounds_te(
    jobs: JobSet, budget: Budget, cost: CostModel
) -> LimitedBounds:
    c1 = offline_limited_attack_te(jobs, budget, cost).enforced_cost
    c2 = upper_bound_limited_te(jobs, budget, cost)
    return LimitedBounds(c1=c1, c2=c2)


@dataclass(frozen=True)
class SlotRefinement:
    """Timeline rescaled so that arrivals are pairwise distinct."""

    jobs: JobSet
    scale: int
    id_map: dict[int, int]  # original job id -> refined job id

    def to_original_slot(self, t: int) -> int:
        return t // self.scale


def refine_slots(jobs: JobSet) -> SlotRefinement:
    """Spread duplicate arrivals over sub-slots, preserving containment.

    Each original slot becomes ``scale`` refined slots; jobs sharing an
    arrival get distinct offsets, longer-deadline jobs first so that
    window containment survives (identical windows keep exactly one
    direction, which any arrival-separating refinement must forfeit).
    """
    if jobs.n and jobs.model != TOTAL_ENERGY:
        raise ModelError("refine_slots supports total-energy jobs")
    groups: dict[int, list[Job]] = {}
    for j in jobs:
        groups.setdefault(j.arrival, []).append(j)
    scale = max((len(g) for g in groups.values()), default=1)
    if scale == 1:
        return SlotRefinement(jobs, 1, {j.id: j.id for j in jobs})
    refined = []
    for arrival, group in groups.items():
        ranked = sorted(group, key=lambda j: (-j.deadline, j.id))
        for rank, j in enumerate(ranked):
            refined.append(
                (arrival * scale + rank, j.deadline * scale + scale - 1, j)
            )
    refined.sort(key=lambda item: (item[0], item[2].id))
    new_jobs = []
    id_map = {}
    for fid, (a, d, j) in enumerate(refined):
        new_jobs.append(Job(fid, a, d, energy=j.energy))
        id_map[j.id] = fid
    horizon = max(d for _, d, _ in refined) + 1
    return SlotRefinement(JobSet(tuple(new_jobs), horizon), scale, id_map)


def _bernoulli_picks(jobs: JobSet, beta: float, b_size: int, seed: int):
    """Arrival-ordered Bernoulli(beta) selection with both boundary rules:
    stop once the budget is exhausted, force-modify once every remaining
    job fits in it.  One counter-based draw per job that reaches sampling."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    picked = set()
    n_modified = 0
    remaining = jobs.n
    for j in jobs:
        if n_modified == b_size:
            break
        r = float(rng.random())
        if r <= beta or remaining + n_modified <= b_size:
            picked.add(j.id)
            n_modified += 1
        remaining -= 1
    return picked


def online_limited_attack_te(
    jobs: JobSet,
    budget: Budget,
    seed: int,
    cost: CostModel,
    evaluate_enforced: bool = True,
) -> AttackResult:
    """Randomized online limited attack for total-energy demands.

    Jobs are sampled for modification on arrival with probability beta;
    flushes happen at deadlines of any active job (modified or not) and
    compress only the sampled ones, mirroring the full online attack.
    """
    if jobs.n and jobs.model != TOTAL_ENERGY:
        raise ModelError("online_limited_attack_te needs total-energy jobs")
    picked = _bernoulli_picks(jobs, budget.beta, budget.size, seed)
    by_arrival: dict[int, list[Job]] = {}
    for j in jobs:
        by_arrival.setdefault(j.arrival, []).append(j)
    active: list[Job] = []
    chosen: list[Job] = []
    compressed: dict[int, int] = {}
    cliques = []
    for t in range(jobs.horizon + 1):
        for j in by_arrival.get(t, []):
            active.append(j)
            if j.id in picked:
                chosen.append(j)
        if active and any(j.deadline == t for j in active):
            if chosen:
                cliques.append(Clique(tuple(j.id for j in chosen), t))
                for j in chosen:
                    compressed[j.id] = t
            active = []
            chosen = []
    assert not chosen
    total = sum(
        cost.cost(c.slot, sum(jobs[m].energy for m in c.members))
        for c in cliques
    )
    partition = CliquePartition(tuple(cliques), total)
    return _build_te_forged(jobs, compressed, cost, partition, evaluate_enforced)


# ---------------------------------------------------------------------------
# constant-power model
# ---------------------------------------------------------------------------

def _cp_parts(job: Job, slots: list[int]) -> list[tuple[int, int, int]]:
    """Forged parts for a job with some subjobs pinned to single slots:
    the pinned slots (consecutive ones merged into forced runs) plus the
    leftover service spread over the gaps."""
    parts = []
    run_start = prev = slots[0]
    for t in slots[1:]:
        if t == prev + 1:
            prev = t
            continue
        parts.append((run_start, prev, prev - run_start + 1))
        run_start = prev = t
    parts.append((run_start, prev, prev - run_start + 1))
    leftover = job.service - len(slots)
    blocked = set(slots)
    t = job.arrival
    while leftover > 0 and t <= job.deadline:
        if t in blocked:
            t += 1
            continue
        start = t
        while t + 1 <= job.deadline and (t + 1) not in blocked:
            t += 1
        width = t - start + 1
        take = min(leftover, width)
        parts.append((start, t, take))
        leftover -= take
        t += 1
    assert leftover == 0, "window always has room for the remaining service"
    return sorted(parts)


def _build_cp_forged(
    jobs: JobSet,
    pinned: dict[int, list[int]],
    cost: CostModel,
    partition: Optional[CliquePartition],
    evaluate_enforced: bool = True,
) -> AttackResult:
    specs = []
    for j in jobs:
        slots = sorted(pinned.get(j.id, []))
        if slots:
            for a, d, s in _cp_parts(j, slots):
                specs.append((a, d, s, j))
        else:
            specs.append((j.arrival, j.deadline, j.service, j))
    specs.sort(key=lambda item: (item[0], item[3].id, item[1]))
    forged_jobs = []
    mapping: dict[int, list[int]] = {j.id: [] for j in jobs}
    shapes: dict[int, list[tuple[int, int, int]]] = {j.id: [] for j in jobs}
    for fid, (a, d, s, job) in enumerate(specs):
        forged_jobs.append(Job(fid, a, d, service=s, power=job.power))
        mapping[job.id].append(fid)
        shapes[job.id].append((a, d, s))
    forged = JobSet(tuple(forged_jobs), jobs.horizon)
    modified = {
        j.id
        for j in jobs
        if shapes[j.id] != [(j.arrival, j.deadline, j.service)]
    }
    if evaluate_enforced:
        enforced = cr_schedule_online(forged, cost).cost
    else:
        enforced = float("nan")
    return AttackResult(
        forged=forged,
        modified_ids=frozenset(modified),
        enforced_cost=enforced,
        mapping={k: tuple(v) for k, v in mapping.items()},
        partition=partition,
    )


def offline_limited_attack_cp(
    jobs: JobSet, budget: Budget, cost: CostModel
) -> AttackResult:
    """Greedy offline limited attack for constant-power demands.

    The full-budget subjob partition feeds the same two greedy choices as
    the total-energy attack, with clique sizes counted in subjobs so the
    modified-job budget is respected.  A full budget (B >= n) falls back
    to the exact full attack.  Enforced cost: the Controlled Release
    policy's cost on the forged set.
    """
    if jobs.n and jobs.model != CONSTANT_POWER:
        raise ModelError("offline_limited_attack_cp needs constant-power jobs")
    if jobs.n == 0:
        return _build_cp_forged(jobs, {}, cost, CliquePartition((), 0.0))
    b_size = budget.size
    if b_size >= jobs.n:
        return offline_full_attack_cp(jobs, cost)
    power = {j.id: j.power for j in jobs}
    full = offline_full_attack_cp(jobs, cost)
    cliques = sorted(full.partition.cliques, key=lambda c: (c.slot, c.members))
    values = [
        cost.cost(c.slot, sum(power[m] for m in c.members)) for c in cliques
    ]
    items = [(values[i], float(len(cliques[i].members))) for i in range(len(cliques))]
    total_subjobs = sum(j.service for j in jobs)
    fraction = min(1.0, budget.beta * jobs.n / total_subjobs)
    choice = fractional_knapsack_greedy(items, fraction)
    c1_value = sum(values[i] for i in choice.chosen)
    c2_value = -1.0
    c2_clique = None
    if choice.next_index is not None:
        nxt = cliques[choice.next_index]
        ranked = sorted(nxt.members, key=lambda m: (-power[m], m))
        members = tuple(sorted(ranked[: min(b_size, len(ranked))]))
        c2_value = cost.cost(nxt.slot, sum(power[m] for m in members))
        c2_clique = Clique(members, nxt.slot)
    pinned: dict[int, list[int]] = {}
    if c1_value >= c2_value:
        adopted = tuple(cliques[i] for i in sorted(choice.chosen))
        partition = CliquePartition(adopted, c1_value)
    else:
        adopted = (c2_clique,)
        partition = CliquePartition(adopted, c2_value)
    for c in adopted:
        for m in c.members:
            pinned.setdefault(m, []).append(c.slot)
    return _build_cp_forged(jobs, pinned, cost, partition)


def online_limited_attack_cp(
    jobs: JobSet,
    budget: Budget,
    seed: int,
    cost: CostModel,
    evaluate_enforced: bool = True,
) -> AttackResult:
    """Randomized online limited attack for constant-power demands."""
    if jobs.n and jobs.model != CONSTANT_POWER:
        raise ModelError("online_limited_attack_cp needs constant-power jobs")
    picked = _bernoulli_picks(jobs, budget.beta, budget.size, seed)
    by_arrival: dict[int, list[Job]] = {}
    for j in jobs:
        by_arrival.setdefault(j.arrival, []).append(j)
    active: list[Job] = []
    chosen: list[Job] = []
    pinned: dict[int, list[int]] = {}
    cliques = []
    for t in range(jobs.horizon + 1):
        for j in by_arrival.get(t, []):
            active.append(j)
            if j.id in picked:
                chosen.append(j)
        if active and any(j.deadline == t + j.service - 1 for j in active):
            if chosen:
                cliques.append(Clique(tuple(j.id for j in chosen), t))
                for j in chosen:
                    pinned[j.id] = list(range(t, t + j.service))
            active = []
            chosen = []
    assert not chosen
    total = sum(
        cost.cost(c.slot, sum(jobs[m].power for m in c.members)) for c in cliques
    )
    partition = CliquePartition(tuple(cliques), total)
    return _build_cp_forged(jobs, pinned, cost, partition, evaluate_enforced)
