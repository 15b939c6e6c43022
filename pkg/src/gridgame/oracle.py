"""Brute-force references for every optimizer in the package.

These are deliberately slow, structurally independent implementations used
to mint expected values and to cross-check the real algorithms.  They never
call the modules they verify.
"""

from __future__ import annotations

import itertools
from typing import Optional

import numpy as np

from . import kernels
from .attacks_full import Clique, CliquePartition
from .core import (
    CONSTANT_POWER,
    TOTAL_ENERGY,
    Budget,
    CostModel,
    JobSet,
    ModelError,
    SizeLimitError,
)

PARTITION_GUARD = 10
LIMITED_GUARD = 4
CP_COMBO_GUARD = 1_000_000


def brute_force_max_clique_partition(
    jobs: JobSet, cost: CostModel, limit: int = PARTITION_GUARD
) -> CliquePartition:
    """Enumerate every clique partition of a total-energy job set.

    Blocks must have a nonempty common window; with per-slot coefficients a
    block is charged at its costliest common slot.  Pruned recursive set
    partition enumeration, n <= ``limit``.
    """
    if jobs.n and jobs.model != TOTAL_ENERGY:
        raise ModelError("partition oracle needs total-energy jobs")
    if jobs.n > limit:
        raise SizeLimitError(f"partition oracle limited to n <= {limit}")
    if jobs.n == 0:
        return CliquePartition((), 0.0)
    cost.check_horizon(jobs.horizon)
    coeffs = None if cost.is_uniform else cost.coeff_array(jobs.horizon)
    b = cost.b

    def block_value(lo: int, hi: int, esum: float) -> float:
        if coeffs is None:
            return esum**b
        return float(np.max(coeffs[lo : hi + 1])) * esum**b

    blocks: list[list] = []  # [lo, hi, esum, member ids]
    best_val = -1.0
    best_blocks: list[tuple[int, int, tuple[int, ...]]] = []

    def recurse(i: int) -> None:
        nonlocal best_val, best_blocks
        if i == jobs.n:
            val = sum(block_value(lo, hi, esum) for lo, hi, esum, _ in blocks)
            if val > best_val:
                best_val = val
                best_blocks = [
                    (lo, hi, tuple(members)) for lo, hi, _, members in blocks
                ]
            return
        job = jobs[i]
        for blk in blocks:
            lo = max(blk[0], job.arrival)
            hi = min(blk[1], job.deadline)
            if lo <= hi:
                saved = (blk[0], blk[1], blk[2])
                blk[0], blk[1], blk[2] = lo, hi, blk[2] + job.energy
                blk[3].append(job.id)
                recurse(i + 1)
                blk[0], blk[1], blk[2] = saved
                blk[3].pop()
        blocks.append([job.arrival, job.deadline, job.energy, [job.id]])
        recurse(i + 1)
        blocks.pop()

    recurse(0)
    cliques = []
    for lo, hi, members in best_blocks:
        if coeffs is None:
            slot = lo
        else:
            slot = lo + int(np.argmax(coeffs[lo : hi + 1]))
        cliques.append(Clique(members, slot))
    return CliquePartition(tuple(cliques), best_val)


def _descent_min_cost(
    arrivals,
    deadlines,
    work,
    cap,
    coeffs,
    b: float,
    tol: float,
    max_sweeps: int,
):
    """Projected coordinate descent from the even-spread start."""
    n = len(arrivals)
    horizon = len(coeffs) - 1
    alloc = np.zeros((n, horizon + 1))
    for i in range(n):
        width = deadlines[i] - arrivals[i] + 1
        share = work[i] / width
        alloc[i, arrivals[i] : deadlines[i] + 1] = min(share, cap[i])
        # honour the cap in the rare case the even split exceeds it
        deficit = work[i] - alloc[i].sum()
        t = arrivals[i]
        while deficit > 1e-12 and t <= deadlines[i]:
            room = cap[i] - alloc[i, t]
            take = min(room, deficit)
            alloc[i, t] += take
            deficit -= take
            t += 1
    alloc, loads, _, viol = kernels.equalize(
        arrivals, deadlines, work, cap, coeffs, b,
        alloc=alloc, tol=tol, max_sweeps=max_sweeps,
    )
    if b == 1.0:
        cost = float(np.sum(coeffs * loads))
    else:
        cost = float(np.sum(coeffs * loads**b))
    return cost, alloc, loads, viol


def brute_force_min_schedule_te(
    jobs: JobSet,
    cost: CostModel,
    tol: float = 1e-10,
    max_sweeps: int = 100_000,
) -> float:
    """Convex-descent reference for the operator's minimum cost.

    Coordinate descent over per-job allocations with exact single-job
    minimization; convexity makes the stationary point a global optimum.
    """
    if jobs.n and jobs.model != TOTAL_ENERGY:
        raise ModelError("descent oracle needs total-energy jobs")
    if jobs.n == 0:
        return 0.0
    coeffs = cost.coeff_array(jobs.horizon)
    caps = np.full(jobs.n, np.inf)
    value, _, _, _ = _descent_min_cost(
        jobs.arrivals, jobs.deadlines, jobs.energies, caps, coeffs,
        cost.b, tol, max_sweeps,
    )
    return value


def brute_force_cp(
    jobs: JobSet,
    cost: CostModel,
    objective: str = "min",
    combo_limit: int = CP_COMBO_GUARD,
) -> float:
    """Exhaustively enumerate admissible integral constant-power schedules."""
    if objective not in ("min", "max"):
        raise ValueError("objective must be 'min' or 'max'")
    if jobs.n and jobs.model != CONSTANT_POWER:
        raise ModelError("CP oracle needs constant-power jobs")
    if jobs.n == 0:
        return 0.0
    cost.check_horizon(jobs.horizon)
    total = 1
    slot_sets = []
    for j in jobs:
        combos = list(
            itertools.combinations(range(j.arrival, j.deadline + 1), j.service)
        )
        total *= len(combos)
        if total > combo_limit:
            raise SizeLimitError(
                f"CP oracle would enumerate more than {combo_limit} schedules"
            )
        slot_sets.append(combos)
    coeffs = cost.coeff_array(jobs.horizon)
    b = cost.b
    best = None
    loads = np.zeros(jobs.horizon + 1)

    def recurse(i: int) -> None:
        nonlocal best
        if i == jobs.n:
            val = float(np.sum(coeffs * loads**b))
            if best is None:
                best = val
            elif objective == "min":
                best = min(best, val)
            else:
                best = max(best, val)
            return
        p = jobs[i].power
        for combo in slot_sets[i]:
            for t in combo:
                loads[t] += p
            recurse(i + 1)
            for t in combo:
                loads[t] -= p

    recurse(0)
    return best


def brute_force_limited_attack(
    jobs: JobSet,
    budget: Budget,
    operator: str = "optimal",
    cost: Optional[CostModel] = None,
    limit: int = LIMITED_GUARD,
) -> float:
    """Exhaustive limited-attack value against a fixed operator.

    Enumerates every subset of at most B jobs to modify and every
    single-slot compression for each (identity covers unmodified shapes;
    single-slot forms suffice against a convex-cost operator).  The
    "optimal" operator is evaluated by the descent oracle, "baseline"
    by serve-on-arrival loads.
    """
    if operator not in ("optimal", "baseline"):
        raise ValueError("operator must be 'optimal' or 'baseline'")
    if jobs.n > limit:
        raise SizeLimitError(f"limited-attack oracle limited to n <= {limit}")
    if cost is None:
        cost = CostModel(2.0)
    if jobs.n == 0:
        return 0.0
    if jobs.model != TOTAL_ENERGY:
        raise ModelError("limited-attack oracle needs total-energy jobs")
    b = budget.size
    coeffs = cost.coeff_array(jobs.horizon)
    arrivals = list(jobs.arrivals)
    deadlines = list(jobs.deadlines)
    energies = list(jobs.energies)
    caps = np.full(jobs.n, np.inf)
    best = -1.0
    ids = range(jobs.n)
    for size in range(min(b, jobs.n) + 1):
        for subset in itertools.combinations(ids, size):
            windows = [range(arrivals[j], deadlines[j] + 1) for j in subset]
            for slots in itertools.product(*windows):
                eff_a = arrivals.copy()
                eff_d = deadlines.copy()
                for j, t in zip(subset, slots):
                    eff_a[j] = t
                    eff_d[j] = t
                if operator == "baseline":
                    loads = np.zeros(jobs.horizon + 1)
                    for j in ids:
                        loads[eff_a[j]] += energies[j]
                    val = float(np.sum(coeffs * loads**cost.b))
                else:
                    val, _, _, _ = _descent_min_cost(
                        np.array(eff_a), np.array(eff_d),
                        np.array(energies), caps, coeffs,
                        cost.b, 1e-10, 100_000,
                    )
                if val > best:
                    best = val
    return best
