"""Domain model for time-elastic energy demands on a slotted horizon.

Two demand flavours share one job type: total-energy jobs carry an amount
of energy that may be split arbitrarily inside their window, constant-power
jobs occupy a fixed number of whole slots at a fixed rate.  A job set is
homogeneous, sorted by arrival, and lives on the integer horizon [0, T].

The module also holds per-slot convex costs, schedules (per-job per-slot
allocations), the baseline serve-on-arrival policy, and the admissibility
check that decides whether a forged demand set could have been produced
without shortchanging any real customer.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

#: absolute tolerance used for energy bookkeeping comparisons
EPS = 1e-9

TOTAL_ENERGY = "te"
CONSTANT_POWER = "cp"


class GridGameError(Exception):
    """Base class for all package errors."""


class ConfigurationError(GridGameError):
    """Inconsistent inputs: mismatched horizons, bad coefficients, ..."""


class ModelError(GridGameError):
    """An operation received jobs of the wrong demand model."""


class SizeLimitError(GridGameError):
    """Instance exceeds a guard meant to keep an exponential routine sane."""


@dataclass(frozen=True)
class Job:
    """One demand: window [arrival, deadline] plus energy or service/power.

    Total-energy jobs set ``energy``; constant-power jobs set ``service``
    (whole slots) and ``power`` (rate per served slot).
    """

    id: int
    arrival: int
    deadline: int
    energy: Optional[float] = None
    service: Optional[int] = None
    power: Optional[float] = None

    def __post_init__(self):
        if self.arrival < 0 or self.deadline < self.arrival:
            raise ConfigurationError(
                f"job {self.id}: bad window [{self.arrival}, {self.deadline}]"
            )
        if self.energy is not None:
            if self.service is not None or self.power is not None:
                raise ConfigurationError(f"job {self.id}: mixed te/cp fields")
            if self.energy < 0:
                raise ConfigurationError(f"job {self.id}: negative energy")
        else:
            if self.service is None or self.power is None:
                raise ConfigurationError(f"job {self.id}: incomplete demand")
            if self.service < 1 or self.service > self.allowance:
                raise ConfigurationError(
                    f"job {self.id}: service {self.service} does not fit "
                    f"allowance {self.allowance}"
                )
            if self.power <= 0:
                raise ConfigurationError(f"job {self.id}: nonpositive power")

    @property
    def model(self) -> str:
        return TOTAL_ENERGY if self.energy is not None else CONSTANT_POWER

    @property
    def allowance(self) -> int:
        """Number of slots the job may be served in."""
        return self.deadline - self.arrival + 1

    @property
    def slackness(self) -> int:
        """Maximum time elasticity left to the scheduler."""
        if self.model == TOTAL_ENERGY:
            return self.allowance - 1
        return self.allowance - self.service

    def contains(self, t: int) -> bool:
        return self.arrival <= t <= self.deadline

    def replace(self, **kw) -> "Job":
        data = {
            "id": self.id,
            "arrival": self.arrival,
            "deadline": self.deadline,
            "energy": self.energy,
            "service": self.service,
            "power": self.power,
        }
        data.update(kw)
        return Job(**data)

    def to_dict(self) -> dict:
        if self.model == TOTAL_ENERGY:
            return {"a": self.arrival, "d": self.deadline, "e": self.energy}
        return {
            "a": self.arrival,
            "d": self.deadline,
            "s": self.service,
            "p": self.power,
        }


@dataclass(frozen=True)
class JobSet:
    """Homogeneous collection of jobs, sorted by arrival, ids 0..n-1."""

    jobs: tuple[Job, ...]
    horizon: int

    def __post_init__(self):
        models = {j.model for j in self.jobs}
        if len(models) > 1:
            raise ModelError("job set mixes demand models")
        if self.horizon < 0:
            raise ConfigurationError("negative horizon")
        prev = -1
        for i, j in enumerate(self.jobs):
            if j.id != i:
                raise ConfigurationError("job ids must be 0..n-1 in order")
            if j.arrival < prev:
                raise ConfigurationError("jobs must be sorted by arrival")
            if j.deadline > self.horizon:
                raise ConfigurationError(
                    f"job {i} deadline {j.deadline} beyond horizon {self.horizon}"
                )
            prev = j.arrival

    @classmethod
    def build(cls, jobs: Iterable[Job], horizon: Optional[int] = None) -> "JobSet":
        """Sort by arrival (stable), reindex ids, clamp horizon to max d + 1."""
        ordered = sorted(jobs, key=lambda j: j.arrival)
        ordered = [j.replace(id=i) for i, j in enumerate(ordered)]
        if horizon is None:
            horizon = max((j.deadline for j in ordered), default=0) + 1
        return cls(tuple(ordered), horizon)

    @property
    def n(self) -> int:
        return len(self.jobs)

    @property
    def model(self) -> Optional[str]:
        return self.jobs[0].model if self.jobs else None

    def __iter__(self):
        return iter(self.jobs)

    def __len__(self):
        return len(self.jobs)

    def __getitem__(self, i: int) -> Job:
        return self.jobs[i]

    @cached_property
    def arrivals(self) -> np.ndarray:
        return np.array([j.arrival for j in self.jobs], dtype=np.int64)

    @cached_property
    def deadlines(self) -> np.ndarray:
        return np.array([j.deadline for j in self.jobs], dtype=np.int64)

    @cached_property
    def energies(self) -> np.ndarray:
        if self.model == CONSTANT_POWER:
            return np.array(
                [j.power * j.service for j in self.jobs], dtype=np.float64
            )
        return np.array([j.energy for j in self.jobs], dtype=np.float64)

    def allowances(self) -> np.ndarray:
        return self.deadlines - self.arrivals + 1

    def slackness_values(self) -> np.ndarray:
        return np.array([j.slackness for j in self.jobs], dtype=np.float64)

    @property
    def l_min(self) -> int:
        return int(self.allowances().min())

    @property
    def l_max(self) -> int:
        return int(self.allowances().max())

    @property
    def s_min(self) -> int:
        return min(j.service for j in self.jobs)

    @property
    def s_max(self) -> int:
        return max(j.service for j in self.jobs)

    @property
    def p_min(self) -> float:
        return min(j.power for j in self.jobs)

    @property
    def p_max(self) -> float:
        return max(j.power for j in self.jobs)

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "model": self.model or TOTAL_ENERGY,
            "jobs": [j.to_dict() for j in self.jobs],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: Mapping) -> "JobSet":
        model = data.get("model", TOTAL_ENERGY)
        jobs = []
        for i, spec in enumerate(data["jobs"]):
            if model == TOTAL_ENERGY:
                jobs.append(Job(i, spec["a"], spec["d"], energy=spec["e"]))
            else:
                jobs.append(
                    Job(i, spec["a"], spec["d"], service=spec["s"], power=spec["p"])
                )
        return cls.build(jobs, data.get("horizon"))

    @classmethod
    def from_json(cls, text: str) -> "JobSet":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class CostModel:
    """Per-slot cost c_t * E**b, convex and nondecreasing for b >= 1.

    ``coeffs`` is None for the time-invariant cost (all c_t = 1) or a
    positive vector of length horizon + 1.
    """

    b: float = 2.0
    coeffs: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if self.b < 1:
            raise ConfigurationError("cost exponent must be >= 1")
        if self.coeffs is not None:
            if len(self.coeffs) == 0 or min(self.coeffs) <= 0:
                raise ConfigurationError("per-slot coefficients must be positive")

    @property
    def is_uniform(self) -> bool:
        return self.coeffs is None

    @property
    def c_min(self) -> float:
        return 1.0 if self.coeffs is None else min(self.coeffs)

    @property
    def c_max(self) -> float:
        return 1.0 if self.coeffs is None else max(self.coeffs)

    def coeff(self, t: int) -> float:
        return 1.0 if self.coeffs is None else self.coeffs[t]

    def coeff_array(self, horizon: int) -> np.ndarray:
        self.check_horizon(horizon)
        if self.coeffs is None:
            return np.ones(horizon + 1)
        return np.asarray(self.coeffs, dtype=np.float64)

    def check_horizon(self, horizon: int) -> None:
        if self.coeffs is not None and len(self.coeffs) != horizon + 1:
            raise ConfigurationError(
                f"cost has {len(self.coeffs)} coefficients, horizon {horizon} "
                f"needs {horizon + 1}"
            )

    def cost(self, t: int, load: float) -> float:
        return self.coeff(t) * load**self.b

    def evaluate(self, loads: np.ndarray) -> float:
        loads = np.asarray(loads, dtype=np.float64)
        self.check_horizon(len(loads) - 1)
        if self.coeffs is None:
            return float(np.sum(loads**self.b))
        return float(np.sum(np.asarray(self.coeffs) * loads**self.b))


@dataclass(frozen=True)
class Schedule:
    """Per-job per-slot energy allocation on [0, horizon]."""

    entries: tuple[tuple[int, int, float], ...]  # (job id, slot, amount)
    horizon: int

    @classmethod
    def from_map(
        cls, alloc: Mapping[tuple[int, int], float], horizon: int
    ) -> "Schedule":
        entries = tuple(
            (j, t, float(v)) for (j, t), v in sorted(alloc.items()) if v != 0.0
        )
        return cls(entries, horizon)

    @cached_property
    def loads(self) -> np.ndarray:
        out = np.zeros(self.horizon + 1)
        for _, t, v in self.entries:
            out[t] += v
        return out

    def job_total(self, job_id: int) -> float:
        return sum(v for j, _, v in self.entries if j == job_id)

    def job_slots(self, job_id: int) -> list[tuple[int, float]]:
        return [(t, v) for j, t, v in self.entries if j == job_id]

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "allocation": [
                {"job": j, "slot": t, "amount": v} for j, t, v in self.entries
            ],
        }


@dataclass(frozen=True)
class IntervalStat:
    """A critical interval: slots, energy intensity, optional derivative."""

    k: int
    l: int
    intensity: float
    derivative: Optional[float] = None
    slots: Optional[tuple[int, ...]] = None


@dataclass(frozen=True)
class AttackResult:
    """Forged demand set plus the bookkeeping needed to audit it.

    ``mapping`` sends each original job id to the forged job ids that
    together serve it (several when a job was split into subjobs).
    """

    forged: JobSet
    modified_ids: frozenset[int]
    enforced_cost: float
    mapping: dict[int, tuple[int, ...]] = field(default_factory=dict)
    partition: Optional[object] = None  # CliquePartition when produced by a DP

    def to_dict(self) -> dict:
        out = {
            "cost": self.enforced_cost,
            "forged_jobs": [j.to_dict() for j in self.forged],
            "modified": sorted(self.modified_ids),
            "cliques": [],
        }
        if self.partition is not None:
            out["cliques"] = [
                {"slot": c.slot, "members": sorted(c.members)}
                for c in self.partition.cliques
            ]
        return out


@dataclass(frozen=True)
class Violation:
    """First admissibility constraint a forged set breaks."""

    job_id: int
    constraint: str
    detail: str

    def __str__(self):
        return f"job {self.job_id}: {self.constraint} ({self.detail})"


def evaluate_cost(schedule: Schedule, cost: CostModel) -> float:
    """Total convex cost of a schedule's per-slot loads."""
    cost.check_horizon(schedule.horizon)
    return cost.evaluate(schedule.loads)


def baseline_schedule(jobs: JobSet) -> Schedule:
    """Serve every demand entirely and immediately at its arrival."""
    alloc: dict[tuple[int, int], float] = {}
    for j in jobs:
        if j.model == TOTAL_ENERGY:
            alloc[(j.id, j.arrival)] = alloc.get((j.id, j.arrival), 0.0) + j.energy
        else:
            for t in range(j.arrival, j.arrival + j.service):
                alloc[(j.id, t)] = j.power
    return Schedule.from_map(alloc, jobs.horizon)


def baseline_cost(jobs: JobSet, cost: CostModel) -> float:
    """Cost of the inelastic serve-on-arrival policy (the "dumb grid")."""
    return evaluate_cost(baseline_schedule(jobs), cost)


def identity_mapping(jobs: JobSet) -> dict[int, tuple[int, ...]]:
    return {j.id: (j.id,) for j in jobs}


def validate_admissible(
    original: JobSet,
    forged: JobSet,
    mapping: Mapping[int, Sequence[int]],
) -> Optional[Violation]:
    """Check that ``forged`` could lawfully replace ``original``.

    Every original job's forged parts must nest inside its window; energy
    must be conserved (total-energy) or service split over disjoint windows
    at unchanged power (constant-power).  Returns None when admissible,
    otherwise the first violated constraint.
    """
    if original.model != forged.model and forged.n > 0 and original.n > 0:
        return Violation(-1, "model-mismatch", f"{original.model} vs {forged.model}")
    seen: set[int] = set()
    for j in original:
        if j.id not in mapping or len(mapping[j.id]) == 0:
            return Violation(j.id, "mapping-missing", "no forged jobs assigned")
        parts = [forged[k] for k in mapping[j.id]]
        seen.update(mapping[j.id])
        for part in parts:
            if part.arrival < j.arrival or part.deadline > j.deadline:
                return Violation(
                    j.id,
                    "window",
                    f"forged [{part.arrival}, {part.deadline}] outside "
                    f"[{j.arrival}, {j.deadline}]",
                )
        if j.model == TOTAL_ENERGY:
            total = sum(p.energy for p in parts)
            if abs(total - j.energy) > EPS:
                return Violation(
                    j.id, "energy-sum", f"forged total {total} != {j.energy}"
                )
        else:
            for part in parts:
                if abs(part.power - j.power) > EPS:
                    return Violation(
                        j.id, "power-change", f"{part.power} != {j.power}"
                    )
            if sum(p.service for p in parts) != j.service:
                return Violation(
                    j.id,
                    "service-sum",
                    f"forged total {sum(p.service for p in parts)} != {j.service}",
                )
            spans = sorted((p.arrival, p.deadline) for p in parts)
            for (a1, d1), (a2, d2) in zip(spans, spans[1:]):
                if a2 <= d1:
                    return Violation(
                        j.id,
                        "subjob-overlap",
                        f"[{a1}, {d1}] and [{a2}, {d2}] intersect",
                    )
    if len(seen) != forged.n:
        return Violation(-1, "mapping-missing", "forged jobs left unmapped")
    return None


def check_schedule(
    jobs: JobSet, schedule: Schedule, tol: float = EPS
) -> Optional[Violation]:
    """Verify a schedule serves the given jobs admissibly."""
    per_job: dict[int, list[tuple[int, float]]] = {j.id: [] for j in jobs}
    for j, t, v in schedule.entries:
        if j not in per_job:
            return Violation(j, "unknown-job", "allocation for absent job")
        per_job[j].append((t, v))
    for job in jobs:
        slots = per_job[job.id]
        for t, v in slots:
            if not job.contains(t):
                return Violation(job.id, "window", f"served at slot {t}")
            if v < -tol:
                return Violation(job.id, "negative", f"amount {v} at slot {t}")
        if job.model == TOTAL_ENERGY:
            total = sum(v for _, v in slots)
            if abs(total - job.energy) > max(tol, tol * abs(job.energy)):
                return Violation(
                    job.id, "energy-sum", f"served {total} != {job.energy}"
                )
        else:
            nonzero = [(t, v) for t, v in slots if v > tol]
            for t, v in nonzero:
                if abs(v - job.power) > tol:
                    return Violation(
                        job.id, "power-change", f"rate {v} != {job.power}"
                    )
            if len(nonzero) != job.service:
                return Violation(
                    job.id,
                    "service-sum",
                    f"{len(nonzero)} served slots != {job.service}",
                )
    return None


def budget_size(beta: float, n: int) -> int:
    """floor(beta * n) computed robustly against float dust."""
    if not 0.0 <= beta <= 1.0:
        raise ConfigurationError("beta must lie in [0, 1]")
    return int(math.floor(beta * n + 1e-9))


@dataclass(frozen=True)
class Budget:
    """Attack budget: at most B = floor(beta * n) jobs may be modified."""

    beta: float
    n: int

    @property
    def size(self) -> int:
        return budget_size(self.beta, self.n)
