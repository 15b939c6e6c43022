"""Stochastic demand generation, the z-test detector, and experiment runs.

Jobs are generated with Poisson-style arrivals (rounded exponential gaps)
and configurable slackness/energy/power laws; experiments sweep one
parameter, run seeded trials through an attack/operator pipeline, and
aggregate the standard cost columns into CSV tables plus a companion
matplotlib script.
"""

from __future__ import annotations

import copy
import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import attacks_full, attacks_limited, scheduling
from .core import (
    CONSTANT_POWER,
    TOTAL_ENERGY,
    Budget,
    ConfigurationError,
    CostModel,
    Job,
    JobSet,
    baseline_cost,
)

DEFAULT_SEED = 1729

#: canonical column names for experiment tables
COLUMN_GLOSSARY = (
    "C_min",
    "C_bar_min",
    "C_base",
    "C_under_max",
    "C_max",
    "C1_maxmin",
    "C2_maxmin",
    "attacked",
    "z",
    "flagged",
)


# ---------------------------------------------------------------------------
# distributions
# ---------------------------------------------------------------------------

def sample_dist(spec: dict, rng: np.random.Generator, size: int) -> np.ndarray:
    kind = spec.get("kind")
    if kind == "exponential":
        return rng.exponential(spec["mean"], size)
    if kind == "uniform":
        return rng.uniform(spec["lo"], spec["hi"], size)
    if kind == "mixture":
        weights = np.array([c["weight"] for c in spec["components"]])
        if abs(weights.sum() - 1.0) > 1e-9:
            raise ConfigurationError("mixture weights must sum to 1")
        idx = rng.choice(len(weights), size=size, p=weights)
        out = np.empty(size)
        for i, comp in enumerate(spec["components"]):
            mask = idx == i
            out[mask] = rng.uniform(comp["lo"], comp["hi"], int(mask.sum()))
        return out
    raise ConfigurationError(f"unknown distribution kind {kind!r}")


def dist_moments(spec: dict) -> tuple[float, float]:
    """(mean, standard deviation) of a distribution spec."""
    kind = spec.get("kind")
    if kind == "exponential":
        return spec["mean"], spec["mean"]
    if kind == "uniform":
        mean = 0.5 * (spec["lo"] + spec["hi"])
        return mean, (spec["hi"] - spec["lo"]) / math.sqrt(12.0)
    if kind == "mixture":
        mean = 0.0
        second = 0.0
        for comp in spec["components"]:
            m = 0.5 * (comp["lo"] + comp["hi"])
            v = (comp["hi"] - comp["lo"]) ** 2 / 12.0
            mean += comp["weight"] * m
            second += comp["weight"] * (v + m * m)
        return mean, math.sqrt(max(second - mean * mean, 0.0))
    raise ConfigurationError(f"unknown distribution kind {kind!r}")


def _round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5).astype(np.int64)


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GenConfig:
    """Demand generator settings; one seed pins the whole sample."""

    n: int
    model: str = TOTAL_ENERGY  # "te", "cp", or "te_twin" (CP params, TE jobs)
    interarrival_mean: float = 3.0
    slackness: dict = field(
        default_factory=lambda: {"kind": "exponential", "mean": 3.0}
    )
    energy: Optional[tuple[float, float]] = (1.0, 5.0)
    power: Optional[tuple[float, float]] = (1.0, 5.0)
    service_mean: Optional[float] = 2.0
    seed: int = DEFAULT_SEED

    @classmethod
    def from_dict(cls, data: dict) -> "GenConfig":
        kw = dict(data)
        for key in ("energy", "power"):
            if key in kw and isinstance(kw[key], dict):
                kw[key] = (kw[key]["lo"], kw[key]["hi"])
            elif key in kw and kw[key] is not None:
                kw[key] = tuple(kw[key])
        return cls(**kw)

    def replace(self, **kw) -> "GenConfig":
        data = {
            "n": self.n,
            "model": self.model,
            "interarrival_mean": self.interarrival_mean,
            "slackness": self.slackness,
            "energy": self.energy,
            "power": self.power,
            "service_mean": self.service_mean,
            "seed": self.seed,
        }
        data.update(kw)
        return GenConfig(**data)


def generate_jobs(config: GenConfig) -> JobSet:
    """Sample a job set: cumulative rounded-exponential arrivals, rounded
    slackness, uniform energies/powers, rounded-exponential services."""
    rng = np.random.Generator(np.random.Philox(key=config.seed))
    n = config.n
    if n == 0:
        return JobSet((), 0)
    gaps = np.maximum(_round_half_up(rng.exponential(config.interarrival_mean, n)), 1)
    arrivals = np.cumsum(gaps) - gaps[0] + 1
    slack = np.maximum(_round_half_up(sample_dist(config.slackness, rng, n)), 0)
    model = config.model
    jobs = []
    if model == TOTAL_ENERGY:
        energies = rng.uniform(config.energy[0], config.energy[1], n)
        for i in range(n):
            a = int(arrivals[i])
            jobs.append(Job(i, a, a + int(slack[i]), energy=float(energies[i])))
    elif model in (CONSTANT_POWER, "te_twin"):
        services = np.maximum(
            _round_half_up(rng.exponential(config.service_mean, n)), 1
        )
        powers = rng.uniform(config.power[0], config.power[1], n)
        for i in range(n):
            a = int(arrivals[i])
            s = int(services[i])
            jobs.append(
                Job(i, a, a + s - 1 + int(slack[i]), service=s, power=float(powers[i]))
            )
    else:
        raise ConfigurationError(f"unknown model {model!r}")
    out = JobSet.build(jobs)
    if model == "te_twin":
        out = te_twin(out)
    return out


def te_twin(jobs: JobSet) -> JobSet:
    """Total-energy twin of a constant-power set: same arrival and
    slackness, energy e = p * s."""
    twins = [
        Job(j.id, j.arrival, j.arrival + j.slackness, energy=j.power * j.service)
        for j in jobs
    ]
    return JobSet.build(twins)


def random_te_instance(
    rng: np.random.Generator,
    n_max: int = 8,
    t_span: int = 12,
    slack_max: int = 4,
    e_max: int = 9,
    distinct_arrivals: bool = False,
) -> JobSet:
    """Small integer-energy instance for oracle cross-checks."""
    n = int(rng.integers(1, n_max + 1))
    if distinct_arrivals:
        n = min(n, t_span)
        arrivals = sorted(rng.choice(np.arange(1, t_span + 1), size=n, replace=False))
    else:
        arrivals = sorted(rng.integers(1, t_span + 1, size=n))
    jobs = []
    for i, a in enumerate(arrivals):
        d = int(a) + int(rng.integers(0, slack_max + 1))
        jobs.append(Job(i, int(a), d, energy=float(rng.integers(1, e_max + 1))))
    return JobSet.build(jobs)


def random_cp_instance(
    rng: np.random.Generator,
    n_max: int = 4,
    max_total_service: int = 6,
    t_span: int = 6,
    slack_max: int = 2,
    p_max: int = 5,
) -> JobSet:
    """Small integer-power instance within the CP oracle guards."""
    n = int(rng.integers(1, n_max + 1))
    services = [int(rng.integers(1, 3)) for _ in range(n)]
    while sum(services) > max_total_service:
        services[services.index(max(services))] -= 1
    services = [max(1, s) for s in services]
    while sum(services) > max_total_service:
        n -= 1
        services.pop()
    jobs = []
    arrivals = sorted(rng.integers(1, t_span + 1, size=n))
    for i, a in enumerate(arrivals):
        s = services[i]
        d = int(a) + s - 1 + int(rng.integers(0, slack_max + 1))
        jobs.append(Job(i, int(a), d, service=s, power=float(rng.integers(1, p_max + 1))))
    return JobSet.build(jobs)


# ---------------------------------------------------------------------------
# detector
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DetectorConfig:
    mu: float
    sigma: float
    alpha: float = 0.05

    def __post_init__(self):
        if self.sigma <= 0:
            raise ConfigurationError("sigma must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigurationError("alpha must lie in (0, 1)")


@dataclass(frozen=True)
class ZTestResult:
    z: float
    p_value: float
    flagged: bool


def z_test(samples, det: DetectorConfig) -> ZTestResult:
    """One-sample z-test on the mean, two-sided."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size == 0:
        raise ConfigurationError("z-test needs a nonempty sample")
    z = (samples.mean() - det.mu) * math.sqrt(samples.size) / det.sigma
    p = math.erfc(abs(z) / math.sqrt(2.0))
    return ZTestResult(z=z, p_value=p, flagged=p < det.alpha)


def detector_false_flag_rate(
    det: DetectorConfig, dist: dict, n_samples: int, trials: int, seed: int
) -> float:
    """Empirical flag rate on unmodified i.i.d. samples (null hypothesis)."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    flags = 0
    for _ in range(trials):
        if z_test(sample_dist(dist, rng, n_samples), det).flagged:
            flags += 1
    return flags / trials


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

OPERATOR_NAMES = ("yds", "avr", "yds-td", "cp-relax", "cr", "baseline")
ATTACK_NAMES = (
    "none",
    "offline-full",
    "online-full",
    "offline-limited",
    "online-limited",
)

ATTACK_SEED_OFFSET = 100_003


def _run_operator(name: str, jobs: JobSet, cost: CostModel, params: dict) -> float:
    if name == "yds":
        return scheduling.yds_schedule(jobs, cost).cost
    if name == "avr":
        return scheduling.avr_schedule(jobs, cost).cost
    if name == "yds-td":
        return scheduling.yds_time_dependent(jobs, cost).cost
    if name == "cp-relax":
        return scheduling.cp_relaxed_lower_bound(jobs, cost).cost
    if name == "cr":
        return scheduling.cr_schedule_online(
            jobs, cost, threshold=params.get("threshold")
        ).cost
    if name == "baseline":
        return baseline_cost(jobs, cost)
    raise ConfigurationError(
        f"unknown operator {name!r}; valid: {', '.join(OPERATOR_NAMES)}"
    )


def _run_attack(name: str, jobs: JobSet, cost: CostModel, params: dict, seed: int):
    beta = params.get("beta", 1.0)
    budget = Budget(beta, jobs.n)
    te = jobs.model != CONSTANT_POWER
    if name == "none":
        return None
    if name == "offline-full":
        fn = attacks_full.offline_full_attack_te if te else attacks_full.offline_full_attack_cp
        return fn(jobs, cost)
    if name == "online-full":
        fn = attacks_full.online_full_attack_te if te else attacks_full.online_full_attack_cp
        return fn(jobs, cost)
    if name == "offline-limited":
        fn = (
            attacks_limited.offline_limited_attack_te
            if te
            else attacks_limited.offline_limited_attack_cp
        )
        return fn(jobs, budget, cost)
    if name == "online-limited":
        if te:
            return attacks_limited.online_limited_attack_te(
                jobs, budget, seed, cost, evaluate_enforced=False
            )
        return attacks_limited.online_limited_attack_cp(
            jobs, budget, seed, cost, evaluate_enforced=False
        )
    raise ConfigurationError(
        f"unknown attack {name!r}; valid: {', '.join(ATTACK_NAMES)}"
    )


@dataclass
class ExperimentResult:
    sweep_param: Optional[str]
    columns: list[str]
    rows: list[dict]  # one per sweep value: {"value", "<col>_mean", "<col>_err"}
    raw: list[dict]  # one per (value, trial): {"value", "trial", metrics...}


def _set_path(scenario: dict, path: str, value) -> None:
    keys = path.split(".")
    node = scenario
    for key in keys[:-1]:
        node = node.setdefault(key, {})
    node[keys[-1]] = value


def trial_metrics(
    jobs: JobSet,
    cost: CostModel,
    operator_spec: dict,
    attack_spec: dict,
    seed: int,
    offline_max: bool,
    slackness_spec: Optional[dict] = None,
    alpha: float = 0.05,
) -> dict:
    """All standard cost columns plus the detector verdict for one trial."""
    te = jobs.model != CONSTANT_POWER
    out: dict = {}
    if te:
        out["C_min"] = scheduling.yds_schedule(jobs, cost).cost
        out["C_bar_min"] = scheduling.avr_schedule(jobs, cost).cost
        out["C_under_max"] = attacks_full.online_full_attack_te(jobs, cost).enforced_cost
        if offline_max:
            out["C_max"] = attacks_full.offline_full_attack_te(jobs, cost).enforced_cost
    else:
        out["C_min"] = scheduling.cp_relaxed_lower_bound(jobs, cost).cost
        out["C_bar_min"] = scheduling.cr_schedule_online(jobs, cost).cost
        out["C_under_max"] = attacks_full.online_full_attack_cp(jobs, cost).enforced_cost
        if offline_max:
            out["C_max"] = attacks_full.offline_full_attack_cp(jobs, cost).enforced_cost
    out["C_base"] = baseline_cost(jobs, cost)
    attack_name = attack_spec.get("name", "none")
    result = _run_attack(
        attack_name, jobs, cost, attack_spec, seed + ATTACK_SEED_OFFSET
    )
    forged = result.forged if result is not None else jobs
    out["attacked"] = _run_operator(
        operator_spec.get("name", "yds" if te else "cr"), forged, cost, operator_spec
    )
    if attack_name == "offline-limited" and te:
        out["C1_maxmin"] = result.enforced_cost
        arrivals = [j.arrival for j in jobs]
        if cost.is_uniform and len(set(arrivals)) == jobs.n:
            out["C2_maxmin"] = attacks_limited.upper_bound_limited_te(
                jobs, Budget(attack_spec.get("beta", 1.0), jobs.n), cost
            )
    if slackness_spec is not None and forged.n:
        mu, sigma = dist_moments(slackness_spec)
        verdict = z_test(
            forged.slackness_values(), DetectorConfig(mu, sigma, alpha)
        )
        out["z"] = verdict.z
        out["flagged"] = float(verdict.flagged)
    return out


def run_experiment(scenario: dict) -> ExperimentResult:
    """Sweep one parameter over seeded trials and aggregate mean/stderr."""
    scenario = copy.deepcopy(scenario)
    sweep = scenario.get("sweep")
    values = sweep["values"] if sweep else [None]
    param = sweep["param"] if sweep else None
    trials = scenario.get("trials", 1)
    seed0 = scenario.get("seed0", DEFAULT_SEED)
    rows = []
    raw = []
    columns: list[str] = []
    for value in values:
        point = copy.deepcopy(scenario)
        if param is not None:
            _set_path(point, param, value)
        cost = CostModel(point.get("b", 2.0))
        gen = GenConfig.from_dict(point["generator"])
        operator_spec = point.get("operator", {})
        attack_spec = point.get("attack", {"name": "none"})
        offline_max = point.get("offline_max", gen.n <= 25)
        samples: dict[str, list[float]] = {}
        for trial in range(trials):
            seed = seed0 + trial
            jobs = generate_jobs(gen.replace(seed=seed))
            metrics = trial_metrics(
                jobs,
                cost,
                operator_spec,
                attack_spec,
                seed,
                offline_max,
                slackness_spec=gen.slackness,
                alpha=point.get("alpha", 0.05),
            )
            raw.append({"value": value, "trial": trial, **metrics})
            for key, v in metrics.items():
                samples.setdefault(key, []).append(v)
        row = {"value": value}
        for key in COLUMN_GLOSSARY:
            if key not in samples:
                continue
            if key not in columns:
                columns.append(key)
            data = np.array(samples[key])
            row[f"{key}_mean"] = float(data.mean())
            row[f"{key}_err"] = (
                float(data.std(ddof=1) / math.sqrt(len(data))) if len(data) > 1 else 0.0
            )
        rows.append(row)
    if trials == 0:
        rows = []
    return ExperimentResult(sweep_param=param, columns=columns, rows=rows, raw=raw)


_PLOT_TEMPLATE = """\
#!/usr/bin/env python3
# Plot {csv_name}: one line per cost column against the sweep value.
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent
with open(here / "{csv_name}", newline="") as fh:
    rows = list(csv.DictReader(fh))

x = [float(r["value"]) for r in rows]
columns = {columns!r}
fig, ax = plt.subplots()
for col in columns:
    y = [float(r[col + "_mean"]) for r in rows]
    err = [float(r[col + "_err"]) for r in rows]
    ax.errorbar(x, y, yerr=err, marker="o", capsize=3, label=col)
ax.set_xlabel({param!r})
ax.set_ylabel("cost")
ax.legend()
fig.savefig(here / "{png_name}", dpi=150, bbox_inches="tight")
print("wrote", here / "{png_name}")
"""


def emit_tables(result: ExperimentResult, out_dir, basename: str = "results"):
    """Write the aggregate CSV and a companion matplotlib script.

    Output is byte-stable for identical inputs: fixed column order and
    repr-formatted floats.
    """
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{basename}.csv"
    header = ["sweep_param", "value"]
    for col in result.columns:
        header.extend([f"{col}_mean", f"{col}_err"])
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in result.rows:
            record = [result.sweep_param or "", repr(row["value"])]
            for col in result.columns:
                record.append(repr(row.get(f"{col}_mean", "")))
                record.append(repr(row.get(f"{col}_err", "")))
            writer.writerow(record)
    plot_path = out / f"plot_{basename}.py"
    plot_path.write_text(
        _PLOT_TEMPLATE.format(
            csv_name=csv_path.name,
            columns=list(result.columns),
            param=result.sweep_param or "value",
            png_name=f"{basename}.png",
        )
    )
    return csv_path, plot_path
