"""Closed-form evaluators for the guarantee quantities.

Everything here is plain arithmetic on instance statistics: the structural
ratios r1/r2 behind the online-attack guarantees, the explicit lower bound
on the full-attack value, the upper-bound factor tying it to the operator
optimum, and the guaranteed fractions of the limited and time-dependent
attacks.  Integer ceilings are computed on integers, never via floats.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from .core import (
    CONSTANT_POWER,
    Budget,
    ConfigurationError,
    CostModel,
    JobSet,
)


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


@dataclass(frozen=True)
class BoundsReport:
    r1: int
    r2: int
    max_lower: float
    max_upper_factor: float
    online_fraction: float
    limited_fraction: float
    cp_limited_fraction: float
    avr_ratio_upper: float
    td_fraction: float

    def to_dict(self) -> dict:
        return {
            "r1": self.r1,
            "r2": self.r2,
            "max_lower": self.max_lower,
            "max_upper_factor": self.max_upper_factor,
            "online_fraction": self.online_fraction,
            "limited_fraction": self.limited_fraction,
            "cp_limited_fraction": self.cp_limited_fraction,
            "avr_ratio_upper": self.avr_ratio_upper,
            "td_fraction": self.td_fraction,
        }


def compute_bounds(
    jobs: JobSet, budget: Optional[Budget], cost: CostModel
) -> BoundsReport:
    """Evaluate every guarantee quantity on one instance.

    ``r2`` and the constant-power limited fraction are zero for
    total-energy sets; for constant-power sets the lower bound uses the
    per-job total energy s * p.
    """
    if jobs.n == 0:
        raise ConfigurationError("bounds need a nonempty job set")
    b = cost.b
    beta = budget.beta if budget is not None else 1.0
    l_min, l_max = jobs.l_min, jobs.l_max
    r1 = _ceil_div(l_max, l_min) + 1
    if jobs.model == CONSTANT_POWER:
        slack_plus = [j.allowance - j.service + 1 for j in jobs]
        r2 = (jobs.s_max - jobs.s_min + 1) * (
            _ceil_div(max(slack_plus), min(slack_plus)) + 1
        )
        s_avg = sum(j.service for j in jobs) / jobs.n
        cp_limited_fraction = 0.5 * (beta / s_avg) ** b
    else:
        r2 = 0
        cp_limited_fraction = 0.0
    total_energy = float(jobs.energies.sum())
    span = int(jobs.arrivals[-1] - jobs.arrivals[0])
    max_lower = (l_min * total_energy / (2 * l_min + span)) ** b
    max_upper_factor = 2 ** (b - 1) * (l_max + 1) ** b * b**b
    return BoundsReport(
        r1=r1,
        r2=r2,
        max_lower=max_lower,
        max_upper_factor=max_upper_factor,
        online_fraction=1.0 / r1 ** (b - 1),
        limited_fraction=beta**b / 2.0,
        cp_limited_fraction=cp_limited_fraction,
        avr_ratio_upper=2 ** (b - 1) * b**b,
        td_fraction=(cost.c_min / cost.c_max) / r1 ** (b - 1),
    )


def figure1_bound(
    n: int, l_min: float, avg_energy: float, avg_interarrival: float, b: float
) -> float:
    """Lower bound on the full-attack value from the aggregate statistics:
    total energy n * avg_energy, arrival span (n - 1) * avg_interarrival."""
    total_energy = avg_energy * n
    span = avg_interarrival * (n - 1)
    return (l_min * total_energy / (2 * l_min + span)) ** b


def figure1_curve(
    n_values: Iterable[int],
    lmin_values: Iterable[float],
    avg_energy: float = 10.0,
    avg_interarrival: float = 5.0,
    b: float = 2.0,
) -> list[tuple[int, float, float]]:
    """Tabulate the explicit lower bound over (n, l_min) grid points."""
    rows = []
    for n in n_values:
        for l_min in lmin_values:
            rows.append(
                (n, l_min, figure1_bound(n, l_min, avg_energy, avg_interarrival, b))
            )
    return rows
