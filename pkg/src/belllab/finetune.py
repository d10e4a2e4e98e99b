"""Overhead fine-tuning F = 1 - N_f / V^Omega of superdeterministic models.

``V`` is the number of lattice points per hidden-variable table, ``Omega`` the
number of context tables and ``N_f`` the number of joint table assignments
that survive the model's constraints.  Counts are exact ints; ``1 - F`` is
additionally reported as ``log10(1 - F)`` because it underflows every float
well before the counts get interesting.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from belllab.models import OutcomeKernel, Sector
from belllab.scenario import SECTORS, context_count, sector_key
from belllab.simplex import LatticeDistribution, count_configurations, enumerate_configurations

# exact rationals are kept while V^Omega has fewer decimal digits than this
EXACT_DIGITS = 10_000
DEFAULT_BUDGET = 10_000_000


class BudgetExceeded(RuntimeError):
    def __init__(self, required: int, budget: int):
        super().__init__(f"enumeration needs ~{required} kernel evaluations, budget is {budget}")
        self.required = required
        self.budget = budget


@dataclass
class FineTuningReport:
    mode: str
    n_mechanisms: int
    n_values: int
    denominator: int
    omega: int
    v_total: int
    log10_one_minus_f: float
    n_f: int | None = None
    f_exact: Fraction | None = None
    sector_sums: dict[str, int] | None = None

    @property
    def f_value(self) -> float:
        """F as a float; rounds to 1.0 once 1 - F drops below machine epsilon."""
        if self.f_exact is not None:
            return float(self.f_exact)
        return -math.expm1(self.log10_one_minus_f * math.log(10))

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "N": self.n_mechanisms,
            "lambda_count": self.n_values,
            "L": self.denominator,
            "omega": str(self.omega),
            "v": str(self.v_total),
            "n_f": None if self.n_f is None else str(self.n_f),
            "log10_one_minus_F": self.log10_one_minus_f,
            "F": None if self.f_exact is None else str(self.f_exact),
            "F_float": self.f_value,
            "sector_sums": None if self.sector_sums is None else {k: str(v) for k, v in self.sector_sums.items()},
        }


def _exact_budget_ok(v: int, omega: int) -> bool:
    return v <= 1 or omega * math.log10(v) < EXACT_DIGITS


def f_constrained(n_mechanisms: int, n_values: int, denominator: int) -> FineTuningReport:
    """Model with one table per (M_A, M_B): ``N_f = V^4`` and ``F = 1 - V^(4 - Omega)``."""
    v = count_configurations(n_values, denominator)
    omega = context_count(n_mechanisms)
    log_ratio = (4 - omega) * math.log10(v) if v > 1 else 0.0
    report = FineTuningReport(
        mode="constrained-closed-form",
        n_mechanisms=n_mechanisms,
        n_values=n_values,
        denominator=denominator,
        omega=omega,
        v_total=v,
        log10_one_minus_f=log_ratio,
    )
    if _exact_budget_ok(v, omega):
        report.n_f = v**4
        report.f_exact = 1 - Fraction(v**4, v**omega)
    return report


def _sector_scale(kernel: OutcomeKernel, sector: Sector) -> list[tuple[int, ...]]:
    """Kernel rows of one sector as integers over a common denominator."""
    rows = [kernel.row(lam, *sector) for lam in range(kernel.n_values)]
    d = math.lcm(*(p.denominator for r in rows for p in r))
    return [tuple(int(p * d) for p in r) for r in rows]


def statistics_signature(scaled_rows: Sequence[tuple[int, ...]], d: LatticeDistribution) -> tuple[int, ...]:
    """Integer image of the mixed statistics; equal signatures <=> equal statistics."""
    acc = [0, 0, 0, 0]
    for q, r in zip(d.numerators, scaled_rows):
        if q:
            for k in range(4):
                acc[k] += q * r[k]
    return tuple(acc)


def _check_kernel(kernel: OutcomeKernel, n_values: int) -> None:
    if kernel.n_values != n_values:
        raise ValueError(f"kernel covers {kernel.n_values} hidden values, expected {n_values}")


def count_vj(
    kernel: OutcomeKernel,
    sector: Sector,
    config: LatticeDistribution,
    n_values: int,
    denominator: int,
) -> int:
    """Number of lattice points whose statistics in ``sector`` equal those of ``config``.

    Brute force over every lattice point; ``config`` itself always counts.
    """
    _check_kernel(kernel, n_values)
    if config.n_values != n_values or config.denominator != denominator:
        raise ValueError("configuration does not live on this lattice")
    target = kernel.mix(config.probabilities(), sector)
    return sum(1 for q in enumerate_configurations(n_values, denominator) if kernel.mix(q.probabilities(), sector) == target)


def sector_class_sizes(kernel: OutcomeKernel, sector: Sector, n_values: int, denominator: int) -> list[int]:
    """Sizes of the equal-statistics classes of lattice points in one sector.

    Every point ``j`` of a class of size ``g`` has ``v^j = g``.
    """
    rows = _sector_scale(kernel, sector)
    classes: dict[tuple[int, ...], int] = {}
    for d in enumerate_configurations(n_values, denominator):
        sig = statistics_signature(rows, d)
        classes[sig] = classes.get(sig, 0) + 1
    return sorted(classes.values(), reverse=True)


def vj_values(kernel: OutcomeKernel, sector: Sector, n_values: int, denominator: int) -> list[int]:
    """``v^j`` for every configuration ``j`` in enumeration order."""
    rows = _sector_scale(kernel, sector)
    sigs = [statistics_signature(rows, d) for d in enumerate_configurations(n_values, denominator)]
    sizes: dict[tuple[int, ...], int] = {}
    for s in sigs:
        sizes[s] = sizes.get(s, 0) + 1
    return [sizes[s] for s in sigs]


def required_work(n_values: int, denominator: int) -> int:
    return 4 * count_configurations(n_values, denominator) * n_values


def _log10_sum_pow(class_sizes: Iterable[int], exponent: int, v: int) -> float:
    """``log10(sum_j (v^j / V)^m / V)`` computed stably from class sizes.

    A class of size g contributes g terms of (g/V)^m.
    """
    logs = [math.log10(g) + exponent * (math.log10(g) - math.log10(v)) for g in class_sizes]
    top = max(logs)
    return top + math.log10(math.fsum(10 ** (x - top) for x in logs)) - math.log10(v)


def f_general(
    kernel: OutcomeKernel,
    n_mechanisms: int,
    n_values: int,
    denominator: int,
    budget: int = DEFAULT_BUDGET,
) -> FineTuningReport:
    """Model whose only constraint is equal statistics within each sector.

    Per sector ``sum_j (v^j)^(Omega/4 - 1)`` assignments survive; ``N_f`` is the
    product over the four sectors.
    """
    _check_kernel(kernel, n_values)
    work = required_work(n_values, denominator)
    if work > budget:
        raise BudgetExceeded(work, budget)
    v = count_configurations(n_values, denominator)
    omega = context_count(n_mechanisms)
    m = omega // 4 - 1
    classes = {s: sector_class_sizes(kernel, s, n_values, denominator) for s in SECTORS}

    log_ratio = 0.0
    if v > 1 and m > 0:
        log_ratio = sum(_log10_sum_pow(classes[s], m, v) for s in SECTORS)
    report = FineTuningReport(
        mode="general-bruteforce",
        n_mechanisms=n_mechanisms,
        n_values=n_values,
        denominator=denominator,
        omega=omega,
        v_total=v,
        log10_one_minus_f=log_ratio,
    )
    if _exact_budget_ok(v, omega):
        sums = {s: sum(g ** (m + 1) for g in classes[s]) for s in SECTORS}
        n_f = math.prod(sums.values())
        report.n_f = n_f
        report.f_exact = 1 - Fraction(n_f, v**omega)
        report.sector_sums = {sector_key(s): sums[s] for s in SECTORS}
        if n_f > 0:
            # exact count beats the float path whenever both exist
            # math.log10 takes arbitrarily large ints; N_f == V^Omega gives exactly 0
            report.log10_one_minus_f = math.log10(n_f) - math.log10(v**omega)
    return report


def f_general_limit_study(
    kernel: OutcomeKernel,
    n_values: int,
    denominator: int,
    n_list: Sequence[int],
    budget: int = DEFAULT_BUDGET,
) -> list[tuple[int, float]]:
    """``(N, log10(1 - F))`` rows for growing numbers of mechanisms."""
    return [(n, f_general(kernel, n, n_values, denominator, budget).log10_one_minus_f) for n in n_list]


def f_constrained_lambda_sweep(n_mechanisms: int, denominator: int, lambdas: Sequence[int]) -> list[tuple[int, float]]:
    """``(Lambda, log10(1 - F))`` for the constrained model on a grid of lambda counts."""
    return [(lam, f_constrained(n_mechanisms, lam, denominator).log10_one_minus_f) for lam in lambdas]
