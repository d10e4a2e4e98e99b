"""Superdeterministic, retrocausal and nonlocal models of the scenario.

Every model produces exact rational measurement statistics per context, as a
4-tuple of :class:`~fractions.Fraction` indexed like
:data:`belllab.scenario.OUTCOMES`.

Superdeterministic models carry one hidden-variable table per context.
Retrocausal and nonlocal models only ever see the induced settings, which is
why they never need tuning across setting mechanisms.
"""
from __future__ import annotations

import random
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence, Union

from belllab.scenario import (
    MX,
    MZ,
    OUTCOMES,
    SECTORS,
    SETTINGS,
    ChoicePrior,
    Context,
    Setting,
    context_count,
    contexts_by_settings,
    enumerate_contexts,
    induced_settings,
)
from belllab.simplex import LatticeDistribution, count_configurations, unrank

Stats = tuple[Fraction, Fraction, Fraction, Fraction]
Sector = tuple[Setting, Setting]

ONE = Fraction(1)
ZERO = Fraction(0)


class ModelError(ValueError):
    """Model components are inconsistent with each other."""


def _point(outcome: tuple[int, int]) -> Stats:
    return tuple(ONE if o == outcome else ZERO for o in OUTCOMES)  # type: ignore[return-value]


def _check_distribution(probs: Sequence[Fraction], what: str) -> None:
    if any(p < 0 for p in probs) or sum(probs) != 1:
        raise ModelError(f"{what} is not a probability distribution: {[str(p) for p in probs]}")


# ---------------------------------------------------------------------------
# kernels


@dataclass(frozen=True)
class OutcomeKernel:
    """``p(O_A, O_B | lambda, M_A, M_B)`` as exact rationals.

    ``rows[lam][sector]`` is a 4-tuple over :data:`OUTCOMES`.
    """

    rows: tuple[Mapping[Sector, Stats], ...]
    name: str | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        rows = []
        for lam, row in enumerate(self.rows):
            fixed = {}
            for sector in SECTORS:
                if sector not in row:
                    raise ModelError(f"kernel row {lam} lacks sector {sector}")
                probs = tuple(Fraction(p) for p in row[sector])
                if len(probs) != 4:
                    raise ModelError(f"kernel row {lam} sector {sector} must have 4 entries")
                _check_distribution(probs, f"kernel row {lam}, sector {sector}")
                fixed[sector] = probs
            rows.append(fixed)
        if not rows:
            raise ModelError("kernel needs at least one hidden-variable value")
        object.__setattr__(self, "rows", tuple(rows))

    @property
    def n_values(self) -> int:
        return len(self.rows)

    def row(self, lam: int, m_a: Setting, m_b: Setting) -> Stats:
        return self.rows[lam][(m_a, m_b)]

    def mix(self, weights: Sequence[Fraction], sector: Sector) -> Stats:
        """Sum over lambda of kernel row times ``weights[lambda]``."""
        if len(weights) != self.n_values:
            raise ModelError(f"distribution over {len(weights)} values, kernel has {self.n_values}")
        acc = [ZERO, ZERO, ZERO, ZERO]
        for w, row in zip(weights, self.rows):
            if w:
                r = row[sector]
                for k in range(4):
                    acc[k] += w * r[k]
        return tuple(acc)  # type: ignore[return-value]

    def to_dict(self) -> dict | str:
        if self.name is not None:
            return self.name
        return {
            "rows": [
                {s[0].value + s[1].value: [str(p) for p in row[s]] for s in SECTORS} for row in self.rows
            ]
        }

    @classmethod
    def from_dict(cls, obj: dict | str, n_values: int | None = None) -> "OutcomeKernel":
        if isinstance(obj, str):
            if n_values is None:
                raise ModelError("named kernel needs the number of hidden-variable values")
            return named_kernel(obj, n_values)
        rows = []
        for row in obj["rows"]:
            rows.append({(Setting(k[0]), Setting(k[1])): tuple(Fraction(p) for p in v) for k, v in row.items()})
        return cls(tuple(rows))

    @classmethod
    def deterministic(cls, outcomes: Sequence[tuple[int, int]], name: str | None = None) -> "OutcomeKernel":
        """Each lambda fixes the outcome pair regardless of settings."""
        return cls(tuple({s: _point(o) for s in SECTORS} for o in outcomes), name=name)


# lambda -> outcome assignment for the injective family; lambda=0,1 give perfectly
# correlated pairs so the two-valued case reads as (+1,+1) vs (-1,-1)
_INJECTIVE_ORDER = ((1, 1), (-1, -1), (1, -1), (-1, 1))


def injective_kernel(n_values: int) -> OutcomeKernel:
    """Deterministic kernel with distinct outcomes per lambda (needs 1 <= n_values <= 4)."""
    if not 1 <= n_values <= 4:
        raise ModelError(f"an injective kernel over 4 outcomes needs 1..4 hidden values, got {n_values}")
    return OutcomeKernel.deterministic(_INJECTIVE_ORDER[:n_values], name="injective")


def readout_kernel(n_values: int = 4) -> OutcomeKernel:
    """Default demo kernel: lambda = (a, b) in OUTCOMES order, O_A = a, O_B = b."""
    if n_values != 4:
        raise ModelError(f"readout kernel has exactly 4 hidden values, got {n_values}")
    return OutcomeKernel.deterministic(OUTCOMES, name="readout")


def constant_kernel(n_values: int) -> OutcomeKernel:
    """Uniform outcomes for every lambda; statistics carry no trace of lambda."""
    u = (Fraction(1, 4),) * 4
    return OutcomeKernel(tuple({s: u for s in SECTORS} for _ in range(n_values)), name="constant")


def parity_kernel(n_values: int) -> OutcomeKernel:
    """Even lambda gives (+1,+1), odd gives (-1,-1): a many-to-one kernel."""
    return OutcomeKernel.deterministic([(1, 1) if lam % 2 == 0 else (-1, -1) for lam in range(n_values)], name="parity")


KERNELS = {
    "injective": injective_kernel,
    "readout": readout_kernel,
    "constant": constant_kernel,
    "parity": parity_kernel,
}


def named_kernel(name: str, n_values: int) -> OutcomeKernel:
    try:
        factory = KERNELS[name]
    except KeyError:
        raise ModelError(f"unknown kernel {name!r}; choose from {sorted(KERNELS)}") from None
    return factory(n_values)


def _random_distribution(rng: random.Random, size: int, resolution: int) -> tuple[Fraction, ...]:
    weights = [rng.randint(0, resolution) for _ in range(size)]
    if not any(weights):
        weights[rng.randrange(size)] = 1
    total = sum(weights)
    return tuple(Fraction(w, total) for w in weights)


def random_kernel(n_values: int, rng: random.Random, resolution: int = 6) -> OutcomeKernel:
    return OutcomeKernel(tuple({s: _random_distribution(rng, 4, resolution) for s in SECTORS} for _ in range(n_values)))


@dataclass(frozen=True)
class FactorizedKernel:
    """``p(O_A | lambda, M_A, M_B) p(O_B | lambda, M_B)``.

    ``wing_a[lam][(M_A, M_B)]`` and ``wing_b[lam][M_B]`` are ``(p(+1), p(-1))``.
    A local kernel (retrocausal models) has ``wing_a`` independent of ``M_B``.
    """

    wing_a: tuple[Mapping[Sector, tuple[Fraction, Fraction]], ...]
    wing_b: tuple[Mapping[Setting, tuple[Fraction, Fraction]], ...]

    def __post_init__(self) -> None:
        if len(self.wing_a) != len(self.wing_b) or not self.wing_a:
            raise ModelError("wing tables must cover the same nonzero number of hidden values")
        a_rows, b_rows = [], []
        for lam, (ra, rb) in enumerate(zip(self.wing_a, self.wing_b)):
            fa = {s: tuple(Fraction(p) for p in ra[s]) for s in SECTORS}
            fb = {m: tuple(Fraction(p) for p in rb[m]) for m in SETTINGS}
            for s, probs in fa.items():
                _check_distribution(probs, f"wing A row {lam}, settings {s}")
            for m, probs in fb.items():
                _check_distribution(probs, f"wing B row {lam}, setting {m}")
            a_rows.append(fa)
            b_rows.append(fb)
        object.__setattr__(self, "wing_a", tuple(a_rows))
        object.__setattr__(self, "wing_b", tuple(b_rows))

    @property
    def n_values(self) -> int:
        return len(self.wing_a)

    @property
    def is_local(self) -> bool:
        return all(row[(ma, MX)] == row[(ma, MZ)] for row in self.wing_a for ma in SETTINGS)

    @classmethod
    def local(cls, wing_a: Sequence[Mapping[Setting, tuple]], wing_b: Sequence[Mapping[Setting, tuple]]) -> "FactorizedKernel":
        return cls(tuple({(ma, mb): row[ma] for ma, mb in SECTORS} for row in wing_a), tuple(wing_b))

    def row(self, lam: int, m_a: Setting, m_b: Setting) -> Stats:
        pa = self.wing_a[lam][(m_a, m_b)]
        pb = self.wing_b[lam][m_b]
        return (pa[0] * pb[0], pa[0] * pb[1], pa[1] * pb[0], pa[1] * pb[1])

    def joint(self) -> OutcomeKernel:
        return OutcomeKernel(tuple({s: self.row(lam, *s) for s in SECTORS} for lam in range(self.n_values)))

    def to_dict(self) -> dict:
        return {
            "A": [{s[0].value + s[1].value: [str(p) for p in row[s]] for s in SECTORS} for row in self.wing_a],
            "B": [{m.value: [str(p) for p in row[m]] for m in SETTINGS} for row in self.wing_b],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "FactorizedKernel":
        a = [{(Setting(k[0]), Setting(k[1])): tuple(Fraction(p) for p in v) for k, v in row.items()} for row in obj["A"]]
        b = [{Setting(k): tuple(Fraction(p) for p in v) for k, v in row.items()} for row in obj["B"]]
        return cls(tuple(a), tuple(b))


def random_factorized_kernel(n_values: int, rng: random.Random, local: bool, resolution: int = 6) -> FactorizedKernel:
    b = [{m: _random_distribution(rng, 2, resolution) for m in SETTINGS} for _ in range(n_values)]
    if local:
        a = [{m: _random_distribution(rng, 2, resolution) for m in SETTINGS} for _ in range(n_values)]
        return FactorizedKernel.local(a, b)
    a2 = [{s: _random_distribution(rng, 2, resolution) for s in SECTORS} for _ in range(n_values)]
    return FactorizedKernel(tuple(a2), tuple(b))


# ---------------------------------------------------------------------------
# models


def _check_table(table: LatticeDistribution, n_values: int, what: str) -> None:
    if table.n_values != n_values:
        raise ModelError(f"{what} covers {table.n_values} hidden values, kernel has {n_values}")


@dataclass(frozen=True)
class SuperdetModel:
    """One hidden-variable table ``p(lambda | alpha, gamma_A, beta, gamma_B)`` per context.

    The table never sees (M_A, M_B) except through the context, so type I and
    type II models share this representation.
    """

    n_values: int
    n_mechanisms: int
    kernel: OutcomeKernel
    tables: Mapping[Context, LatticeDistribution]

    model_class = "superdeterministic"

    def __post_init__(self) -> None:
        if self.kernel.n_values != self.n_values:
            raise ModelError(f"kernel covers {self.kernel.n_values} hidden values, model declares {self.n_values}")
        expected = context_count(self.n_mechanisms)
        if len(self.tables) != expected:
            raise ModelError(f"model needs {expected} context tables, got {len(self.tables)}")
        denominators = set()
        for c, t in self.tables.items():
            if c.n_mechanisms != self.n_mechanisms:
                raise ModelError(f"context {c.to_json()} does not have N={self.n_mechanisms}")
            _check_table(t, self.n_values, f"table for {c.to_json()}")
            denominators.add(t.denominator)
        if len(denominators) > 1:
            raise ModelError(f"tables use several lattice denominators: {sorted(denominators)}")
        object.__setattr__(self, "_cache", {})

    @property
    def denominator(self) -> int:
        return next(iter(self.tables.values())).denominator

    def table(self, c: Context) -> LatticeDistribution:
        try:
            return self.tables[c]
        except KeyError:
            raise ModelError(f"no table for context {c.to_json()}") from None

    def statistics(self, c: Context) -> Stats:
        if c.n_mechanisms != self.n_mechanisms:
            raise ModelError(f"context has N={c.n_mechanisms}, model has N={self.n_mechanisms}")
        sector = induced_settings(c)
        table = self.table(c)
        key = (table, sector)
        cache = self._cache  # type: ignore[attr-defined]
        if key not in cache:
            cache[key] = self.kernel.mix(table.probabilities(), sector)
        return cache[key]


@dataclass(frozen=True)
class RetrocausalModel:
    """``p(O_A|lambda,M_A) p(O_B|lambda,M_B) p(lambda|M_B)``; settings reach lambda only via M_B."""

    n_values: int
    n_mechanisms: int
    kernel: FactorizedKernel
    hidden: Mapping[Setting, LatticeDistribution]

    model_class = "retrocausal"

    def __post_init__(self) -> None:
        if self.kernel.n_values != self.n_values:
            raise ModelError("kernel and model disagree on the number of hidden values")
        if not self.kernel.is_local:
            raise ModelError("retrocausal kernel at wing A must not depend on M_B")
        for m in SETTINGS:
            if m not in self.hidden:
                raise ModelError(f"missing p(lambda | M_B={m})")
            _check_table(self.hidden[m], self.n_values, f"p(lambda | M_B={m})")

    def statistics(self, c: Context) -> Stats:
        return self.sector_statistics(*induced_settings(c))

    def sector_statistics(self, m_a: Setting, m_b: Setting) -> Stats:
        return _mix_factorized(self.kernel, self.hidden[m_b].probabilities(), m_a, m_b)


@dataclass(frozen=True)
class NonlocalModel:
    """``p(O_A|lambda,M_A,M_B) p(O_B|lambda,M_B) p(lambda)``; M_B acts on O_A directly."""

    n_values: int
    n_mechanisms: int
    kernel: FactorizedKernel
    hidden: LatticeDistribution

    model_class = "nonlocal"

    def __post_init__(self) -> None:
        if self.kernel.n_values != self.n_values:
            raise ModelError("kernel and model disagree on the number of hidden values")
        _check_table(self.hidden, self.n_values, "p(lambda)")

    def statistics(self, c: Context) -> Stats:
        return self.sector_statistics(*induced_settings(c))

    def sector_statistics(self, m_a: Setting, m_b: Setting) -> Stats:
        return _mix_factorized(self.kernel, self.hidden.probabilities(), m_a, m_b)


Model = Union[SuperdetModel, RetrocausalModel, NonlocalModel]


def _mix_factorized(kernel: FactorizedKernel, weights: Sequence[Fraction], m_a: Setting, m_b: Setting) -> Stats:
    acc = [ZERO, ZERO, ZERO, ZERO]
    for lam, w in enumerate(weights):
        if w:
            r = kernel.row(lam, m_a, m_b)
            for k in range(4):
                acc[k] += w * r[k]
    return tuple(acc)  # type: ignore[return-value]


def statistics(model: Model, c: Context) -> dict[tuple[int, int], Fraction]:
    """Exact ``p(O_A, O_B | context)`` keyed by outcome pair."""
    return dict(zip(OUTCOMES, model.statistics(c)))


# ---------------------------------------------------------------------------
# constraint checks


@dataclass
class ConditionReport:
    holds: bool
    witnesses: list[tuple[Context, Context]]
    n_violating_sectors: int = 0


def same_sector_groups(model: Model) -> dict[Sector, dict[Stats, list[Context]]]:
    """Contexts of each sector grouped by their exact statistics."""
    out: dict[Sector, dict[Stats, list[Context]]] = {}
    for sector, members in contexts_by_settings(model.n_mechanisms).items():
        groups: dict[Stats, list[Context]] = defaultdict(list)
        for c in members:
            groups[model.statistics(c)].append(c)
        out[sector] = dict(groups)
    return out


def check_condition_ii(model: Model, max_witnesses: int = 10) -> ConditionReport:
    """Do same-sector contexts all give identical statistics?

    Witnesses pair the first context of the largest group in a sector with
    contexts whose statistics differ from it.
    """
    witnesses: list[tuple[Context, Context]] = []
    bad = 0
    for groups in same_sector_groups(model).values():
        if len(groups) <= 1:
            continue
        bad += 1
        ordered = sorted(groups.values(), key=len, reverse=True)
        ref = ordered[0][0]
        for g in ordered[1:]:
            for c in g:
                if len(witnesses) < max_witnesses:
                    witnesses.append((ref, c))
    return ConditionReport(holds=bad == 0, witnesses=witnesses, n_violating_sectors=bad)


def _all_equal_within(model: SuperdetModel, key) -> bool:
    seen: dict = {}
    for c, t in model.tables.items():
        k = key(c)
        if seen.setdefault(k, t) != t:
            return False
    return True


def check_constraint_m(model: SuperdetModel) -> bool:
    """Tables depend only on the chosen mechanisms and their outputs."""
    return _all_equal_within(model, lambda c: (c.gamma_a, c.gamma_b) + induced_settings(c))


def check_constraint_n(model: SuperdetModel) -> bool:
    """Tables depend only on the induced settings (which implies constraint m)."""
    return _all_equal_within(model, induced_settings)


def make_constrained(
    n_values: int,
    n_mechanisms: int,
    sector_tables: Mapping[Sector, LatticeDistribution],
    kernel: OutcomeKernel,
) -> SuperdetModel:
    """Literature-style model: a single table per (M_A, M_B), shared by every context."""
    missing = [s for s in SECTORS if s not in sector_tables]
    if missing:
        raise ModelError(f"missing sector tables for {missing}")
    tables = {c: sector_tables[induced_settings(c)] for c in enumerate_contexts(n_mechanisms)}
    return SuperdetModel(n_values, n_mechanisms, kernel, tables)


def random_superdet(
    n_values: int, denominator: int, n_mechanisms: int, kernel: OutcomeKernel, rng: random.Random
) -> SuperdetModel:
    """Tables drawn independently and uniformly from the lattice points."""
    v = count_configurations(n_values, denominator)
    tables = {c: unrank(n_values, denominator, rng.randrange(v)) for c in enumerate_contexts(n_mechanisms)}
    return SuperdetModel(n_values, n_mechanisms, kernel, tables)


def random_table(n_values: int, denominator: int, rng: random.Random) -> LatticeDistribution:
    """A lattice point drawn uniformly."""
    return unrank(n_values, denominator, rng.randrange(count_configurations(n_values, denominator)))


def random_sector_tables(n_values: int, denominator: int, rng: random.Random) -> dict[Sector, LatticeDistribution]:
    return {s: random_table(n_values, denominator, rng) for s in SECTORS}


# ---------------------------------------------------------------------------
# reduction


@dataclass(frozen=True)
class ReducedModel:
    """Parameters left after summing the mechanism outputs and choices out.

    ``hidden`` maps M_B to ``p(lambda|M_B)`` (retrocausal) or holds the single
    key ``None`` for ``p(lambda)`` (nonlocal).
    """

    model_class: str
    outcome_a: Mapping[Sector, tuple[tuple[Fraction, Fraction], ...]]
    outcome_b: Mapping[Setting, tuple[tuple[Fraction, Fraction], ...]]
    hidden: Mapping[Setting | None, tuple[Fraction, ...]]
    setting_a: Mapping[Setting, Fraction]
    setting_b: Mapping[Setting, Fraction]

    def _hidden(self, m_b: Setting) -> tuple[Fraction, ...]:
        return self.hidden[m_b] if m_b in self.hidden else self.hidden[None]

    def statistics(self, m_a: Setting, m_b: Setting) -> Stats:
        acc = [ZERO, ZERO, ZERO, ZERO]
        pa_rows = self.outcome_a[(m_a, m_b)]
        pb_rows = self.outcome_b[m_b]
        for w, pa, pb in zip(self._hidden(m_b), pa_rows, pb_rows):
            acc[0] += w * pa[0] * pb[0]
            acc[1] += w * pa[0] * pb[1]
            acc[2] += w * pa[1] * pb[0]
            acc[3] += w * pa[1] * pb[1]
        return tuple(acc)  # type: ignore[return-value]

    def joint(self, m_a: Setting, m_b: Setting) -> Stats:
        """``p(O_A, O_B, M_A, M_B)`` of the reduced model."""
        w = self.setting_a[m_a] * self.setting_b[m_b]
        return tuple(w * p for p in self.statistics(m_a, m_b))  # type: ignore[return-value]


def reduce(model: RetrocausalModel | NonlocalModel, prior: ChoicePrior | None = None) -> ReducedModel:
    """Sum out the setting mechanisms and choices.

    Only ``p(M_A)`` and ``p(M_B)`` pick up anything from the summation; the
    outcome and hidden-variable factors never depended on those variables.
    """
    if isinstance(model, SuperdetModel):
        raise ModelError("superdeterministic tables depend on the mechanisms and cannot be summed out")
    if prior is None:
        prior = ChoicePrior.uniform(model.n_mechanisms)
    k = model.kernel
    outcome_a = {s: tuple(k.wing_a[lam][s] for lam in range(k.n_values)) for s in SECTORS}
    outcome_b = {m: tuple(k.wing_b[lam][m] for lam in range(k.n_values)) for m in SETTINGS}
    if isinstance(model, RetrocausalModel):
        hidden = {m: model.hidden[m].probabilities() for m in SETTINGS}
    else:
        hidden = {None: model.hidden.probabilities()}
    return ReducedModel(
        model_class=model.model_class,
        outcome_a=outcome_a,
        outcome_b=outcome_b,
        hidden=hidden,
        setting_a=prior.setting_marginal("A"),
        setting_b=prior.setting_marginal("B"),
    )


def full_joint(model: RetrocausalModel | NonlocalModel, prior: ChoicePrior, m_a: Setting, m_b: Setting) -> Stats:
    """``p(O_A, O_B, M_A, M_B)`` by brute-force summation over every context."""
    acc = [ZERO, ZERO, ZERO, ZERO]
    for c in enumerate_contexts(model.n_mechanisms):
        if induced_settings(c) != (m_a, m_b):
            continue
        w = prior.probability(c)
        if w:
            for i, p in enumerate(model.statistics(c)):
                acc[i] += w * p
    return tuple(acc)  # type: ignore[return-value]


def analytic_sector_statistics(model: Model, prior: ChoicePrior) -> dict[Sector, Stats]:
    """``p(O_A, O_B | M_A, M_B)`` averaging contexts by their prior weight within a sector."""
    out = {}
    for sector, members in contexts_by_settings(model.n_mechanisms).items():
        weights = [(prior.probability(c), c) for c in members]
        total = sum(w for w, _ in weights)
        if total == 0:
            continue
        acc = [ZERO, ZERO, ZERO, ZERO]
        for w, c in weights:
            if w:
                for i, p in enumerate(model.statistics(c)):
                    acc[i] += w * p
        out[sector] = tuple(a / total for a in acc)
    return out  # type: ignore[return-value]


def max_same_sector_gap(model: Model) -> Fraction:
    """Largest absolute difference of any outcome probability between same-sector contexts."""
    gap = ZERO
    for groups in same_sector_groups(model).values():
        stats = list(groups)
        for k in range(4):
            vals = [s[k] for s in stats]
            gap = max(gap, max(vals) - min(vals))
    return gap
