"""Seeded simulation of experimental runs.

Per run: mechanism outputs and choices are drawn from a
:class:`~belllab.scenario.ChoicePrior`, then lambda from the model's table
for the resulting context, then the outcome pair from the kernel.  The draw
order does not change the joint distribution; it is just convenient for
conditioning on the context.

Randomness comes from a Philox counter-based generator.  Run ``r`` always
consumes raw words ``[r*K, (r+1)*K)`` of the stream for its seed, so any range
of runs can be generated independently (and in parallel) with identical
results.
"""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from belllab.models import (
    Model,
    NonlocalModel,
    RetrocausalModel,
    Sector,
    SuperdetModel,
    check_condition_ii,
    check_constraint_m,
)
from belllab.scenario import (
    OUTCOMES,
    SECTORS,
    SETTINGS,
    ChoicePrior,
    Context,
    context_count,
    sector_key,
)

CHUNK = 1 << 16
CSV_COLUMNS = ("run", "alpha", "beta", "gA", "gB", "MA", "MB", "lambda", "OA", "OB")


class NoDependence(ValueError):
    """The model's statistics do not depend on how the settings were chosen."""


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("BELLLAB_THREADS", "1")))
    except ValueError:
        return 1


def _words_per_run(n: int) -> int:
    # alpha (n), beta (n), gamma_A, gamma_B, lambda, outcome; padded to a Philox block
    need = 2 * n + 4
    return -(-need // 4) * 4


def _uniforms(seed: int, start: int, count: int, k: int) -> np.ndarray:
    bg = np.random.Philox(seed)
    # one counter step yields 4 words and k is a multiple of 4
    bg.advance(start * k // 4)
    raw = bg.random_raw(count * k).reshape(count, k)
    return (raw >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


@dataclass
class RunBatch:
    """Columnar run data; row ``i`` is run ``start + i``."""

    n_mechanisms: int
    start: int
    alpha: np.ndarray  # packed bits, first mechanism most significant
    beta: np.ndarray
    gamma_a: np.ndarray  # 1-based
    gamma_b: np.ndarray
    m_a: np.ndarray  # 0 = Mx, 1 = Mz
    m_b: np.ndarray
    lam: np.ndarray
    outcome: np.ndarray  # index into OUTCOMES
    has_sub_ensembles: bool = False

    def __len__(self) -> int:
        return len(self.lam)

    @property
    def context_index(self) -> np.ndarray:
        n = self.n_mechanisms
        g = (self.gamma_a - 1) * n + (self.gamma_b - 1)
        return (g << (2 * n)) | (self.alpha << n) | self.beta

    @property
    def sector_index(self) -> np.ndarray:
        return self.m_a * 2 + self.m_b

    def context(self, i: int) -> Context:
        return Context.from_index(self.n_mechanisms, int(self.context_index[i]))

    def records(self, limit: int | None = None) -> list["RunRecord"]:
        n = self.n_mechanisms
        ctx = self.context_index
        out = []
        for i in range(len(self) if limit is None else min(limit, len(self))):
            c = Context.from_index(n, int(ctx[i]))
            out.append(
                RunRecord(
                    run=self.start + i,
                    context=c,
                    sub_ensemble=c.sub_ensemble if self.has_sub_ensembles else None,
                    lam=int(self.lam[i]),
                    outcomes=OUTCOMES[int(self.outcome[i])],
                )
            )
        return out

    def write_csv(self, fh) -> None:
        n = self.n_mechanisms
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        letters = np.array(["x", "z"])
        a_str = [_bitstring(int(v), n) for v in self.alpha]
        b_str = [_bitstring(int(v), n) for v in self.beta]
        oa = np.array([o[0] for o in OUTCOMES])[self.outcome]
        ob = np.array([o[1] for o in OUTCOMES])[self.outcome]
        ma = letters[self.m_a]
        mb = letters[self.m_b]
        for i in range(len(self)):
            w.writerow(
                (
                    self.start + i,
                    a_str[i],
                    b_str[i],
                    int(self.gamma_a[i]),
                    int(self.gamma_b[i]),
                    "M" + ma[i],
                    "M" + mb[i],
                    int(self.lam[i]),
                    int(oa[i]),
                    int(ob[i]),
                )
            )

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def _bitstring(v: int, n: int) -> str:
    return "".join("z" if (v >> (n - 1 - k)) & 1 else "x" for k in range(n))


@dataclass(frozen=True)
class RunRecord:
    run: int
    context: Context
    sub_ensemble: tuple[int, int] | None
    lam: int
    outcomes: tuple[int, int]


class _Sampler:
    """Precomputed float/integer tables for vectorized sampling."""

    def __init__(self, model: Model, prior: ChoicePrior):
        n = model.n_mechanisms
        if prior.n_mechanisms != n:
            raise ValueError(f"prior has N={prior.n_mechanisms}, model has N={n}")
        self.n = n
        self.k = _words_per_run(n)
        self.mech_a = np.array([float(p) for p in prior.mech_z_a])
        self.mech_b = np.array([float(p) for p in prior.mech_z_b])
        self.choice_a = np.cumsum([float(p) for p in prior.choice_a])
        self.choice_b = np.cumsum([float(p) for p in prior.choice_b])
        self.n_values = model.n_values

        if isinstance(model, SuperdetModel):
            self.mode = "context"
            self.denominator = model.denominator
            cum = np.zeros((context_count(n), model.n_values), dtype=np.int64)
            for c, t in model.tables.items():
                cum[c.index()] = np.cumsum(t.numerators)
            kernel = model.kernel
        elif isinstance(model, RetrocausalModel):
            self.mode = "setting_b"
            self.denominator = model.hidden[SETTINGS[0]].denominator
            cum = np.zeros((2, model.n_values), dtype=np.float64)
            for m in SETTINGS:
                cum[m.bit] = np.cumsum([float(p) for p in model.hidden[m].probabilities()])
            kernel = model.kernel.joint()
        elif isinstance(model, NonlocalModel):
            self.mode = "single"
            self.denominator = model.hidden.denominator
            cum = np.cumsum([float(p) for p in model.hidden.probabilities()])[None, :]
            kernel = model.kernel.joint()
        else:
            raise TypeError(f"unsupported model type {type(model).__name__}")
        self.hidden_cum = cum
        # kernel_cum[lam, m_a, m_b, :] cumulative over OUTCOMES
        kc = np.zeros((model.n_values, 2, 2, 4))
        for lam in range(model.n_values):
            for m_a, m_b in SECTORS:
                kc[lam, m_a.bit, m_b.bit] = np.cumsum([float(p) for p in kernel.row(lam, m_a, m_b)])
        self.kernel_cum = kc

    def sample(self, seed: int, start: int, count: int) -> dict[str, np.ndarray]:
        n = self.n
        u = _uniforms(seed, start, count, self.k)
        a_bits = (u[:, :n] < self.mech_a).astype(np.int64)
        b_bits = (u[:, n : 2 * n] < self.mech_b).astype(np.int64)
        weights = 1 << np.arange(n - 1, -1, -1, dtype=np.int64)
        alpha = a_bits @ weights
        beta = b_bits @ weights
        ga = np.minimum((self.choice_a[None, :] <= u[:, 2 * n, None]).sum(axis=1), n - 1) + 1
        gb = np.minimum((self.choice_b[None, :] <= u[:, 2 * n + 1, None]).sum(axis=1), n - 1) + 1
        rows = np.arange(count)
        m_a = a_bits[rows, ga - 1]
        m_b = b_bits[rows, gb - 1]

        u_lam = u[:, 2 * n + 2]
        if self.mode == "context":
            g = (ga - 1) * n + (gb - 1)
            ctx = (g << (2 * n)) | (alpha << n) | beta
            cum = self.hidden_cum[ctx]
            t = np.floor(u_lam * self.denominator).astype(np.int64)
            lam = (cum <= t[:, None]).sum(axis=1)
        else:
            cum = self.hidden_cum[m_b] if self.mode == "setting_b" else self.hidden_cum[np.zeros(count, dtype=np.int64)]
            lam = (cum <= u_lam[:, None]).sum(axis=1)
        lam = np.minimum(lam, self.n_values - 1)

        kc = self.kernel_cum[lam, m_a, m_b]
        outcome = np.minimum((kc <= u[:, 2 * n + 3, None]).sum(axis=1), 3)
        return dict(alpha=alpha, beta=beta, gamma_a=ga, gamma_b=gb, m_a=m_a, m_b=m_b, lam=lam, outcome=outcome)


def simulate_batch(
    model: Model,
    n_runs: int,
    seed: int,
    prior: ChoicePrior | None = None,
    start: int = 0,
) -> RunBatch:
    """Simulate runs ``start .. start + n_runs - 1`` as columnar arrays."""
    if n_runs < 1:
        raise ValueError("number of runs must be >= 1")
    if prior is None:
        prior = ChoicePrior.uniform(model.n_mechanisms)
    sampler = _Sampler(model, prior)
    bounds = [(s, min(CHUNK, start + n_runs - s)) for s in range(start, start + n_runs, CHUNK)]
    threads = _threads()
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: sampler.sample(seed, *b), bounds))
    else:
        parts = [sampler.sample(seed, *b) for b in bounds]
    cols = {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}
    sub = isinstance(model, SuperdetModel) and check_constraint_m(model)
    return RunBatch(n_mechanisms=model.n_mechanisms, start=start, has_sub_ensembles=sub, **cols)


def simulate(
    model: Model,
    n_runs: int,
    seed: int,
    prior: ChoicePrior | None = None,
) -> list[RunRecord]:
    return simulate_batch(model, n_runs, seed, prior).records()


@dataclass
class EmpiricalTable:
    """Outcome counts keyed by context index and by sector."""

    n_mechanisms: int
    total: int
    by_context: dict[int, np.ndarray] = field(default_factory=dict)
    by_sector: dict[Sector, np.ndarray] = field(default_factory=dict)

    @classmethod
    def from_batch(cls, batch: RunBatch) -> "EmpiricalTable":
        n_ctx = context_count(batch.n_mechanisms)
        flat = np.bincount(batch.context_index * 4 + batch.outcome, minlength=n_ctx * 4).reshape(n_ctx, 4)
        by_context = {int(i): flat[i] for i in np.nonzero(flat.sum(axis=1))[0]}
        sec = np.bincount(batch.sector_index * 4 + batch.outcome, minlength=16).reshape(4, 4)
        by_sector = {(ma, mb): sec[ma.bit * 2 + mb.bit] for ma, mb in SECTORS}
        return cls(batch.n_mechanisms, len(batch), by_context, by_sector)

    def frequencies(self, sector: Sector) -> np.ndarray:
        c = self.by_sector[sector]
        total = c.sum()
        return c / total if total else np.zeros(4)


@dataclass
class BandCheck:
    sector: Sector
    outcome: tuple[int, int]
    visits: int
    frequency: float
    expected: float
    sigma: float
    within: bool


def sector_band_check(
    table: EmpiricalTable,
    analytic: dict[Sector, tuple[Fraction, ...]],
    n_sigma: float = 4.0,
) -> list[BandCheck]:
    """Compare sector frequencies with analytic values using binomial sigma bands."""
    out = []
    for sector in SECTORS:
        counts = table.by_sector[sector]
        visits = int(counts.sum())
        for k, outcome in enumerate(OUTCOMES):
            p = float(analytic[sector][k])
            f = counts[k] / visits if visits else 0.0
            sigma = math.sqrt(p * (1 - p) / visits) if visits else 0.0
            within = abs(f - p) <= n_sigma * sigma + 1e-12
            out.append(BandCheck(sector, outcome, visits, float(f), p, sigma, bool(within)))
    return out


def mechanism_dependence_demo(
    model: Model,
    n_runs: int,
    seed: int,
    z_threshold: float = 5.0,
) -> dict:
    """Show that two same-sector contexts yield different outcome frequencies.

    ``n_runs`` runs are simulated in each of the two contexts of the first
    witness pair; the outcome with the largest analytic gap is tested with a
    two-proportion z statistic.
    """
    report = check_condition_ii(model, max_witnesses=1)
    if report.holds:
        raise NoDependence("no dependence to demonstrate: statistics depend only on the settings")
    c1, c2 = report.witnesses[0]
    s1, s2 = model.statistics(c1), model.statistics(c2)
    k = max(range(4), key=lambda i: abs(s1[i] - s2[i]))
    # second group reads a disjoint range of the same counter stream
    b1 = simulate_batch(model, n_runs, seed, ChoicePrior.point(c1), start=0)
    b2 = simulate_batch(model, n_runs, seed, ChoicePrior.point(c2), start=n_runs)
    f1 = float(np.mean(b1.outcome == k))
    f2 = float(np.mean(b2.outcome == k))
    pooled = (f1 + f2) / 2
    se = math.sqrt(pooled * (1 - pooled) * 2 / n_runs)
    z = (f1 - f2) / se if se > 0 else 0.0
    return {
        "sector": sector_key(c1.settings),
        "contexts": [c1.to_dict(), c2.to_dict()],
        "outcome": list(OUTCOMES[k]),
        "analytic": [str(s1[k]), str(s2[k])],
        "analytic_gap": str(abs(s1[k] - s2[k])),
        "empirical": [f1, f2],
        "runs_per_context": n_runs,
        "z": z,
        "z_threshold": z_threshold,
        "detected": abs(z) > z_threshold,
    }
