"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (printed immediately and repeated in the
terminal summary) before asserting, so a run shows all ten verdicts.
"""
import math
import random
import time
from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from belllab.cli import main
from belllab.entropy import SequencePrior, entropy_drop, mutual_information_vs_reference, verify_coincidence
from belllab.files import load_model
from belllab.finetune import f_constrained, f_general, vj_values
from belllab.models import (
    NonlocalModel,
    RetrocausalModel,
    SuperdetModel,
    analytic_sector_statistics,
    check_condition_ii,
    check_constraint_m,
    check_constraint_n,
    constant_kernel,
    injective_kernel,
    make_constrained,
    random_factorized_kernel,
    random_kernel,
    random_sector_tables,
    random_superdet,
    random_table,
    readout_kernel,
)
from belllab.montecarlo import EmpiricalTable, sector_band_check, simulate, simulate_batch
from belllab.scenario import SECTORS, SETTINGS, ChoicePrior, context_count, contexts_by_settings, enumerate_contexts, induced_settings
from belllab.simplex import count_configurations, enumerate_configurations

pytestmark = pytest.mark.acceptance


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def test_criterion_01_lattice_count(criterion):
    with Timer() as t:
        mismatches = [
            (lam, L)
            for lam in range(1, 7)
            for L in range(1, 9)
            if count_configurations(lam, L) != sum(1 for _ in enumerate_configurations(lam, L))
        ]
    ok = not mismatches and t.elapsed < 1.0
    criterion("criterion 1 (V = enumeration length, lambda<=6, L<=8)", ok, f"mismatches={mismatches} time={t.elapsed:.3f}s")
    assert ok


def test_criterion_02_context_count(criterion):
    with Timer() as t:
        results = {}
        for n in range(1, 5):
            ctxs = list(enumerate_contexts(n))
            results[n] = (len(ctxs), len(set(ctxs)), context_count(n), n * n * 2 ** (2 * n))
    ok = all(a == b == c == d for a, b, c, d in results.values()) and t.elapsed < 1.0
    criterion("criterion 2 (context count N^2 2^(2N), N<=4)", ok, f"{ {n: r[0] for n, r in results.items()} } time={t.elapsed:.3f}s")
    assert ok


def test_criterion_03_constrained_fine_tuning(criterion):
    with Timer() as t:
        n1_zero = all(f_constrained(1, lam, L).f_exact == 0 for lam in range(1, 6) for L in range(1, 6))
        exact_ok, checked = True, 0
        for n in (2, 3):
            omega = context_count(n)
            for lam, L in product(range(1, 6), range(1, 6)):
                v = count_configurations(lam, L)
                if (omega - 4) * math.log10(v) >= 1e4:
                    continue
                rep = f_constrained(n, lam, L)
                checked += 1
                exact_ok &= rep.f_exact == 1 - Fraction(1, v ** (omega - 4))
        logs = [f_constrained(2, lam, 2).log10_one_minus_f for lam in range(1, 13)]
        decreasing = all(a > b for a, b in zip(logs[1:], logs[2:])) and logs[0] == 0 > logs[1]
    ok = n1_zero and exact_ok and checked > 0 and decreasing and t.elapsed < 5.0
    criterion(
        "criterion 3 (constrained F: N=1 zero, exact N=2,3, decreasing in lambda)",
        ok,
        f"n1_zero={n1_zero} exact={exact_ok} ({checked} cases) decreasing={decreasing} time={t.elapsed:.2f}s",
    )
    assert ok


def test_criterion_04_general_oracle(criterion):
    # two contexts per sector: count agreeing (d1, d2) pairs directly
    kernel = injective_kernel(2)
    with Timer() as t:
        rows = []
        for L in (1, 2):
            pts = list(enumerate_configurations(2, L))
            for s in SECTORS:
                stats = [kernel.mix(p.probabilities(), s) for p in pts]
                direct = sum(1 for a, b in product(range(len(pts)), repeat=2) if stats[a] == stats[b])
                formula = sum(v ** (2 - 1) for v in vj_values(kernel, s, 2, L))
                rows.append((L, s, direct, formula))
    ok = all(d == f for _, _, d, f in rows) and t.elapsed < 10.0
    criterion(
        "criterion 4 (general-model oracle, 2 contexts/sector, injective, L in {1,2})",
        ok,
        f"pairs={[d for *_, d, _ in rows]} time={t.elapsed:.2f}s",
    )
    assert ok


def test_criterion_05_general_limits(criterion):
    with Timer() as t:
        const_zero = all(
            f_general(constant_kernel(lam), n, lam, L).f_exact == 0
            for n in (1, 2, 3)
            for lam, L in ((1, 1), (2, 2), (3, 2), (4, 3))
        )
        rep2 = f_general(injective_kernel(2), 2, 2, 1)
        target = math.log10(16) - 64 * math.log10(2)
        exact_16 = rep2.f_exact == 1 - Fraction(16, 2**64)
        close = abs(rep2.log10_one_minus_f - target) <= 1e-6
        logs = [f_general(injective_kernel(2), n, 2, 1).log10_one_minus_f for n in (2, 3, 4)]
        decreasing = logs[0] > logs[1] > logs[2]
    ok = const_zero and exact_16 and close and decreasing and t.elapsed < 30.0
    criterion(
        "criterion 5 (general-model limits)",
        ok,
        f"constant_zero={const_zero} log10(1-F)@N=2={rep2.log10_one_minus_f:.6f} (target {target:.6f}) "
        f"N=2,3,4 -> {[round(x, 3) for x in logs]} time={t.elapsed:.2f}s",
    )
    assert ok


def test_criterion_06_entropy(criterion):
    with Timer() as t:
        worst = 0.0
        cases = 0
        for n in range(1, 9):
            for n0 in range(1, 4):
                w = n ** (2 * n0)
                if w > 2**20:
                    continue
                p = np.full(w, 1.0 / w)
                oracle = math.fsum(p * np.log2(p))  # = -S, the drop
                worst = max(worst, abs(entropy_drop(SequencePrior.uniform(n, n0)) - oracle))
                worst = max(worst, abs(-2 * n0 * math.log2(n) - oracle))
                cases += 1
        mi, ratio = mutual_information_vs_reference(16, 0.08)
    ok = worst <= 1e-12 and mi == 8 and abs(ratio - 100) <= 0.5 and t.elapsed < 5.0
    criterion(
        "criterion 6 (entropy drop vs dense oracle; N=16 MI ratio)",
        ok,
        f"cases={cases} worst_err={worst:.2e} MI={mi} ratio={ratio:.3f} time={t.elapsed:.2f}s",
    )
    assert ok


def test_criterion_07_model_class_separation(criterion):
    rng = random.Random(2024)
    with Timer() as t:
        equal = True
        for i in range(20):
            n = 2 + i % 2
            lam = rng.randint(1, 4)
            L = rng.randint(1, 6)
            if i % 4 < 2:
                fk = random_factorized_kernel(lam, rng, local=True)
                model = RetrocausalModel(lam, n, fk, {m: random_table(lam, L, rng) for m in SETTINGS})
            else:
                fk = random_factorized_kernel(lam, rng, local=False)
                model = NonlocalModel(lam, n, fk, random_table(lam, L, rng))
            for members in contexts_by_settings(n).values():
                first = model.statistics(members[0])
                equal &= all(model.statistics(c) == first for c in members)
        kernel = injective_kernel(2)
        passing = sum(check_condition_ii(random_superdet(2, 4, 2, kernel, rng)).holds for _ in range(1000))
    ok = equal and passing / 1000 < 0.01 and t.elapsed < 60.0
    criterion(
        "criterion 7 (retro/nonlocal equal within sectors; random superdet fails)",
        ok,
        f"retro/nonlocal_equal={equal} superdet_pass_fraction={passing / 1000:.3f} time={t.elapsed:.2f}s",
    )
    assert ok


def test_criterion_08_constrained_guarantee(criterion):
    rng = random.Random(8)
    with Timer() as t:
        failures = 0
        for _ in range(100):
            lam, L, n = rng.randint(1, 4), rng.randint(1, 6), rng.randint(1, 3)
            model = make_constrained(lam, n, random_sector_tables(lam, L, rng), random_kernel(lam, rng))
            if not (check_constraint_m(model) and check_constraint_n(model) and check_condition_ii(model).holds):
                failures += 1
    ok = failures == 0 and t.elapsed < 10.0
    criterion("criterion 8 (make_constrained passes m, n, ii on 100 draws)", ok, f"failures={failures} time={t.elapsed:.2f}s")
    assert ok


def test_criterion_09_simulation_convergence(criterion, tmp_path, capsys):
    path = tmp_path / "default.json"
    assert main(["make-model", "--kind", "constrained", "--out", str(path)]) == 0
    capsys.readouterr()
    model, _ = load_model(path)
    analytic = analytic_sector_statistics(model, ChoicePrior.uniform(model.n_mechanisms))
    with Timer() as t:
        within = total = 0
        for seed in range(20):
            batch = simulate_batch(model, 100_000, seed)
            checks = sector_band_check(EmpiricalTable.from_batch(batch), analytic, 4.0)
            within += sum(c.within for c in checks)
            total += len(checks)
        rerun_a = simulate_batch(model, 100_000, 123).to_csv().encode()
        rerun_b = simulate_batch(model, 100_000, 123).to_csv().encode()
    identical = rerun_a == rerun_b
    ok = within / total >= 0.95 and identical and t.elapsed < 60.0
    criterion(
        "criterion 9 (4-sigma bands over 20 seeds, N0=1e5; byte-identical rerun)",
        ok,
        f"within={within}/{total} ({within / total:.3f}) identical={identical} time={t.elapsed:.2f}s",
    )
    assert ok


def _random_m_model(rng, n):
    """Tables keyed by (gamma_A, gamma_B, M_A, M_B): satisfies constraint m but not n."""
    lam, L = rng.randint(2, 4), rng.randint(1, 5)
    by_key = {}
    tables = {}
    for c in enumerate_contexts(n):
        key = c.sub_ensemble + induced_settings(c)
        if key not in by_key:
            by_key[key] = random_table(lam, L, rng)
        tables[c] = by_key[key]
    return SuperdetModel(lam, n, random_kernel(lam, rng), tables)


def test_criterion_10_coincidence(criterion, tmp_path, capsys):
    rng = random.Random(10)
    demo = tmp_path / "demo.json"
    assert main(["make-model", "--kind", "demo", "--n", "3", "--out", str(demo)]) == 0
    capsys.readouterr()
    with Timer() as t:
        models = [load_model(demo)[0]]
        models += [_random_m_model(rng, 2 + i % 2) for i in range(10)]
        models += [make_constrained(4, 3, random_sector_tables(4, 3, rng), readout_kernel())]
        all_m = all(check_constraint_m(m) for m in models)
        violations = runs = 0
        for i, model in enumerate(models):
            records = simulate(model, 2000, seed=i)
            report = verify_coincidence(model, [(r.context, r.sub_ensemble) for r in records])
            violations += len(report.violations)
            runs += len(records)
    ok = all_m and violations == 0 and t.elapsed < 5.0
    criterion(
        "criterion 10 (sub-ensemble equals (gamma_A, gamma_B) in every run)",
        ok,
        f"models={len(models)} runs={runs} violations={violations} time={t.elapsed:.2f}s",
    )
    assert ok
