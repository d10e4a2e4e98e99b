"""Command-line entry point: ``belllab <subcommand> ...``.

Exit codes: 0 success, 2 argument error, 3 budget refusal, 4 model-file error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import random
import sys
from fractions import Fraction

from belllab import entropy, finetune, montecarlo
from belllab.files import ModelFileError, dump_json, load_model, save_model, sector_dict, stats_to_json, validate, write_atomic
from belllab.models import (
    ModelError,
    NonlocalModel,
    RetrocausalModel,
    SuperdetModel,
    analytic_sector_statistics,
    check_condition_ii,
    check_constraint_m,
    check_constraint_n,
    make_constrained,
    max_same_sector_gap,
    named_kernel,
    random_factorized_kernel,
    random_sector_tables,
    random_table,
    random_superdet,
)
from belllab.scenario import SETTINGS, ChoicePrior, Context, enumerate_contexts
from belllab.simplex import LatticeDistribution, count_configurations, enumerate_range

EXIT_OK, EXIT_ARGS, EXIT_BUDGET, EXIT_MODEL = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _nonneg(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError("list entries must be integers >= 1")
    return vals


def _emit(text: str, out: str | None) -> None:
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def _csv_text(header: tuple[str, ...], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# subcommands


def cmd_count(args) -> int:
    print(count_configurations(args.n_values, args.denominator))
    return EXIT_OK


def cmd_enumerate(args) -> int:
    total = count_configurations(args.n_values, args.denominator)
    stop = total if args.stop is None else min(args.stop, total)
    n_points = max(0, stop - args.start)
    if n_points * args.n_values > args.budget:
        raise finetune.BudgetExceeded(n_points * args.n_values, args.budget)
    header = ("rank",) + tuple(f"p{i}" for i in range(args.n_values))
    rows = ((args.start + r, *d.numerators) for r, d in enumerate(enumerate_range(args.n_values, args.denominator, args.start, stop)))
    _emit(_csv_text(header, rows), args.out)
    return EXIT_OK


def cmd_finetune(args) -> int:
    if args.mode == "constrained":
        report = finetune.f_constrained(args.n, args.n_values, args.denominator)
        obj = report.to_dict()
        if args.lambda_list:
            sweep = finetune.f_constrained_lambda_sweep(args.n, args.denominator, args.lambda_list)
            obj["lambda_sweep"] = [{"lambda_count": lam, "log10_one_minus_F": y} for lam, y in sweep]
            if args.csv:
                write_atomic(args.csv, _csv_text(("lambda_count", "log10_one_minus_F"), sweep))
    else:
        kernel = named_kernel(args.kernel, args.n_values)
        report = finetune.f_general(kernel, args.n, args.n_values, args.denominator, budget=args.budget)
        obj = report.to_dict()
        if args.n_list:
            study = finetune.f_general_limit_study(kernel, args.n_values, args.denominator, args.n_list, budget=args.budget)
            obj["limit_study"] = [{"N": n, "log10_one_minus_F": y} for n, y in study]
            if args.csv:
                write_atomic(args.csv, _csv_text(("N", "log10_one_minus_F"), study))
        obj["kernel"] = args.kernel
    validate(obj, "finetune_report")
    _emit(dump_json(obj), args.out)
    return EXIT_OK


def cmd_entropy(args) -> int:
    if args.prior == "uniform":
        prior = entropy.SequencePrior.uniform(args.n, args.n0)
    else:
        if not args.per_run:
            raise UsageError("--prior product needs --per-run with N^2 comma-separated probabilities")
        per_run = [float(Fraction(x)) for x in args.per_run.split(",")]
        prior = entropy.SequencePrior.product(per_run, args.n, args.n0)
    obj = entropy.entropy_report(prior, args.reference)
    validate(obj, "entropy_report")
    _emit(dump_json(obj), args.out)
    return EXIT_OK


def _empirical_condition_ii(table: montecarlo.EmpiricalTable, min_visits: int) -> tuple[bool, float]:
    """Every well-visited context's frequencies lie within 5/sqrt(visits) of its sector's."""
    worst = 0.0
    passes = True
    for idx, counts in table.by_context.items():
        visits = int(counts.sum())
        if visits < min_visits:
            continue
        sector = Context.from_index(table.n_mechanisms, idx).settings
        dev = float(abs(counts / visits - table.frequencies(sector)).max())
        worst = max(worst, dev)
        if dev > 5 / visits**0.5:
            passes = False
    return passes, worst


def cmd_simulate(args) -> int:
    model, file_prior = load_model(args.model)
    prior = file_prior or ChoicePrior.uniform(model.n_mechanisms)
    batch = montecarlo.simulate_batch(model, args.n0, args.seed, prior)
    csv_text = batch.to_csv()
    write_atomic(args.out, csv_text)

    table = montecarlo.EmpiricalTable.from_batch(batch)
    analytic = analytic_sector_statistics(model, prior)
    bands = montecarlo.sector_band_check(table, analytic, args.sigmas) if len(analytic) == 4 else []
    emp_ok, worst = _empirical_condition_ii(table, args.min_visits)
    cond = check_condition_ii(model, max_witnesses=1)

    sectors = {}
    for s in table.by_sector:
        counts = table.by_sector[s]
        sectors[s] = {
            "visits": int(counts.sum()),
            "counts": [int(c) for c in counts],
            "analytic": stats_to_json(analytic[s]) if s in analytic else None,
        }
    within = sum(b.within for b in bands)
    summary = {
        "model_class": model.model_class,
        "N": model.n_mechanisms,
        "N0": args.n0,
        "seed": args.seed,
        "csv": args.out,
        "csv_sha256": hashlib.sha256(csv_text.encode()).hexdigest(),
        "sectors": sector_dict(sectors),
        "band_check": {
            "n_sigma": args.sigmas,
            "cells": len(bands),
            "within": within,
            "fraction_within": within / len(bands) if bands else 0.0,
        },
        "condition_ii": {
            "analytic_holds": cond.holds,
            "empirical_passes": emp_ok,
            "worst_deviation": worst,
            "min_visits": args.min_visits,
        },
        "analytic_max_gap": str(max_same_sector_gap(model)),
        "coincidence": None,
        "mechanism_dependence": None,
    }
    if isinstance(model, SuperdetModel) and check_constraint_m(model):
        runs = [(r.context, r.sub_ensemble) for r in batch.records(args.coincidence_runs)]
        rep = entropy.verify_coincidence(model, runs)
        summary["coincidence"] = {"checked_runs": len(runs), "consistent": rep.consistent, "violations": len(rep.violations)}
    if not cond.holds:
        summary["mechanism_dependence"] = montecarlo.mechanism_dependence_demo(model, args.demo_runs, args.seed)
    validate(summary, "simulate_summary")
    _emit(dump_json(summary), args.summary)
    return EXIT_OK


def cmd_check(args) -> int:
    model, _ = load_model(args.model)
    cond = check_condition_ii(model, max_witnesses=args.max_witnesses)
    superdet = isinstance(model, SuperdetModel)
    obj = {
        "model_class": model.model_class,
        "N": model.n_mechanisms,
        "condition_ii": {
            "holds": cond.holds,
            "violating_sectors": cond.n_violating_sectors,
            "witnesses": [[a.to_dict(), b.to_dict()] for a, b in cond.witnesses],
        },
        "constraint_m": check_constraint_m(model) if superdet else None,
        "constraint_n": check_constraint_n(model) if superdet else None,
        "max_same_sector_gap": str(max_same_sector_gap(model)),
    }
    validate(obj, "check_report")
    _emit(dump_json(obj), args.out)
    return EXIT_OK


def _demo_tables(n: int, n_values: int, denominator: int) -> dict:
    """Table depends on which mechanism wing A used: satisfies (m), violates (ii)."""
    first = LatticeDistribution.point_mass(n_values, 0, denominator)
    last = LatticeDistribution.point_mass(n_values, n_values - 1, denominator)
    return {c: first if c.gamma_a == 1 else last for c in enumerate_contexts(n)}


def cmd_make_model(args) -> int:
    rng = random.Random(args.seed)
    kind = args.kind
    if kind in ("constrained", "demo", "random"):
        kernel = named_kernel(args.kernel, args.n_values)
        if kind == "constrained":
            model = make_constrained(args.n_values, args.n, random_sector_tables(args.n_values, args.denominator, rng), kernel)
        elif kind == "random":
            model = random_superdet(args.n_values, args.denominator, args.n, kernel, rng)
        else:
            if args.n < 2 or args.n_values < 2:
                raise UsageError("the demo model needs N >= 2 and at least 2 hidden values")
            model = SuperdetModel(args.n_values, args.n, kernel, _demo_tables(args.n, args.n_values, args.denominator))
    else:
        local = kind == "retrocausal"
        fk = random_factorized_kernel(args.n_values, rng, local=local)
        if local:
            hidden = {m: random_table(args.n_values, args.denominator, rng) for m in SETTINGS}
            model = RetrocausalModel(args.n_values, args.n, fk, hidden)
        else:
            model = NonlocalModel(args.n_values, args.n, fk, random_table(args.n_values, args.denominator, rng))
    save_model(args.out, model)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="belllab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def lattice_args(sp, n_values_default=None, l_default=None):
        sp.add_argument("--lambda", dest="n_values", type=_positive, required=n_values_default is None, default=n_values_default,
                        help="number of hidden-variable values")
        sp.add_argument("--l", dest="denominator", type=_positive, required=l_default is None, default=l_default,
                        help="lattice denominator L")

    sp = sub.add_parser("count", help="number of lattice points V(lambda, L)")
    lattice_args(sp)
    sp.set_defaults(func=cmd_count)

    sp = sub.add_parser("enumerate", help="list lattice points as CSV in reverse-lex order")
    lattice_args(sp)
    sp.add_argument("--start", type=_nonneg, default=0)
    sp.add_argument("--stop", type=_nonneg, default=None)
    sp.add_argument("--budget", type=_positive, default=10_000_000, help="max numbers to emit")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_enumerate)

    sp = sub.add_parser("finetune", help="overhead fine-tuning report (JSON)")
    sp.add_argument("--mode", choices=("constrained", "general"), required=True)
    sp.add_argument("--kernel", default="injective", help="injective | readout | constant | parity (general mode)")
    sp.add_argument("--n", type=_positive, required=True, help="setting mechanisms per wing")
    lattice_args(sp)
    sp.add_argument("--budget", type=_positive, default=finetune.DEFAULT_BUDGET)
    sp.add_argument("--n-list", type=_int_list, help="general mode: also tabulate log10(1-F) for these N")
    sp.add_argument("--lambda-list", type=_int_list, help="constrained mode: also tabulate over these lambda counts")
    sp.add_argument("--csv", help="write the N or lambda table as plot-ready CSV")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_finetune)

    sp = sub.add_parser("entropy", help="sub-ensemble sequence entropy drop (JSON)")
    sp.add_argument("--n", type=_positive, required=True)
    sp.add_argument("--n0", type=_positive, required=True, help="number of runs")
    sp.add_argument("--prior", choices=("uniform", "product"), default="uniform")
    sp.add_argument("--per-run", help="product prior: N^2 probabilities over labels (i,j), i-major")
    sp.add_argument("--reference", type=float, default=entropy.REFERENCE_MI_BITS, help="reference mutual information in bits")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_entropy)

    sp = sub.add_parser("simulate", help="simulate runs from a model file; writes CSV + summary JSON")
    sp.add_argument("--model", required=True)
    sp.add_argument("--n0", type=_positive, required=True)
    sp.add_argument("--seed", type=_nonneg, required=True)
    sp.add_argument("--out", required=True, help="run CSV path")
    sp.add_argument("--summary", help="summary JSON path (stdout if omitted)")
    sp.add_argument("--sigmas", type=float, default=4.0)
    sp.add_argument("--min-visits", type=_positive, default=30)
    sp.add_argument("--demo-runs", type=_positive, default=1000)
    sp.add_argument("--coincidence-runs", type=_positive, default=10_000)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("check", help="run constraint and condition checks on a model file")
    sp.add_argument("--model", required=True)
    sp.add_argument("--max-witnesses", type=_positive, default=10)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("make-model", help="write an example model file")
    sp.add_argument("--kind", choices=("constrained", "demo", "random", "retrocausal", "nonlocal"), required=True)
    sp.add_argument("--n", type=_positive, default=2)
    lattice_args(sp, n_values_default=4, l_default=4)
    sp.add_argument("--kernel", default="readout")
    sp.add_argument("--seed", type=_nonneg, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_make_model)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except finetune.BudgetExceeded as exc:
        print(f"belllab: refused: {exc} (required work {exc.required}, raise --budget)", file=sys.stderr)
        return EXIT_BUDGET
    except ModelFileError as exc:
        print(f"belllab: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (UsageError, ModelError, ValueError) as exc:
        print(f"belllab: {exc}", file=sys.stderr)
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())
