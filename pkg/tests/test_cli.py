import json
from fractions import Fraction

import pytest

from belllab.cli import main
from belllab.files import load_model, validate


def run(capsys, *argv):
    """Exit code and captured output; argparse usage errors exit via SystemExit."""
    try:
        code = main(list(argv))
    except SystemExit as exc:
        code = exc.code
    out, err = capsys.readouterr()
    return code, out, err


def test_count(capsys):
    code, out, _ = run(capsys, "count", "--lambda", "3", "--l", "2")
    assert code == 0 and out.strip() == "6"


def test_count_rejects_zero(capsys):
    code, _, err = run(capsys, "count", "--lambda", "0", "--l", "2")
    assert code == 2 and err


def test_unknown_subcommand(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_enumerate_csv(capsys, tmp_path):
    out_path = tmp_path / "pts.csv"
    code, _, _ = run(capsys, "enumerate", "--lambda", "3", "--l", "2", "--out", str(out_path))
    lines = out_path.read_text().splitlines()
    assert code == 0
    assert lines[0] == "rank,p0,p1,p2"
    assert lines[1:] == ["0,2,0,0", "1,1,1,0", "2,1,0,1", "3,0,2,0", "4,0,1,1", "5,0,0,2"]


def test_enumerate_budget(capsys):
    code, _, _ = run(capsys, "enumerate", "--lambda", "10", "--l", "20", "--budget", "100")
    assert code == 3


def test_finetune_constrained(capsys):
    code, out, _ = run(capsys, "finetune", "--mode", "constrained", "--n", "2", "--lambda", "2", "--l", "2")
    rep = json.loads(out)
    validate(rep, "finetune_report")
    assert code == 0
    assert Fraction(rep["F"]) == 1 - Fraction(1, 3**60)


def test_finetune_general_and_limit_csv(capsys, tmp_path):
    csv_path = tmp_path / "limit.csv"
    code, out, _ = run(
        capsys, "finetune", "--mode", "general", "--kernel", "injective", "--n", "2",
        "--lambda", "2", "--l", "1", "--n-list", "2,3,4", "--csv", str(csv_path),
    )
    rep = json.loads(out)
    validate(rep, "finetune_report")
    assert code == 0
    assert rep["n_f"] == "16"
    assert rep["log10_one_minus_F"] == pytest.approx(-18.0618, abs=1e-4)
    rows = csv_path.read_text().splitlines()
    assert len(rows) == 4


def test_finetune_budget_refusal(capsys):
    code, _, err = run(capsys, "finetune", "--mode", "general", "--kernel", "parity", "--n", "2",
                       "--lambda", "3", "--l", "30", "--budget", "100")
    assert code == 3
    assert "budget" in err


def test_finetune_bad_kernel(capsys):
    code, _, _ = run(capsys, "finetune", "--mode", "general", "--kernel", "nope", "--n", "2", "--lambda", "2", "--l", "1")
    assert code == 2


def test_entropy(capsys, tmp_path):
    out_path = tmp_path / "e.json"
    code, _, _ = run(capsys, "entropy", "--n", "16", "--n0", "1", "--out", str(out_path))
    rep = json.loads(out_path.read_text())
    validate(rep, "entropy_report")
    assert code == 0
    assert rep["per_run_MI_bits"] == 8
    assert rep["ratio_to_ref"] == pytest.approx(100)
    assert rep["delta_S_bits"] == -8


def test_entropy_product_prior(capsys):
    code, out, _ = run(capsys, "entropy", "--n", "2", "--n0", "3", "--prior", "product", "--per-run", "0.5,0.5,0,0")
    assert code == 0
    assert json.loads(out)["delta_S_bits"] == pytest.approx(-3)


def test_entropy_product_prior_needs_vector(capsys):
    code, _, _ = run(capsys, "entropy", "--n", "2", "--n0", "3", "--prior", "product")
    assert code == 2


@pytest.mark.parametrize("kind", ["constrained", "demo", "random", "retrocausal", "nonlocal"])
def test_make_model_roundtrip(capsys, tmp_path, kind):
    path = tmp_path / f"{kind}.json"
    extra = ["--lambda", "3", "--kernel", "parity"] if kind in ("retrocausal", "nonlocal") else []
    code, _, _ = run(capsys, "make-model", "--kind", kind, "--n", "2", "--out", str(path), *extra)
    assert code == 0
    obj = json.loads(path.read_text())
    validate(obj, "model")
    model, _ = load_model(path)
    assert model.n_mechanisms == 2


def test_simulate_same_seed_same_csv(capsys, tmp_path):
    model = tmp_path / "m.json"
    run(capsys, "make-model", "--kind", "constrained", "--out", str(model))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    s = tmp_path / "s.json"
    code, _, _ = run(capsys, "simulate", "--model", str(model), "--n0", "3000", "--seed", "7", "--out", str(a), "--summary", str(s))
    assert code == 0
    run(capsys, "simulate", "--model", str(model), "--n0", "3000", "--seed", "7", "--out", str(b))
    assert a.read_bytes() == b.read_bytes()
    summary = json.loads(s.read_text())
    validate(summary, "simulate_summary")
    assert summary["condition_ii"]["analytic_holds"]
    assert summary["coincidence"]["consistent"]
    assert summary["mechanism_dependence"] is None


def test_simulate_demo_model(capsys, tmp_path):
    model = tmp_path / "demo.json"
    run(capsys, "make-model", "--kind", "demo", "--out", str(model))
    code, out, _ = run(capsys, "simulate", "--model", str(model), "--n0", "50000", "--seed", "1", "--out", str(tmp_path / "r.csv"))
    summary = json.loads(out)
    assert code == 0
    assert not summary["condition_ii"]["analytic_holds"]
    assert not summary["condition_ii"]["empirical_passes"]
    assert summary["mechanism_dependence"]["detected"]


def test_check(capsys, tmp_path):
    model = tmp_path / "demo.json"
    run(capsys, "make-model", "--kind", "demo", "--out", str(model))
    code, out, _ = run(capsys, "check", "--model", str(model))
    rep = json.loads(out)
    validate(rep, "check_report")
    assert code == 0
    assert rep["constraint_m"] is True
    assert rep["constraint_n"] is False
    assert rep["condition_ii"]["holds"] is False
    assert rep["condition_ii"]["witnesses"]


@pytest.mark.parametrize("content", ["not json", "[]", '{"class": "superdeterministic"}'])
def test_bad_model_files(capsys, tmp_path, content):
    path = tmp_path / "bad.json"
    path.write_text(content)
    code, _, err = run(capsys, "check", "--model", str(path))
    assert code == 4 and err


def test_missing_model_file(capsys, tmp_path):
    code, _, _ = run(capsys, "simulate", "--model", str(tmp_path / "none.json"), "--n0", "10", "--seed", "1", "--out", str(tmp_path / "x.csv"))
    assert code == 4


def test_model_with_inconsistent_tables(capsys, tmp_path):
    path = tmp_path / "m.json"
    run(capsys, "make-model", "--kind", "constrained", "--n", "1", "--out", str(path))
    obj = json.loads(path.read_text())
    key = next(iter(obj["tables"]))
    obj["tables"][key] = [1, 0, 0, 0]  # denominator is larger
    path.write_text(json.dumps(obj))
    code, _, _ = run(capsys, "check", "--model", str(path))
    assert code == 4
