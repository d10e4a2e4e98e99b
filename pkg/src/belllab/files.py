"""Model files, report schemas and atomic output."""
from __future__ import annotations

import json
import os
import tempfile
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema

from belllab.models import (
    FactorizedKernel,
    Model,
    ModelError,
    NonlocalModel,
    OutcomeKernel,
    RetrocausalModel,
    SuperdetModel,
    make_constrained,
)
from belllab.scenario import SECTORS, SETTINGS, ChoicePrior, Context, Setting, parse_sector, sector_key
from belllab.simplex import LatticeDistribution


class ModelFileError(ValueError):
    pass


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    text = resources.files("belllab").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def validate(obj: dict, schema_name: str) -> None:
    jsonschema.validate(obj, load_schema(schema_name))


def write_atomic(path: str | os.PathLike, data: str | bytes) -> None:
    """Write via a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj: dict) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def _lattice(nums, denominator: int) -> LatticeDistribution:
    return LatticeDistribution(tuple(int(x) for x in nums), denominator)


def model_to_dict(model: Model, prior: ChoicePrior | None = None) -> dict:
    out: dict = {
        "class": model.model_class,
        "lambda_count": model.n_values,
        "N": model.n_mechanisms,
    }
    if isinstance(model, SuperdetModel):
        out["denominator"] = model.denominator
        out["kernel"] = model.kernel.to_dict()
        out["tables"] = {c.to_json(): list(model.tables[c].numerators) for c in sorted(model.tables, key=Context.index)}
    elif isinstance(model, RetrocausalModel):
        out["denominator"] = model.hidden[SETTINGS[0]].denominator
        out["kernel"] = model.kernel.to_dict()
        out["tables"] = {m.value: list(model.hidden[m].numerators) for m in SETTINGS}
    else:
        out["denominator"] = model.hidden.denominator
        out["kernel"] = model.kernel.to_dict()
        out["tables"] = {"*": list(model.hidden.numerators)}
    if prior is not None:
        out["prior"] = prior.to_dict()
    return out


def model_from_dict(obj: dict) -> tuple[Model, ChoicePrior | None]:
    """Build a model (and optional choice prior) from its JSON form.

    Superdeterministic files may give ``sector_tables`` (one per ``"xx"``..``"zz"``)
    instead of per-context ``tables``; this builds the constrained model.
    """
    try:
        validate(obj, "model")
    except jsonschema.ValidationError as exc:
        raise ModelFileError(f"model file does not match schema: {exc.message}") from None
    try:
        return _build(obj)
    except (ModelError, ValueError, KeyError, TypeError, ZeroDivisionError) as exc:
        raise ModelFileError(f"invalid model file: {exc}") from None


def _build(obj: dict) -> tuple[Model, ChoicePrior | None]:
    cls = obj["class"]
    n_values = obj["lambda_count"]
    denom = obj["denominator"]
    n = obj["N"]
    prior = ChoicePrior.from_dict(obj["prior"]) if "prior" in obj else None
    if prior is not None and prior.n_mechanisms != n:
        raise ModelError(f"prior has N={prior.n_mechanisms}, model has N={n}")
    if cls == "superdeterministic":
        kernel = OutcomeKernel.from_dict(obj["kernel"], n_values)
        if "sector_tables" in obj:
            sector_tables = {parse_sector(k): _lattice(v, denom) for k, v in obj["sector_tables"].items()}
            return make_constrained(n_values, n, sector_tables, kernel), prior
        tables = {Context.from_json(k): _lattice(v, denom) for k, v in obj["tables"].items()}
        return SuperdetModel(n_values, n, kernel, tables), prior
    kernel_f = FactorizedKernel.from_dict(obj["kernel"])
    if cls == "retrocausal":
        hidden = {Setting(k): _lattice(v, denom) for k, v in obj["tables"].items()}
        return RetrocausalModel(n_values, n, kernel_f, hidden), prior
    return NonlocalModel(n_values, n, kernel_f, _lattice(obj["tables"]["*"], denom)), prior


def load_model(path: str | os.PathLike) -> tuple[Model, ChoicePrior | None]:
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFileError(f"cannot read model file {path}: {exc}") from None
    if not isinstance(obj, dict):
        raise ModelFileError("model file must hold a JSON object")
    return model_from_dict(obj)


def save_model(path: str | os.PathLike, model: Model, prior: ChoicePrior | None = None) -> None:
    write_atomic(path, dump_json(model_to_dict(model, prior)))


def stats_to_json(stats) -> list[str]:
    return [str(Fraction(p)) for p in stats]


def sector_dict(values: dict) -> dict:
    return {sector_key(s): values[s] for s in SECTORS if s in values}
