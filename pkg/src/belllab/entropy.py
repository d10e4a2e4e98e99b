"""Entropy over sequences of sub-ensemble labels, in bits.

Over ``N0`` runs each run carries a sub-ensemble label ``E = (i, j)`` with
``i, j`` in ``1..N``, so there are ``W = N^(2 N0)`` possible sequences.  Before
the experimenters' choices are known the sequence has entropy ``S``; once the
choices fix it (``E = (gamma_A, gamma_B)`` run by run) the entropy is zero, so
the drop is ``-S``, which is minus the mutual information between the
sequence and the choices.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from belllab.models import SuperdetModel, check_constraint_m
from belllab.scenario import Context

# mutual information between lambda and the settings needed by the
# low-correlation superdeterministic model used as a yardstick
REFERENCE_MI_BITS = 0.08
DENSE_LIMIT = 2**20


class SubEnsembleUndefined(ValueError):
    """The model lets lambda correlate with unused mechanisms; sub-ensembles do not exist."""


def sequence_count(n_mechanisms: int, n_runs: int) -> int:
    """``W = N^(2 N0)``."""
    if n_mechanisms < 1 or n_runs < 1:
        raise ValueError("N and N0 must be >= 1")
    return n_mechanisms ** (2 * n_runs)


def label_index(label: tuple[int, int], n_mechanisms: int) -> int:
    i, j = label
    if not (1 <= i <= n_mechanisms and 1 <= j <= n_mechanisms):
        raise ValueError(f"sub-ensemble {label} out of range for N={n_mechanisms}")
    return (i - 1) * n_mechanisms + (j - 1)


def sequence_index(entries: Sequence[tuple[int, int]], n_mechanisms: int) -> int:
    """Mixed-radix index ``k`` in ``[0, W)`` of a label sequence, first run most significant."""
    k = 0
    base = n_mechanisms * n_mechanisms
    for e in entries:
        k = k * base + label_index(e, n_mechanisms)
    return k


def sequence_from_index(k: int, n_mechanisms: int, n_runs: int) -> list[tuple[int, int]]:
    base = n_mechanisms * n_mechanisms
    if not 0 <= k < base**n_runs:
        raise ValueError(f"sequence index {k} out of range")
    out = []
    for _ in range(n_runs):
        k, r = divmod(k, base)
        out.append((r // n_mechanisms + 1, r % n_mechanisms + 1))
    return out[::-1]


@dataclass(frozen=True)
class SequencePrior:
    """Subjective probabilities over the W label sequences.

    ``kind`` is ``"uniform"``, ``"product"`` (every run independently drawn from
    ``per_run``, a length ``N^2`` vector over labels) or ``"dense"`` (explicit
    length-W vector ``probs``, only for W up to 2^20).
    """

    n_mechanisms: int
    n_runs: int
    kind: str = "uniform"
    per_run: tuple[float, ...] | None = None
    probs: np.ndarray | None = None

    def __post_init__(self) -> None:
        w = sequence_count(self.n_mechanisms, self.n_runs)
        if self.kind == "uniform":
            return
        if self.kind == "product":
            if self.per_run is None or len(self.per_run) != self.n_mechanisms**2:
                raise ValueError(f"product prior needs a per-run vector of length {self.n_mechanisms**2}")
            _check_normalized(self.per_run)
            object.__setattr__(self, "per_run", tuple(float(x) for x in self.per_run))
        elif self.kind == "dense":
            if w > DENSE_LIMIT:
                raise ValueError(f"W = {w} exceeds the dense limit {DENSE_LIMIT}; use a named family")
            if self.probs is None or len(self.probs) != w:
                raise ValueError(f"dense prior needs exactly W = {w} probabilities")
            arr = np.asarray(self.probs, dtype=float)
            _check_normalized(arr)
            object.__setattr__(self, "probs", arr)
        else:
            raise ValueError(f"unknown prior kind {self.kind!r}")

    @property
    def w(self) -> int:
        return sequence_count(self.n_mechanisms, self.n_runs)

    @classmethod
    def uniform(cls, n_mechanisms: int, n_runs: int) -> "SequencePrior":
        return cls(n_mechanisms, n_runs)

    @classmethod
    def product(cls, per_run: Sequence[float], n_mechanisms: int, n_runs: int) -> "SequencePrior":
        return cls(n_mechanisms, n_runs, "product", per_run=tuple(per_run))

    @classmethod
    def dense(cls, probs: Sequence[float], n_mechanisms: int, n_runs: int) -> "SequencePrior":
        return cls(n_mechanisms, n_runs, "dense", probs=np.asarray(probs, dtype=float))

    def to_dense(self) -> np.ndarray:
        """Explicit length-W vector (only for W up to 2^20)."""
        w = self.w
        if w > DENSE_LIMIT:
            raise ValueError(f"W = {w} exceeds the dense limit {DENSE_LIMIT}")
        if self.kind == "dense":
            return self.probs  # type: ignore[return-value]
        if self.kind == "uniform":
            return np.full(w, 1.0 / w)
        out = np.ones(1)
        per = np.asarray(self.per_run)
        for _ in range(self.n_runs):
            out = np.outer(out, per).ravel()
        return out


def _check_normalized(p: Sequence[float] | np.ndarray) -> None:
    arr = np.asarray(p, dtype=float)
    if np.any(arr < 0) or not math.isclose(math.fsum(arr), 1.0, rel_tol=0, abs_tol=1e-9):
        raise ValueError("prior is not a normalized probability vector")


def shannon_bits(p: Sequence[float] | np.ndarray) -> float:
    """``-sum p log2 p`` with ``0 log 0 = 0``, summed with fsum."""
    arr = np.asarray(p, dtype=float)
    nz = arr[arr > 0]
    return -math.fsum(nz * np.log2(nz))


def sequence_entropy(prior: SequencePrior) -> float:
    """Shannon entropy of the sequence prior in bits."""
    if prior.kind == "uniform":
        return 2 * prior.n_runs * math.log2(prior.n_mechanisms)
    if prior.kind == "product":
        return prior.n_runs * shannon_bits(prior.per_run)  # type: ignore[arg-type]
    return shannon_bits(prior.probs)  # type: ignore[arg-type]


def entropy_drop(prior: SequencePrior) -> float:
    """Change of the sequence entropy once the choices fix the sequence (always <= 0)."""
    return -sequence_entropy(prior)


def mutual_information_bits(prior: SequencePrior) -> float:
    """``H(k : {gamma_A, gamma_B})``; the choices determine k, so this equals S."""
    return sequence_entropy(prior)


def per_run_mutual_information(n_mechanisms: int) -> float:
    """``2 log2 N`` bits shared between one run's label and its choices."""
    if n_mechanisms < 1:
        raise ValueError("N must be >= 1")
    return 2 * math.log2(n_mechanisms)


def mutual_information_vs_reference(n_mechanisms: int, reference_bits: float = REFERENCE_MI_BITS) -> tuple[float, float]:
    """Per-run mutual information and its ratio to the reference value."""
    mi = per_run_mutual_information(n_mechanisms)
    return mi, mi / reference_bits


@dataclass
class CoincidenceReport:
    consistent: bool
    violations: list[tuple[int, Context, tuple[int, int]]]


def verify_coincidence(model: SuperdetModel, runs: Sequence[tuple[Context, tuple[int, int]]]) -> CoincidenceReport:
    """Check that every run's sub-ensemble equals its experimenters' choices."""
    if not check_constraint_m(model):
        raise SubEnsembleUndefined(
            "sub-ensembles undefined: lambda is correlated with mechanisms other than the ones used"
        )
    violations = [(i, c, e) for i, (c, e) in enumerate(runs) if tuple(e) != c.sub_ensemble]
    return CoincidenceReport(consistent=not violations, violations=violations)


def entropy_report(prior: SequencePrior, reference_bits: float = REFERENCE_MI_BITS) -> dict:
    s = sequence_entropy(prior)
    mi, ratio = mutual_information_vs_reference(prior.n_mechanisms, reference_bits)
    return {
        "N": prior.n_mechanisms,
        "N0": prior.n_runs,
        "W": str(prior.w),
        "prior": prior.kind,
        "S_bits": s,
        # -0.0 would serialize as "-0.0"
        "delta_S_bits": -s if s else 0.0,
        "per_run_MI_bits": mi,
        "ratio_to_ref": ratio,
    }
