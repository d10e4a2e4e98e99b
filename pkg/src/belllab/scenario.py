"""Variable spaces of the N-mechanism Bell scenario.

Each wing has ``N`` setting mechanisms whose outputs are recorded every run;
the experimenter picks one of them (``gamma``, 1-based) and its output becomes
the actual measurement setting.  A :class:`Context` is the full tuple of
mechanism outputs and choices for one run.

Canonical context order is gamma_A-major, then gamma_B, then alpha read as a
bitstring (Mx=0, Mz=1, first mechanism most significant), then beta.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Iterator


class Setting(enum.Enum):
    MX = "x"
    MZ = "z"

    @property
    def bit(self) -> int:
        return 0 if self is Setting.MX else 1

    @classmethod
    def from_bit(cls, bit: int) -> "Setting":
        return cls.MZ if bit else cls.MX

    def __str__(self) -> str:
        return "M" + self.value


MX = Setting.MX
MZ = Setting.MZ

SETTINGS: tuple[Setting, Setting] = (MX, MZ)
# the four (M_A, M_B) sectors, in a fixed order
SECTORS: tuple[tuple[Setting, Setting], ...] = tuple(product(SETTINGS, SETTINGS))
# joint outcomes (O_A, O_B); distributions over outcomes are indexed in this order
OUTCOMES: tuple[tuple[int, int], ...] = ((1, 1), (1, -1), (-1, 1), (-1, -1))


def sector_key(sector: tuple[Setting, Setting]) -> str:
    return sector[0].value + sector[1].value


def parse_sector(key: str) -> tuple[Setting, Setting]:
    if len(key) != 2:
        raise ValueError(f"sector key must be two characters from 'xz', got {key!r}")
    return Setting(key[0]), Setting(key[1])


def _parse_settings(text: str) -> tuple[Setting, ...]:
    try:
        return tuple(Setting(ch) for ch in text)
    except ValueError:
        raise ValueError(f"setting string must use only 'x'/'z': {text!r}") from None


@dataclass(frozen=True)
class Context:
    alpha: tuple[Setting, ...]
    beta: tuple[Setting, ...]
    gamma_a: int
    gamma_b: int

    def __post_init__(self) -> None:
        n = len(self.alpha)
        if n < 1 or len(self.beta) != n:
            raise ValueError(
                f"alpha and beta must have equal length >= 1, got {len(self.alpha)} and {len(self.beta)}"
            )
        if not (1 <= self.gamma_a <= n and 1 <= self.gamma_b <= n):
            raise ValueError(f"choices ({self.gamma_a}, {self.gamma_b}) out of range [1, {n}]")

    @property
    def n_mechanisms(self) -> int:
        return len(self.alpha)

    @property
    def settings(self) -> tuple[Setting, Setting]:
        return induced_settings(self)

    @property
    def sub_ensemble(self) -> tuple[int, int]:
        return (self.gamma_a, self.gamma_b)

    def index(self) -> int:
        n = self.n_mechanisms
        a = _bits_to_int(self.alpha)
        b = _bits_to_int(self.beta)
        return (((self.gamma_a - 1) * n + (self.gamma_b - 1)) << (2 * n)) | (a << n) | b

    @classmethod
    def from_index(cls, n: int, idx: int) -> "Context":
        if not 0 <= idx < context_count(n):
            raise ValueError(f"context index {idx} out of range for N={n}")
        b = idx & ((1 << n) - 1)
        a = (idx >> n) & ((1 << n) - 1)
        g = idx >> (2 * n)
        return cls(_int_to_bits(a, n), _int_to_bits(b, n), g // n + 1, g % n + 1)

    def to_dict(self) -> dict:
        return {
            "alpha": "".join(s.value for s in self.alpha),
            "beta": "".join(s.value for s in self.beta),
            "gA": self.gamma_a,
            "gB": self.gamma_b,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, obj: dict) -> "Context":
        return cls(_parse_settings(obj["alpha"]), _parse_settings(obj["beta"]), int(obj["gA"]), int(obj["gB"]))

    @classmethod
    def from_json(cls, text: str) -> "Context":
        return cls.from_dict(json.loads(text))

    @classmethod
    def parse(cls, alpha: str, beta: str, gamma_a: int, gamma_b: int) -> "Context":
        """Build from ``'xz..'`` strings, e.g. ``Context.parse('xz', 'zz', 2, 1)``."""
        return cls(_parse_settings(alpha), _parse_settings(beta), gamma_a, gamma_b)


def _bits_to_int(settings: tuple[Setting, ...]) -> int:
    v = 0
    for s in settings:
        v = (v << 1) | s.bit
    return v


def _int_to_bits(v: int, n: int) -> tuple[Setting, ...]:
    return tuple(Setting.from_bit((v >> (n - 1 - k)) & 1) for k in range(n))


def induced_settings(c: Context) -> tuple[Setting, Setting]:
    """Actual settings ``(alpha[gamma_A], beta[gamma_B])``."""
    return c.alpha[c.gamma_a - 1], c.beta[c.gamma_b - 1]


def context_count(n: int) -> int:
    if n < 1:
        raise ValueError(f"number of mechanisms must be >= 1, got {n}")
    return n * n * 4**n


def enumerate_contexts(n: int) -> Iterator[Context]:
    """All ``N^2 2^(2N)`` contexts in canonical order."""
    if n < 1:
        raise ValueError(f"number of mechanisms must be >= 1, got {n}")
    strings = list(product(SETTINGS, repeat=n))
    for ga in range(1, n + 1):
        for gb in range(1, n + 1):
            for alpha in strings:
                for beta in strings:
                    yield Context(alpha, beta, ga, gb)


def contexts_by_settings(n: int) -> dict[tuple[Setting, Setting], list[Context]]:
    """Partition the contexts into the four (M_A, M_B) sectors."""
    sectors: dict[tuple[Setting, Setting], list[Context]] = {s: [] for s in SECTORS}
    for c in enumerate_contexts(n):
        sectors[induced_settings(c)].append(c)
    return sectors


@dataclass(frozen=True)
class ChoicePrior:
    """Independent priors over mechanism outputs and experimenter choices.

    ``mech_z_a[i]`` is the probability that mechanism ``i+1`` at wing A outputs
    Mz; ``choice_a[i]`` the probability that ``gamma_A = i+1``.  Likewise for B.
    """

    mech_z_a: tuple[Fraction, ...]
    mech_z_b: tuple[Fraction, ...]
    choice_a: tuple[Fraction, ...]
    choice_b: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        n = len(self.mech_z_a)
        for name in ("mech_z_a", "mech_z_b", "choice_a", "choice_b"):
            vals = tuple(Fraction(v) for v in getattr(self, name))
            object.__setattr__(self, name, vals)
            if len(vals) != n:
                raise ValueError(f"{name} has length {len(vals)}, expected {n}")
            if any(v < 0 or v > 1 for v in vals):
                raise ValueError(f"{name} entries must lie in [0, 1]")
        if n < 1:
            raise ValueError("prior needs at least one mechanism")
        if sum(self.choice_a) != 1 or sum(self.choice_b) != 1:
            raise ValueError("choice probabilities must sum to 1")

    @property
    def n_mechanisms(self) -> int:
        return len(self.mech_z_a)

    @classmethod
    def uniform(cls, n: int) -> "ChoicePrior":
        half = (Fraction(1, 2),) * n
        pick = (Fraction(1, n),) * n
        return cls(half, half, pick, pick)

    @classmethod
    def point(cls, c: Context) -> "ChoicePrior":
        """All mass on a single context."""
        n = c.n_mechanisms

        def onehot(k: int) -> tuple[Fraction, ...]:
            return tuple(Fraction(int(i == k - 1)) for i in range(n))

        return cls(
            tuple(Fraction(s.bit) for s in c.alpha),
            tuple(Fraction(s.bit) for s in c.beta),
            onehot(c.gamma_a),
            onehot(c.gamma_b),
        )

    def wing_probability(self, wing: str, outputs: tuple[Setting, ...], choice: int) -> Fraction:
        mech, pick = (self.mech_z_a, self.choice_a) if wing == "A" else (self.mech_z_b, self.choice_b)
        p = pick[choice - 1]
        for q, s in zip(mech, outputs):
            p *= q if s is MZ else 1 - q
        return p

    def probability(self, c: Context) -> Fraction:
        return self.wing_probability("A", c.alpha, c.gamma_a) * self.wing_probability("B", c.beta, c.gamma_b)

    def setting_marginal(self, wing: str) -> dict[Setting, Fraction]:
        """p(M) at one wing, summing the mechanism outputs and the choice out."""
        n = self.n_mechanisms
        out = {MX: Fraction(0), MZ: Fraction(0)}
        for outputs in product(SETTINGS, repeat=n):
            for g in range(1, n + 1):
                out[outputs[g - 1]] += self.wing_probability(wing, outputs, g)
        return out

    def to_dict(self) -> dict:
        return {k: [str(v) for v in getattr(self, k)] for k in ("mech_z_a", "mech_z_b", "choice_a", "choice_b")}

    @classmethod
    def from_dict(cls, obj: dict) -> "ChoicePrior":
        return cls(*(tuple(Fraction(v) for v in obj[k]) for k in ("mech_z_a", "mech_z_b", "choice_a", "choice_b")))
