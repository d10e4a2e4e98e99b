"""Lattice points of the discretized probability simplex.

A hidden-variables distribution over ``n_values`` outcomes with resolution
``denominator`` is a vector of nonnegative integer numerators summing to the
denominator.  Points are ordered reverse-lexicographically by numerator
vector, so ``(L, 0, ..., 0)`` has rank 0 and ``(0, ..., 0, L)`` is last.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Iterator, Sequence


@dataclass(frozen=True)
class LatticeDistribution:
    """Probabilities ``numerators[i] / denominator`` over ``len(numerators)`` values."""

    numerators: tuple[int, ...]
    denominator: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "numerators", tuple(int(n) for n in self.numerators))
        if self.denominator < 1:
            raise ValueError(f"denominator must be >= 1, got {self.denominator}")
        if not self.numerators:
            raise ValueError("at least one hidden-variable value is required")
        if any(n < 0 for n in self.numerators):
            raise ValueError(f"numerators must be nonnegative: {self.numerators}")
        if sum(self.numerators) != self.denominator:
            raise ValueError(
                f"numerators {self.numerators} do not sum to {self.denominator}"
            )

    @property
    def n_values(self) -> int:
        return len(self.numerators)

    def probability(self, i: int) -> Fraction:
        return Fraction(self.numerators[i], self.denominator)

    def probabilities(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(n, self.denominator) for n in self.numerators)

    @classmethod
    def point_mass(cls, n_values: int, index: int, denominator: int) -> "LatticeDistribution":
        nums = [0] * n_values
        nums[index] = denominator
        return cls(tuple(nums), denominator)

    @classmethod
    def uniform(cls, n_values: int, denominator: int) -> "LatticeDistribution":
        if denominator % n_values:
            raise ValueError(f"{denominator} is not divisible by {n_values}")
        return cls((denominator // n_values,) * n_values, denominator)


def _check_dims(n_values: int, denominator: int) -> None:
    if n_values < 1:
        raise ValueError(f"number of hidden-variable values must be >= 1, got {n_values}")
    if denominator < 1:
        raise ValueError(f"lattice denominator must be >= 1, got {denominator}")


def _n_points(slots: int, mass: int) -> int:
    # compositions of `mass` into `slots` nonnegative parts; mass 0 allowed
    return comb(mass + slots - 1, slots - 1)


def count_configurations(n_values: int, denominator: int) -> int:
    """Number of lattice points, ``C(L + n - 1, n - 1)``, as an exact int."""
    _check_dims(n_values, denominator)
    return _n_points(n_values, denominator)


def enumerate_configurations(n_values: int, denominator: int) -> Iterator[LatticeDistribution]:
    """Yield every lattice point once, in reverse-lexicographic order.

    Only the current point is held in memory.
    """
    total = count_configurations(n_values, denominator)
    yield from enumerate_range(n_values, denominator, 0, total)


def rank(d: LatticeDistribution) -> int:
    """Position of ``d`` in :func:`enumerate_configurations` order."""
    r = 0
    remaining = d.denominator
    n = d.n_values
    for i, x in enumerate(d.numerators[:-1]):
        slots_after = n - i - 1
        deficit = remaining - x
        if deficit > 0:
            # points sharing the prefix but with a larger value here
            r += comb(deficit - 1 + slots_after, slots_after)
        remaining = deficit
    return r


def unrank(n_values: int, denominator: int, r: int) -> LatticeDistribution:
    """Inverse of :func:`rank`."""
    total = count_configurations(n_values, denominator)
    if not 0 <= r < total:
        raise ValueError(f"rank {r} out of range [0, {total})")
    nums = []
    remaining = denominator
    for i in range(n_values - 1):
        slots_after = n_values - i - 1
        # smallest deficit t with C(t + k, k) > r
        lo, hi = 0, remaining
        while lo < hi:
            mid = (lo + hi) // 2
            if comb(mid + slots_after, slots_after) > r:
                hi = mid
            else:
                lo = mid + 1
        t = lo
        if t > 0:
            r -= comb(t - 1 + slots_after, slots_after)
        nums.append(remaining - t)
        remaining = t
    nums.append(remaining)
    return LatticeDistribution(tuple(nums), denominator)


def enumerate_range(n_values: int, denominator: int, start: int, stop: int) -> Iterator[LatticeDistribution]:
    """Points with ranks in ``[start, stop)``; lets callers partition the lattice."""
    total = count_configurations(n_values, denominator)
    stop = min(stop, total)
    if start >= stop:
        return
    d = unrank(n_values, denominator, start)
    current = list(d.numerators)
    for _ in range(stop - start):
        yield LatticeDistribution(tuple(current), denominator)
        _advance(current)


def _advance(current: list[int]) -> None:
    """Step ``current`` in place to its reverse-lex successor (no-op past the end)."""
    last = len(current) - 1
    i = last - 1
    while i >= 0 and current[i] == 0:
        i -= 1
    if i < 0:
        return
    tail = current[last]
    current[last] = 0
    current[i] -= 1
    current[i + 1] = tail + 1


def as_lattice(probabilities: Sequence[Fraction | int], denominator: int) -> LatticeDistribution:
    """Convert exact probabilities to lattice numerators over ``denominator``."""
    nums = []
    for p in probabilities:
        scaled = Fraction(p) * denominator
        if scaled.denominator != 1:
            raise ValueError(f"probability {p} is not a multiple of 1/{denominator}")
        nums.append(int(scaled))
    return LatticeDistribution(tuple(nums), denominator)
