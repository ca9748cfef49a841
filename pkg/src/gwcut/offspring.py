"""Critical offspring laws for Galton-Watson trees."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np

from .errors import PreconditionError

BUILTIN_KINDS = ("poisson1", "geometric_half", "binary")

_TOL = 1e-12


@dataclass(frozen=True)
class OffspringLaw:
    """A critical reproduction law.

    ``probabilities`` holds the point masses.  For the two analytic laws with
    unbounded support it is truncated where the remaining mass drops below
    double precision; ``exact_pmf`` and ``pmf`` are defined on all of N.
    """

    name: str
    probabilities: Mapping[int, float]
    mean: float
    variance: float
    support_gcd: int
    bounded: bool = True
    exact_table: Mapping[int, Fraction] | None = field(default=None, repr=False)

    @property
    def sigma(self) -> float:
        return math.sqrt(self.variance)

    def pmf(self, j: int) -> float:
        if j < 0:
            return 0.0
        if self.name == "poisson1":
            return math.exp(-1.0 - math.lgamma(j + 1))
        if self.name == "geometric_half":
            return math.ldexp(1.0, -(j + 1))
        return float(self.probabilities.get(j, 0.0))

    def exact_pmf(self, j: int) -> Fraction:
        """Exact rational point mass; unavailable for Poisson(1)."""
        if j < 0:
            return Fraction(0)
        if self.name == "geometric_half":
            return Fraction(1, 2 ** (j + 1))
        if self.exact_table is None:
            raise PreconditionError(f"law {self.name!r} has no exact rational probabilities")
        return self.exact_table.get(j, Fraction(0))

    @property
    def has_exact(self) -> bool:
        return self.name == "geometric_half" or self.exact_table is not None


def _moments(table: Mapping[int, float]) -> tuple[float, float]:
    mean = math.fsum(j * p for j, p in table.items())
    second = math.fsum(j * j * p for j, p in table.items())
    return mean, second - mean * mean


def _gcd_of_support(table: Mapping[int, float]) -> int:
    g = 0
    for j, p in table.items():
        if p > 0:
            g = math.gcd(g, j)
    return g


def _truncated(pmf, cutoff: float = 1e-300) -> dict[int, float]:
    table = {}
    j = 0
    while True:
        p = pmf(j)
        if p < cutoff and j > 2:
            return table
        table[j] = p
        j += 1


def make_offspring(kind: str, params: Mapping[int, float | Fraction] | None = None) -> OffspringLaw:
    """Build and validate an offspring law.

    ``kind`` is one of ``poisson1``, ``geometric_half``, ``binary`` or
    ``custom``; the latter requires ``params``, a finite table mapping child
    counts to probabilities (floats or Fractions).
    """
    if kind == "poisson1":
        table = _truncated(lambda j: math.exp(-1.0 - math.lgamma(j + 1)))
        return OffspringLaw("poisson1", table, 1.0, 1.0, 1, bounded=False)
    if kind == "geometric_half":
        table = _truncated(lambda j: math.ldexp(1.0, -(j + 1)))
        return OffspringLaw("geometric_half", table, 1.0, 2.0, 1, bounded=False)
    if kind == "binary":
        params = {0: Fraction(1, 2), 2: Fraction(1, 2)}
        name = "binary"
    elif kind == "custom":
        if not params:
            raise PreconditionError("custom law needs a probability table")
        name = "custom"
    else:
        raise PreconditionError(f"unknown offspring law {kind!r}")

    exact = None
    if all(isinstance(p, (int, Fraction)) for p in params.values()):
        exact = {int(j): Fraction(p) for j, p in params.items() if p != 0}
    table = {int(j): float(p) for j, p in params.items() if p != 0}
    if any(j < 0 for j in table) or any(p < 0 for p in table.values()):
        raise PreconditionError("offspring values and probabilities must be nonnegative")
    if abs(math.fsum(table.values()) - 1.0) > _TOL:
        raise PreconditionError("probabilities do not sum to 1")
    mean, var = _moments(table)
    if abs(mean - 1.0) > _TOL:
        raise PreconditionError(f"law is not critical (mean {mean})")
    if var <= 0:
        raise PreconditionError("law must have positive variance")
    return OffspringLaw(name, table, 1.0, var, _gcd_of_support(table), exact_table=exact)


class _HistogramSampler:
    """Draws offspring-count histograms of n i.i.d. variables.

    Values above ``cap`` land in an overflow bin and are then drawn exactly
    from the law conditioned on exceeding ``cap``.
    """

    def __init__(self, law: OffspringLaw, n: int):
        if law.bounded:
            values = np.array(sorted(law.probabilities), dtype=np.int64)
            probs = np.array([law.probabilities[j] for j in values], dtype=float)
            self.cap = None
        else:
            cap = 0
            while cap < n - 1 and law.pmf(cap + 1) >= 1e-17:
                cap += 1
            values = np.arange(cap + 1, dtype=np.int64)
            probs = np.array([law.pmf(j) for j in range(cap + 1)], dtype=float)
            self.cap = cap
        tail = 0.0 if law.bounded else max(0.0, 1.0 - probs.sum())
        self.values = values
        self.law = law
        self.pvals = np.append(probs, tail) / (probs.sum() + tail)

    def draw(self, rng: np.random.Generator, n: int, batch: int) -> np.ndarray:
        return rng.multinomial(n, self.pvals, size=batch)

    def tail_values(self, rng: np.random.Generator, count: int) -> np.ndarray:
        out = np.empty(count, dtype=np.int64)
        for t in range(count):
            u = rng.random()
            j = self.cap + 1
            weights = []
            while True:
                p = self.law.pmf(j)
                weights.append(p)
                if p < 1e-18 * sum(weights):
                    break
                j += 1
            acc = np.cumsum(weights) / sum(weights)
            idx = min(int(np.searchsorted(acc, u, side="right")), len(weights) - 1)
            out[t] = self.cap + 1 + idx
        return out
