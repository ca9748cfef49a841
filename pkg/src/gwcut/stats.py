"""Reference laws, goodness of fit and brute-force oracles."""

from __future__ import annotations

import itertools
import json
import math
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import PreconditionError
from .gw_sampler import PlantedTree, plant, sample_conditioned_tree
from .offspring import OffspringLaw

_EPS = 1e-16


@dataclass
class EmpiricalSample:
    values: np.ndarray
    weights: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float)
            if self.weights.shape != self.values.shape or np.any(self.weights < 0):
                raise PreconditionError("weights must be nonnegative and match values")
        if not np.all(np.isfinite(self.values)):
            raise PreconditionError("sample values must be finite")


@dataclass(frozen=True)
class ReferenceLaw:
    kind: str
    k: int = 1
    rate: float = 1.0

    def __post_init__(self):
        if self.kind not in ("rayleigh", "chi", "exponential"):
            raise PreconditionError(f"unknown reference law {self.kind!r}")
        if self.k < 1 or self.rate <= 0:
            raise PreconditionError("need k >= 1 and rate > 0")

    def cdf(self, x):
        if self.kind == "rayleigh":
            return rayleigh_cdf(x)
        if self.kind == "chi":
            return chi2k_cdf(self.k, x)
        return exponential_cdf(self.rate, x)

    def mean(self) -> float:
        if self.kind == "exponential":
            return 1.0 / self.rate
        k = 1 if self.kind == "rayleigh" else self.k
        # mean of Chi(2k) = sqrt(2) Gamma(k + 1/2) / Gamma(k)
        return math.sqrt(2.0) * math.exp(math.lgamma(k + 0.5) - math.lgamma(k))


def rayleigh(k: int = 1) -> ReferenceLaw:
    return ReferenceLaw("rayleigh") if k == 1 else ReferenceLaw("chi", k=k)


def rayleigh_cdf(x):
    x = np.asarray(x, dtype=float)
    out = np.where(x > 0, -np.expm1(-0.5 * np.square(np.maximum(x, 0.0))), 0.0)
    return out if out.ndim else float(out)


def exponential_cdf(rate: float, x):
    x = np.asarray(x, dtype=float)
    out = np.where(x > 0, -np.expm1(-rate * np.maximum(x, 0.0)), 0.0)
    return out if out.ndim else float(out)


def _gamma_series(a: float, x: float) -> float:
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(10_000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_continued_fraction(a: float, x: float) -> float:
    # modified Lentz evaluation of the upper tail Q(a, x)
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def regularized_lower_gamma(a: float, x: float) -> float:
    """P(a, x) by series below x = a + 1 and continued fraction above."""
    if x <= 0:
        return 0.0
    if x < a + 1.0:
        return min(1.0, _gamma_series(a, x))
    return max(0.0, 1.0 - _gamma_continued_fraction(a, x))


def chi2k_cdf(k: int, x):
    """Distribution function of Chi(2k): P(k, x^2 / 2)."""
    if k < 1:
        raise PreconditionError("k must be >= 1")
    arr = np.asarray(x, dtype=float)
    flat = [regularized_lower_gamma(float(k), 0.5 * v * v) if v > 0 else 0.0 for v in arr.ravel()]
    out = np.array(flat).reshape(arr.shape)
    return out if out.ndim else float(out)


def chi2k_pdf(k: int, x):
    x = np.asarray(x, dtype=float)
    logc = (1 - k) * math.log(2.0) - math.lgamma(k)
    safe = np.maximum(x, 1e-300)
    out = np.where(x > 0, np.exp(logc + (2 * k - 1) * np.log(safe) - 0.5 * safe * safe), 0.0)
    return out if out.ndim else float(out)


def ks_statistic(sample, law: ReferenceLaw | Callable) -> float:
    """Two-sided Kolmogorov distance between the empirical CDF and ``law``."""
    if not isinstance(sample, EmpiricalSample):
        sample = EmpiricalSample(sample)
    values = sample.values
    if values.size == 0:
        raise PreconditionError("empty sample")
    cdf = law.cdf if isinstance(law, ReferenceLaw) else law
    order = np.argsort(values, kind="stable")
    x = values[order]
    if sample.weights is None:
        w = np.full(x.size, 1.0 / x.size)
    else:
        w = sample.weights[order] / sample.weights.sum()
    upper = np.cumsum(w)
    # collapse ties so each distinct value sees the full jump
    last = np.r_[x[1:] != x[:-1], True]
    first = np.r_[True, x[1:] != x[:-1]]
    upper_at = upper[last]
    lower_at = (upper - w)[first]
    f = np.asarray(cdf(x[last]), dtype=float)
    return float(max(np.max(upper_at - f), np.max(f - lower_at)))


def rayleigh_quantile(u):
    return np.sqrt(-2.0 * np.log1p(-np.asarray(u, dtype=float)))


def permutation_oracle(planted: PlantedTree, i: int, max_n: int = 7) -> Fraction:
    """Average of the cut depth of leaf i over all n! removal orders, exactly."""
    from .cut_process import simulate_deletion

    n = planted.n
    if n > max_n:
        raise PreconditionError(f"permutation oracle is capped at n={max_n}")
    planted.vertex_of_edge(i)
    total = 0
    count = 0
    for perm in itertools.permutations(range(1, n + 1)):
        total += simulate_deletion(planted, perm)[i]
        count += 1
    return Fraction(total, count)


def mass_bound_shape(t: float, n: int) -> float:
    """exp(-s) / (n (1 - exp(-s))^2) with s = t / sqrt(n)."""
    s = t / math.sqrt(n)
    return math.exp(-s) / (n * (-math.expm1(-s)) ** 2)


@dataclass
class MuBoundReport:
    n: int
    t_grid: list
    estimates: list
    std_errors: list
    shape: list
    fitted_c: float
    cap: float
    passed: bool
    generation_ratio: float

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def mu_bound_check(
    law: OffspringLaw,
    n: int,
    t_grid: Sequence[float],
    reps: int,
    rng: np.random.Generator,
    cap: float = 1e3,
) -> MuBoundReport:
    """Monte Carlo estimate of the mean normalised component size of a random edge.

    Each replicate draws a fresh conditioned tree, exponential clocks of rate
    1/sqrt(n) on its edges and a uniform edge; all grid times share the same
    clocks so the estimates are coupled across t.  The fitted constant is the
    smallest C for which the estimate stays below ``C * mass_bound_shape(t, n)``.
    """
    t_grid = [float(t) for t in t_grid]
    if any(t <= 0 for t in t_grid):
        raise PreconditionError("grid times must be positive")
    vals = np.zeros((reps, len(t_grid)))
    gen_max = np.zeros(0)
    for r in range(reps):
        tree = sample_conditioned_tree(law, n, rng)
        planted = plant(tree)
        clocks = rng.exponential(math.sqrt(n), size=n + 1)
        xi = int(rng.integers(1, n + 1))
        for c, t in enumerate(t_grid):
            vals[r, c] = _component_fraction(planted, clocks, t, xi)
        gens = np.bincount(tree.depth[1:])
        if gens.size > gen_max.size:
            gen_max = np.pad(gen_max, (0, gens.size - gen_max.size))
        gen_max[: gens.size] += gens
    est = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / math.sqrt(reps) if reps > 1 else np.full(len(t_grid), np.nan)
    shape = [mass_bound_shape(t, n) for t in t_grid]
    fitted = float(max(e / s for e, s in zip(est, shape)))
    mean_gen = gen_max / reps
    ratio = float(max(mean_gen[k] / k for k in range(1, mean_gen.size))) if mean_gen.size > 1 else 0.0
    return MuBoundReport(
        n=n,
        t_grid=t_grid,
        estimates=est.tolist(),
        std_errors=np.asarray(se).tolist(),
        shape=shape,
        fitted_c=fitted,
        cap=cap,
        passed=bool(np.isfinite(fitted) and fitted <= cap),
        generation_ratio=ratio,
    )


def _component_fraction(planted: PlantedTree, clocks: np.ndarray, t: float, xi: int) -> float:
    """Share of edges still connected to edge xi once every clock <= t has rung."""
    if clocks[xi] <= t:
        return 0.0
    n = planted.n
    edges = np.flatnonzero(clocks[1:] > t) + 1
    graph = coo_matrix((np.ones(edges.size), (edges, planted.up[edges])), shape=(n + 1, n + 1))
    _, labels = connected_components(graph, directed=False)
    return np.count_nonzero(labels[edges] == labels[xi]) / n


@dataclass
class SuiteReport:
    test: str
    statistic: float
    threshold: float
    passed: bool
    n: int | None = None
    reps: int | None = None
    seed: int | None = None
    runtime_ms: float = 0.0
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = {
            "test": self.test,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "pass": self.passed,
            "n": self.n,
            "reps": self.reps,
            "seed": self.seed,
            "runtime_ms": round(self.runtime_ms, 3),
        }
        d.update(self.extra)
        return d


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.ms = 1000.0 * (time.perf_counter() - self.start)
        return False
