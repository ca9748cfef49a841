"""Replicate workers and the exact verification suites.

Every replicate draws from its own stream, derived from ``(seed, index)``,
so results do not depend on how replicates are spread over workers.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
from scipy import integrate

from . import _kernels, crt, cut_process, replant, stats
from .gw_sampler import PlantedTree, enumerate_planar_trees, plant, sample_conditioned_tree, tree_from_offspring
from .offspring import OffspringLaw, make_offspring


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    # same stream as SeedSequence(seed).spawn(index + 1)[index]
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def cut_counts(law: OffspringLaw, n: int, ks, rng: np.random.Generator) -> dict[int, int]:
    """N for each k on one tree and one removal order; marks drawn with replacement."""
    planted = plant(sample_conditioned_tree(law, n, rng))
    schedule = cut_process.sample_schedule(n, rng)
    return {k: cut_process.count_cuts(planted, schedule, rng.integers(1, n + 1, size=k)) for k in ks}


def discrete_matrix(law: OffspringLaw, n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """delta_n between the root and m uniform edges, divided by sigma sqrt(n)."""
    planted = plant(sample_conditioned_tree(law, n, rng))
    ct = cut_process.build_cut_tree(planted, cut_process.sample_schedule(n, rng))
    points = rng.integers(1, n + 1, size=m).tolist()
    return cut_process.distance_matrix(ct, points) / (law.sigma * math.sqrt(n))


def continuum_matrix(k: int, m: int, rng: np.random.Generator) -> np.ndarray:
    return crt.delta_matrix_estimate(k, m, rng)


def second_moment_statistic(planted: PlantedTree, i: int, reps: int, rng: np.random.Generator,
                     chunk: int = 10_000) -> tuple[float, float]:
    """Mean and standard error of |n^-1/2 delta - delta'|^2 - n^-1/2 delta' over continuous schedules."""
    n = planted.n
    planted.vertex_of_edge(i)  # validates the label
    leaf = i
    vals = []
    done = 0
    while done < reps:
        size = min(chunk, reps - done)
        clocks = rng.exponential(math.sqrt(n), size=(size, n))
        depth, mod = _kernels.second_moment_batch(planted.up, clocks, leaf)
        scaled = depth / math.sqrt(n)
        vals.append((scaled - mod) ** 2 - mod / math.sqrt(n))
        done += size
    y = np.concatenate(vals)
    return float(y.mean()), float(y.std(ddof=1) / math.sqrt(y.size))


# ---------------------------------------------------------------- suites


def suite_oracle(max_n: int = 6) -> stats.SuiteReport:
    """Cut-tree depths averaged over all removal orders against a forward simulation and the closed form."""
    with stats.Timer() as tm:
        checked = 0
        bad = 0
        for n in range(1, max_n + 1):
            for code in enumerate_planar_trees(n):
                planted = plant(tree_from_offspring(code))
                forward = [0] * (n + 1)
                backward = [0] * (n + 1)
                perms = 0
                for perm in itertools.permutations(range(1, n + 1)):
                    fwd = cut_process.simulate_deletion(planted, perm)
                    ct = cut_process.build_cut_tree(planted, cut_process.RemovalSchedule(perm))
                    for i in range(1, n + 1):
                        forward[i] += fwd[i]
                        backward[i] += cut_process.cut_distance(ct, 0, i)
                    perms += 1
                for i in range(1, n + 1):
                    exact = cut_process.expected_cut_distance_exact(planted, i)
                    checked += 1
                    if not (Fraction(forward[i], perms) == Fraction(backward[i], perms) == exact):
                        bad += 1
    return stats.SuiteReport("exact_oracle", float(bad), 0.0, bad == 0, n=max_n,
                             runtime_ms=tm.ms, extra={"cases": checked})


def second_moment_trees(n: int, rng: np.random.Generator) -> list[PlantedTree]:
    """Mixed shapes: a path, a star, a binary-ish caterpillar and random conditioned trees."""
    path = [1] * (n - 1) + [0]
    star = [n - 1] + [0] * (n - 1)
    # caterpillar: spine vertices with one pendant leaf each
    cater: list[int] = []
    spine = (n + 1) // 2
    for _ in range(spine - 1):
        cater.append(2)
    cater.append(0 if 2 * spine - 1 == n else 1)
    while len(cater) < n:
        cater.append(0)
    trees = [tree_from_offspring(path), tree_from_offspring(star), tree_from_offspring(cater)]
    trees.append(sample_conditioned_tree(make_offspring("poisson1"), n, rng))
    trees.append(sample_conditioned_tree(make_offspring("geometric_half"), n, rng))
    return [plant(t) for t in trees]


def suite_second_moment(seed: int = 0, n: int = 30, reps: int = 20_000, z: float = 3.0) -> stats.SuiteReport:
    rng = np.random.default_rng(seed)
    with stats.Timer() as tm:
        worst = 0.0
        for planted in second_moment_trees(n, rng):
            i = int(rng.integers(1, n + 1))
            mean, se = second_moment_statistic(planted, i, reps, rng)
            worst = max(worst, abs(mean) / se)
    return stats.SuiteReport("second_moment", worst, z, worst <= z, n=n, reps=reps, seed=seed, runtime_ms=tm.ms)


def suite_replant(max_n: int = 6, random_trees: int = 200, seed: int = 0) -> stats.SuiteReport:
    rng = np.random.default_rng(seed)
    with stats.Timer() as tm:
        failures = 0
        for n in range(1, max_n + 1):
            for code in enumerate_planar_trees(n):
                for v in range(1, n + 1):
                    p = replant.pointed(code, v)
                    if replant.replant_transform(replant.replant_transform(p)) != p:
                        failures += 1
                    if not replant.distance_profile_identity(p):
                        failures += 1
        law = make_offspring("geometric_half")
        for _ in range(random_trees):
            n = int(rng.integers(1, 201))
            p = replant.PointedPlantedTree(plant(sample_conditioned_tree(law, n, rng)), int(rng.integers(1, n + 1)))
            if replant.replant_transform(replant.replant_transform(p)) != p:
                failures += 1
        for kind, sizes in (("binary", (1, 3, 5)), ("geometric_half", (1, 2, 3, 4))):
            law = make_offspring(kind)
            for n in sizes:
                measure = replant.enumerate_gw_star(law, n)
                if replant.pushforward(measure) != measure:
                    failures += 1
    return stats.SuiteReport("replant", float(failures), 0.0, failures == 0, n=max_n,
                             seed=seed, runtime_ms=tm.ms)


def suite_chi_cdf(max_k: int = 6, tol: float = 1e-8) -> stats.SuiteReport:
    with stats.Timer() as tm:
        worst = 0.0
        for k in range(1, max_k + 1):
            for x in np.linspace(0.0, 10.0, 41):
                ref, _ = integrate.quad(lambda s: stats.chi2k_pdf(k, s), 0.0, x, epsabs=1e-13, epsrel=1e-12)
                worst = max(worst, abs(stats.chi2k_cdf(k, x) - ref))
    return stats.SuiteReport("chi_cdf_quadrature", worst, tol, worst <= tol, runtime_ms=tm.ms)


def run_verify(seed: int = 0) -> list[stats.SuiteReport]:
    return [suite_oracle(), suite_second_moment(seed), suite_replant(seed=seed), suite_chi_cdf()]
