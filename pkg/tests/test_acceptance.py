"""Acceptance criteria at their stated sizes and tolerances.

Each test records a one-line verdict; the lines are printed in the pytest
terminal summary (and directly when this file is run as a script).
"""

import math
import time

import numpy as np
import pytest

from gwcut import crt, experiments, replant, stats
from gwcut.cut_process import build_cut_tree, count_cuts, expected_cut_distance_exact, reduce_cut_tree, sample_schedule
from gwcut.gw_sampler import enumerate_planar_trees, plant, sample_conditioned_tree, tree_from_offspring
from gwcut.offspring import make_offspring

pytestmark = pytest.mark.acceptance

VERDICTS: list[str] = []
SEED = 2024


def verdict(number, ok, detail, started):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}  ({time.perf_counter() - started:.1f}s)"
    VERDICTS.append(line)
    print(line)
    return ok


def _cut_ks(kind, n, reps, seed):
    law = make_offspring(kind)
    samples = {1: [], 2: [], 3: []}
    for r in range(reps):
        counts = experiments.cut_counts(law, n, (1, 2, 3), experiments.replicate_rng(seed, r))
        for k, c in counts.items():
            samples[k].append(c / (law.sigma * math.sqrt(n)))
    return {k: stats.ks_statistic(v, stats.rayleigh(k)) for k, v in samples.items()}


def test_criterion_01_chi_poisson():
    t0 = time.perf_counter()
    ks = _cut_ks("poisson1", 10_000, 5000, SEED)
    ok = all(v < 0.03 for v in ks.values())
    detail = "poisson1 n=1e4 reps=5000 KS vs Chi(2k) < 0.03: " + ", ".join(f"k={k}:{v:.4f}" for k, v in ks.items())
    assert verdict(1, ok, detail, t0), detail


@pytest.mark.parametrize("kind,n", [("geometric_half", 10_000), ("binary", 10_001)])
def test_criterion_02_universality(kind, n):
    t0 = time.perf_counter()
    ks = _cut_ks(kind, n, 5000, SEED + 1)
    ok = all(v < 0.04 for v in ks.values())
    detail = f"{kind} n={n} reps=5000 KS < 0.04: " + ", ".join(f"k={k}:{v:.4f}" for k, v in ks.items())
    assert verdict(2, ok, detail, t0), detail


def test_criterion_03_distance_marginals():
    t0 = time.perf_counter()
    law = make_offspring("poisson1")
    root, pair = [], []
    for r in range(5000):
        mat = experiments.discrete_matrix(law, 10_000, 2, experiments.replicate_rng(SEED + 3, r))
        root.append(mat[0, 1])
        pair.append(mat[1, 2])
    ks_root = stats.ks_statistic(root, stats.rayleigh())
    ks_pair = stats.ks_statistic(pair, stats.rayleigh())
    ok = ks_root < 0.03 and ks_pair < 0.04
    detail = f"delta(0,xi) KS {ks_root:.4f} < 0.03, delta(xi1,xi2) KS {ks_pair:.4f} < 0.04"
    assert verdict(3, ok, detail, t0), detail


def test_criterion_04_exact_oracle():
    t0 = time.perf_counter()
    cases = bad = 0
    for n in range(1, 7):
        for code in enumerate_planar_trees(n):
            planted = plant(tree_from_offspring(code))
            for i in range(1, n + 1):
                cases += 1
                bad += stats.permutation_oracle(planted, i) != expected_cut_distance_exact(planted, i)
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and elapsed < 60
    detail = f"{cases} (tree, edge) cases with n<=6, {bad} mismatches, runtime {elapsed:.1f}s < 60s"
    assert verdict(4, ok, detail, t0), detail


def test_criterion_05_second_moment():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED + 5)
    zs = []
    for planted in experiments.second_moment_trees(100, rng):
        i = int(rng.integers(1, 101))
        mean, se = experiments.second_moment_statistic(planted, i, 100_000, rng)
        zs.append(abs(mean) / se)
    ok = all(z <= 3 for z in zs)
    detail = "5 trees n=100, 1e5 schedules each, |mean|/se <= 3: " + ", ".join(f"{z:.2f}" for z in zs)
    assert verdict(5, ok, detail, t0), detail


def _instances(count, seed):
    rng = np.random.default_rng(seed)
    law = make_offspring("poisson1")
    for _ in range(count):
        n = int(rng.integers(1, 1001))
        planted = plant(sample_conditioned_tree(law, n, rng))
        schedule = sample_schedule(n, rng)
        k = int(rng.integers(1, 7))
        yield planted, schedule, rng.integers(1, n + 1, size=k), k


def test_criterion_06_length_bound():
    t0 = time.perf_counter()
    worst = -math.inf
    violations = 0
    for planted, schedule, marked, k in _instances(10_000, SEED + 6):
        red = reduce_cut_tree(build_cut_tree(planted, schedule), marked)
        gap = abs(red.internal_count - red.total_length)
        worst = max(worst, gap - k)
        violations += gap > k
    detail = f"1e4 instances, |N - L_k| <= k violations: {violations} (max |N-L_k| - k = {worst:.0f})"
    assert verdict(6, violations == 0, detail, t0), detail


def test_criterion_07_continuum():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED + 7)
    parts = []
    ok = True
    for k in (1, 2, 5):
        total = [crt.line_break_reduced_tree(k, rng).total_length for _ in range(5000)]
        ks = stats.ks_statistic(total, stats.rayleigh(k))
        ok &= ks < 0.03
        parts.append(f"L(k={k}) {ks:.4f}")
    heights, deltas = [], []
    for _ in range(1000):
        mat = crt.delta_matrix_estimate(2000, 2, rng)
        heights.append(mat[0, 1])
        deltas.append(mat[1, 2])
    ks_h = stats.ks_statistic(heights, stats.rayleigh())
    ks_d = stats.ks_statistic(deltas, stats.rayleigh())
    ok &= ks_h < 0.05 and ks_d < 0.06
    parts += [f"height {ks_h:.4f} < 0.05", f"delta {ks_d:.4f} < 0.06"]
    detail = "; ".join(parts)
    assert verdict(7, ok, detail, t0), detail


def test_criterion_08_replant():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED + 8)
    law = make_offspring("geometric_half")
    broken = 0
    for _ in range(10_000):
        n = int(rng.integers(1, 201))
        p = replant.PointedPlantedTree(plant(sample_conditioned_tree(law, n, rng)), int(rng.integers(1, n + 1)))
        broken += replant.replant_transform(replant.replant_transform(p)) != p
    invariant = []
    for kind, sizes in (("binary", (1, 3, 5)), ("geometric_half", (1, 2, 3, 4))):
        for n in sizes:
            measure = replant.enumerate_gw_star(make_offspring(kind), n)
            invariant.append(replant.pushforward(measure) == measure)
    ok = broken == 0 and all(invariant)
    detail = f"involution failures {broken}/10000; exact invariance {sum(invariant)}/{len(invariant)} cells"
    assert verdict(8, ok, detail, t0), detail


def test_criterion_09_mu_bound():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED + 9)
    parts = []
    ok = True
    for n, reps in ((100, 2000), (1000, 500)):
        s = math.sqrt(n)
        rep = stats.mu_bound_check(make_offspring("poisson1"), n, [s / 2, s, 2 * s, 4 * s], reps, rng, cap=100.0)
        ok &= rep.passed
        parts.append(f"n={n}: C={rep.fitted_c:.3f}")
    detail = "fitted C <= 100: " + ", ".join(parts)
    assert verdict(9, ok, detail, t0), detail


def test_criterion_10_count_cuts():
    t0 = time.perf_counter()
    mismatches = 0
    for planted, schedule, marked, _ in _instances(10_000, SEED + 10):
        red = reduce_cut_tree(build_cut_tree(planted, schedule), marked)
        mismatches += count_cuts(planted, schedule, marked) != red.internal_count
    detail = f"1e4 instances, count_cuts != internal-node count: {mismatches}"
    assert verdict(10, mismatches == 0, detail, t0), detail


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
