"""Command-line front end: ``gwcut {sample,cutstats,matrix,verify}``.

CSV columns
  cutstats: replicate, k, n, N, normalized      (normalized = N / (sigma sqrt n))
  matrix:   replicate, source, d_i_j for 0 <= i, j <= m
            (source is "discrete" or "continuum"; point 0 is the root)

Exit codes: 0 success, 1 a statistical or exact check failed, 2 usage error.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import multiprocessing
import os
import sys
from contextlib import contextmanager

import numpy as np

from . import experiments, stats
from .errors import GWCutError, PreconditionError
from .gw_sampler import sample_conditioned_tree, write_tree
from .offspring import BUILTIN_KINDS, make_offspring

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
LOW_POWER_REPS = 100


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get("GWCUT_THREADS", "1")))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--law", choices=BUILTIN_KINDS, default="poisson1")
    common.add_argument("--seed", type=int, default=None, help="required for random commands")
    common.add_argument("--reps", type=int, default=1)
    common.add_argument("--threads", type=int, default=_default_threads(),
                        help="worker processes (default: $GWCUT_THREADS or 1)")
    common.add_argument("--out", default=None, help="output path (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--sorted", action="store_true", help="emit replicates in index order")

    parser = _Parser(prog="gwcut", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sample", parents=[common], help="write conditioned GW trees")
    p.add_argument("--n", type=int, required=True)

    p = sub.add_parser("cutstats", parents=[common], help="N(T,k)/(sigma sqrt n) samples and KS vs Chi(2k)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--threshold", type=float, default=0.03)

    p = sub.add_parser("matrix", parents=[common], help="discrete and continuum cut-distance matrices")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--k", type=int, default=2000, help="leaves of the continuum reduced tree (0 skips it)")
    p.add_argument("--threshold", type=float, default=0.03)

    p = sub.add_parser("verify", parents=[common], help="exact oracle and invariance suites")
    return parser


# ------------------------------------------------------------------ workers


def _sample_task(args):
    law, n, seed, index = args
    tree = sample_conditioned_tree(make_offspring(law), n, experiments.replicate_rng(seed, index))
    buf = io.StringIO()
    write_tree(tree, buf)
    return index, buf.getvalue()


def _cutstats_task(args):
    law, n, k, seed, index = args
    law_obj = make_offspring(law)
    counts = experiments.cut_counts(law_obj, n, [k], experiments.replicate_rng(seed, index))
    return index, counts[k], counts[k] / (law_obj.sigma * math.sqrt(n))


def _matrix_task(args):
    law, n, m, k, seed, index = args
    rng = experiments.replicate_rng(seed, index)
    disc = experiments.discrete_matrix(make_offspring(law), n, m, rng)
    cont = experiments.continuum_matrix(k, m, rng) if k > 0 else None
    return index, disc, cont


def _run(func, tasks, threads: int, ordered: bool):
    if threads <= 1:
        return [func(t) for t in tasks]
    with multiprocessing.get_context("spawn").Pool(threads) as pool:
        if ordered:
            return list(pool.imap(func, tasks, chunksize=8))
        return list(pool.imap_unordered(func, tasks, chunksize=8))


# ------------------------------------------------------------------ output


@contextmanager
def _open_out(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _emit(cfg, header: list[str], rows: list[list], report: dict) -> None:
    if cfg.format == "json":
        doc = {"report": report, "columns": header, "rows": rows}
        with _open_out(cfg.out) as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
        return
    with _open_out(cfg.out) as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")
    if cfg.out is None:
        print(json.dumps(report), file=sys.stderr)
    else:
        with open(cfg.out + ".report.json", "w") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _ks_report(name, values, law, threshold, cfg, ms, extra=None) -> dict:
    ks = stats.ks_statistic(values, law)
    low = len(values) < LOW_POWER_REPS
    rep = stats.SuiteReport(name, ks, threshold, ks < threshold, n=cfg.n, reps=cfg.reps, seed=cfg.seed,
                            runtime_ms=ms, extra={"low_power": low, **(extra or {})})
    return rep.as_dict()


# ------------------------------------------------------------------ commands


def _check(cfg) -> None:
    if cfg.command != "verify" and cfg.seed is None:
        raise UsageError("--seed is required")
    if cfg.reps < 1:
        raise UsageError("--reps must be at least 1")
    if cfg.threads < 1:
        raise UsageError("--threads must be at least 1")
    if getattr(cfg, "n", 1) < 1:
        raise UsageError("--n must be positive")
    if cfg.command != "verify":
        p = make_offspring(cfg.law).support_gcd
        if (cfg.n - 1) % p:
            raise UsageError(f"n-1 must be divisible by p={p} for law {cfg.law} (got n={cfg.n})")


def cmd_sample(cfg) -> int:
    tasks = [(cfg.law, cfg.n, cfg.seed, i) for i in range(cfg.reps)]
    results = _run(_sample_task, tasks, cfg.threads, cfg.sorted)
    if cfg.sorted:
        results.sort()
    with _open_out(cfg.out) as fh:
        if cfg.format == "json":
            trees = [{"replicate": i, "parent": [int(x) for x in txt.split("\n")[1].split()]} for i, txt in results]
            json.dump({"law": cfg.law, "n": cfg.n, "seed": cfg.seed, "trees": trees}, fh)
            fh.write("\n")
        else:
            for _, txt in results:
                fh.write(txt)
    return EXIT_OK


def cmd_cutstats(cfg) -> int:
    if cfg.k < 1:
        raise UsageError("--k must be at least 1")
    with stats.Timer() as tm:
        tasks = [(cfg.law, cfg.n, cfg.k, cfg.seed, i) for i in range(cfg.reps)]
        results = _run(_cutstats_task, tasks, cfg.threads, cfg.sorted)
    if cfg.sorted:
        results.sort()
    rows = [[i, cfg.k, cfg.n, count, norm] for i, count, norm in results]
    values = [r[4] for r in rows]
    report = _ks_report(f"cutstats_chi{2 * cfg.k}", values, stats.rayleigh(cfg.k), cfg.threshold, cfg, tm.ms,
                        {"law": cfg.law, "k": cfg.k})
    _emit(cfg, ["replicate", "k", "n", "N", "normalized"], rows, report)
    return EXIT_OK if report["pass"] or report["low_power"] else EXIT_FAIL


def cmd_matrix(cfg) -> int:
    if cfg.m < 1:
        raise UsageError("--m must be at least 1")
    if cfg.k < 0 or 0 < cfg.k < cfg.m:
        raise UsageError("--k must be 0 or at least --m")
    m = cfg.m
    with stats.Timer() as tm:
        tasks = [(cfg.law, cfg.n, m, cfg.k, cfg.seed, i) for i in range(cfg.reps)]
        results = _run(_matrix_task, tasks, cfg.threads, cfg.sorted)
    if cfg.sorted:
        results.sort(key=lambda r: r[0])
    header = ["replicate", "source"] + [f"d_{i}_{j}" for i in range(m + 1) for j in range(m + 1)]
    rows = []
    for idx, disc, cont in results:
        rows.append([idx, "discrete"] + [float(x) for x in disc.ravel()])
        if cont is not None:
            rows.append([idx, "continuum"] + [float(x) for x in cont.ravel()])
    entries = {}
    ok = True
    for source, pos in (("discrete", 1), ("continuum", 2)):
        mats = [r[pos] for r in results if r[pos] is not None]
        if not mats:
            continue
        stack = np.stack(mats)
        for i in range(m + 1):
            for j in range(i + 1, m + 1):
                col = stack[:, i, j]
                ks = stats.ks_statistic(col, stats.rayleigh())
                entries[f"{source}_d_{i}_{j}"] = {"ks": ks, "mean": float(col.mean())}
                if source == "discrete":
                    ok &= ks < cfg.threshold
    worst = max(v["ks"] for k, v in entries.items() if k.startswith("discrete"))
    report = stats.SuiteReport("matrix_marginals", worst, cfg.threshold, bool(ok), n=cfg.n, reps=cfg.reps,
                               seed=cfg.seed, runtime_ms=tm.ms,
                               extra={"law": cfg.law, "m": m, "k": cfg.k, "low_power": cfg.reps < LOW_POWER_REPS,
                                      "entries": entries}).as_dict()
    _emit(cfg, header, rows, report)
    return EXIT_OK if report["pass"] or report["low_power"] else EXIT_FAIL


def cmd_verify(cfg) -> int:
    reports = [r.as_dict() for r in experiments.run_verify(seed=0 if cfg.seed is None else cfg.seed)]
    ok = all(r["pass"] for r in reports)
    with _open_out(cfg.out) as fh:
        json.dump({"pass": ok, "suites": reports}, fh, indent=2)
        fh.write("\n")
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"sample": cmd_sample, "cutstats": cmd_cutstats, "matrix": cmd_matrix, "verify": cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        cfg = parser.parse_args(argv)
        _check(cfg)
        return COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        print(f"gwcut: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PreconditionError as exc:
        print(f"gwcut: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GWCutError as exc:
        print(f"gwcut: error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
