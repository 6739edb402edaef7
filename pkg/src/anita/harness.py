"""Benchmark harness: experiment configuration, seed sweeps, trace/summary files, CLI.

Usage::

    anita-bench run --problem synth:1000,100,7,0.05,0.1 --algo gd,anita-gc \\
        --budget-passes 300 --seeds 3 --out results/
    anita-bench verify

Outputs per experiment: one ``<algo>_seed<k>.csv`` trace per run and a
``summary.json``. With ``--timing`` off (the default) ``wall_ns`` is written as
0 so that reruns are byte-identical.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import oracle, schedules, solvers
from .dataio import SynthConfig, generate_synthetic, load_libsvm, normalize_rows
from .problems import FiniteSum, LogisticRegression
from .solvers import RunResult, TraceRecord

log = logging.getLogger("anita")

ALGORITHMS = ("anita-gc", "anita-sc", "gd", "agd", "svrg")
THRESHOLDS = ("1e-2", "1e-3", "1e-4", "1e-6")
SCHEMA_VERSION = 1
CSV_HEADER = ("iter", "grads", "passes", "gap", "wall_ns")

BUNDLED_SYNTH = SynthConfig(n_samples=1000, n_features=100, seed=7, label_noise=0.05, density=0.1)

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem: str
    algorithms: Sequence[str]
    budget_passes: float
    seeds: Sequence[int] = (0,)
    lam: float = 0.0
    log_every: int = 0
    stage1: str = "prob"
    out_dir: Optional[str] = None
    fstar_cache: Optional[str] = None
    normalize: bool = True
    grid_step_passes: float = 1.0
    record_time: bool = False
    workers: int = 1
    eta_scale: float = 1.0

    def __post_init__(self):
        self.algorithms = tuple(self.algorithms)
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.algorithms:
            raise ConfigError("no algorithms given")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {a!r}; choose from {', '.join(ALGORITHMS)}")
        if "anita-sc" in self.algorithms and self.lam <= 0:
            raise ConfigError("anita-sc needs --lambda > 0 (strong convexity)")
        if self.lam < 0:
            raise ConfigError("--lambda must be non-negative")
        if self.stage1 not in ("prob", "derand"):
            raise ConfigError("--stage1 must be prob or derand")
        if not self.seeds:
            raise ConfigError("empty seed list")
        if self.budget_passes < 1:
            raise ConfigError("budget must be at least one data pass")
        if self.grid_step_passes <= 0:
            raise ConfigError("grid step must be positive")


def build_problem(spec: str, lam: float = 0.0, normalize: bool = True) -> FiniteSum:
    """``synth:<n>,<d>,<seed>,<noise>,<density>``, ``libsvm:<path>`` or ``bundled``."""
    kind, _, arg = spec.partition(":")
    if kind == "bundled" and not arg:
        data = generate_synthetic(BUNDLED_SYNTH)
    elif kind == "synth":
        try:
            n, d, seed, noise, density = arg.split(",")
            cfg = SynthConfig(int(n), int(d), int(seed), float(noise), float(density))
        except ValueError as exc:
            raise ConfigError(f"bad synthetic spec {arg!r}: {exc}") from None
        data = generate_synthetic(cfg)
    elif kind == "libsvm":
        data = load_libsvm(arg)
        if normalize:
            data = normalize_rows(data)
    else:
        raise ConfigError(f"unknown problem spec {spec!r}")
    return LogisticRegression(data, lam)


def _execute(task) -> RunResult:
    problem, algo, seed, budget, fstar, cfg = task
    stage1 = schedules.DERANDOMIZED if cfg.stage1 == "derand" else schedules.PROBABILISTIC
    if algo == "anita-gc":
        return solvers.run_anita(problem, solvers.GENERAL_CONVEX, budget, seed, cfg.log_every,
                                 fstar, stage1=stage1, eta_scale=cfg.eta_scale,
                                 record_time=cfg.record_time)
    if algo == "anita-sc":
        return solvers.run_anita(problem, solvers.STRONGLY_CONVEX, budget, seed, cfg.log_every,
                                 fstar, eta_scale=cfg.eta_scale, record_time=cfg.record_time)
    if algo == "gd":
        return solvers.run_gd(problem, budget, fstar, record_time=cfg.record_time)
    if algo == "agd":
        return solvers.run_agd(problem, budget, fstar, record_time=cfg.record_time)
    if algo == "svrg":
        return solvers.run_svrg_loopless(problem, budget, seed, fstar, cfg.log_every,
                                         record_time=cfg.record_time)
    raise ConfigError(algo)


def emit_trace_csv(result: RunResult, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_trace_csv(result.trace, result.n))


def format_trace_csv(trace: Sequence[TraceRecord], n: int) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for rec in trace:
        w.writerow((rec.t, rec.grads, repr(rec.grads / n), f"{rec.gap:.16e}", rec.wall_ns))
    return buf.getvalue()


def read_trace_csv(path) -> list[TraceRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"{path}: unexpected trace header")
    return [TraceRecord(int(r[0]), int(r[1]), float(r[3]), int(r[4])) for r in rows[1:]]


def passes_to(trace: Sequence[TraceRecord], n: int, threshold: float) -> Optional[float]:
    """Data passes at the first record whose gap is at most ``threshold``."""
    for rec in trace:
        if rec.gap <= threshold:
            return rec.grads / n
    return None


def interpolate_gap(trace: Sequence[TraceRecord], grid: np.ndarray) -> np.ndarray:
    """Piecewise-linear gap at ``grid`` grad counts; NaN outside the recorded range."""
    g = np.array([r.grads for r in trace], dtype=np.float64)
    v = np.array([r.gap for r in trace], dtype=np.float64)
    out = np.interp(grid, g, v)
    out[(grid < g[0]) | (grid > g[-1])] = np.nan
    return out


def _nullable(values):
    return [None if not math.isfinite(v) else float(v) for v in values]


def summarize(results: dict[str, list[RunResult]], n: int, grid: np.ndarray) -> dict:
    out = {}
    for algo, runs in results.items():
        gaps = np.vstack([interpolate_gap(r.trace, grid) for r in runs])
        covered = ~np.isnan(gaps).any(axis=0)
        mean = np.full(grid.shape, np.nan)
        std = np.full(grid.shape, np.nan)
        mean[covered] = gaps[:, covered].mean(axis=0)
        std[covered] = gaps[:, covered].std(axis=0)
        hits = {}
        for key in THRESHOLDS:
            per_run = [passes_to(r.trace, n, float(key)) for r in runs]
            hits[key] = None if any(p is None for p in per_run) else float(np.mean(per_run))
        out[algo] = {
            "grid": [int(x) for x in grid],
            "mean_gap": _nullable(mean),
            "std_gap": _nullable(std),
            "passes_to": hits,
        }
    return out


def run_experiment(cfg: RunConfig) -> dict:
    """Resolve f*, run every (algorithm, seed) pair and write traces plus ``summary.json``.

    Returns the summary dictionary.
    """
    problem = build_problem(cfg.problem, cfg.lam, cfg.normalize)
    n = problem.n
    budget = int(round(cfg.budget_passes * n))
    ref = oracle.cached_reference(problem, cfg.fstar_cache)
    log.info("problem %s: n=%d d=%d L=%.6g mu=%.6g f*=%.17g", cfg.problem, n, problem.d,
             *problem.constants(), ref.f_star)

    tasks = [(problem, a, s, budget, ref.f_star, cfg) for a in cfg.algorithms for s in cfg.seeds]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            runs = list(pool.map(_execute, tasks))
    else:
        runs = [_execute(t) for t in tasks]

    results: dict[str, list[RunResult]] = {a: [] for a in cfg.algorithms}
    for (_, algo, seed, *_), res in zip(tasks, runs):
        results[algo].append(res)
        if cfg.out_dir:
            os.makedirs(cfg.out_dir, exist_ok=True)
            emit_trace_csv(res, os.path.join(cfg.out_dir, f"{algo}_seed{seed}.csv"))

    step = max(1, int(round(cfg.grid_step_passes * n)))
    grid = np.arange(0, budget + 1, step)
    summary = {
        "schema": SCHEMA_VERSION,
        "problem": {
            "spec": cfg.problem,
            **problem.describe(),
            "f_star": ref.f_star,
            "f_star_method": ref.method,
            "budget_grads": budget,
            "seeds": list(cfg.seeds),
            "stage1": cfg.stage1,
        },
        "algorithms": summarize(results, n, grid),
    }
    if cfg.out_dir:
        with open(os.path.join(cfg.out_dir, "summary.json"), "w", encoding="utf-8",
                  newline="\n") as fh:
            json.dump(summary, fh, indent=1)
            fh.write("\n")
    return summary


def _seed_list(args) -> list[int]:
    if args.seed_list:
        return [int(s) for s in args.seed_list.split(",") if s.strip()]
    return list(range(args.seeds))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="anita-bench", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment")
    run.add_argument("--problem", required=True,
                     help="libsvm:<path> | synth:<n>,<d>,<seed>,<noise>,<density> | bundled")
    run.add_argument("--lambda", dest="lam", type=float, default=0.0)
    run.add_argument("--algo", default="gd,anita-gc", help="comma list of " + ",".join(ALGORITHMS))
    run.add_argument("--budget-passes", type=float, default=100.0)
    seeds = run.add_mutually_exclusive_group()
    seeds.add_argument("--seeds", type=int, default=1, help="use seeds 0..k-1")
    seeds.add_argument("--seed-list", help="explicit comma list of seeds")
    run.add_argument("--log-every", type=int, default=0, help="extra trace record every k iterations")
    run.add_argument("--stage1", choices=("prob", "derand"), default="prob")
    run.add_argument("--out", required=True)
    run.add_argument("--fstar-cache")
    run.add_argument("--no-normalize", action="store_true", help="keep LIBSVM rows unscaled")
    run.add_argument("--grid-step-passes", type=float, default=1.0)
    run.add_argument("--timing", action="store_true", help="record wall-clock ns in traces")
    run.add_argument("--workers", type=int, default=1)

    ver = sub.add_parser("verify", help="run the acceptance checks")
    ver.add_argument("--only", help="comma list of check numbers")
    ver.add_argument("--eta-scale", type=float, default=1.0,
                     help="debug: multiply ANITA stepsizes (the bound checks should notice)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "verify":
        from . import verify
        only = {int(k) for k in args.only.split(",")} if args.only else None
        report = verify.verify_suite(verify.select(only), eta_scale=args.eta_scale)
        return EXIT_OK if report.passed else EXIT_CHECK_FAILED
    try:
        cfg = RunConfig(
            problem=args.problem, algorithms=[a.strip() for a in args.algo.split(",") if a.strip()],
            budget_passes=args.budget_passes, seeds=_seed_list(args), lam=args.lam,
            log_every=args.log_every, stage1=args.stage1, out_dir=args.out,
            fstar_cache=args.fstar_cache, normalize=not args.no_normalize,
            grid_step_passes=args.grid_step_passes, record_time=args.timing,
            workers=args.workers,
        )
        summary = run_experiment(cfg)
    # ValueError covers LIBSVM parse errors and budgets below one pass
    except (ValueError, OSError, oracle.ReferenceError, solvers.DivergenceError) as exc:
        print(f"anita-bench: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for algo, agg in summary["algorithms"].items():
        hits = "  ".join(f"{k}:{'-' if v is None else f'{v:.2f}'}" for k, v in agg["passes_to"].items())
        print(f"{algo:9s} passes to gap {hits}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
