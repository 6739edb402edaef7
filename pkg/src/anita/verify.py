"""Acceptance checks, runnable from the CLI (``anita-bench verify``) and from pytest.

Each check returns a :class:`CheckResult` with the measured quantity, the bound
it is held to and its runtime; a check passes only if both the bound and the
runtime limit are met.
"""
from __future__ import annotations

import filecmp
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Optional

import numpy as np

from . import harness, schedules, solvers
from .dataio import SparseDataset, SynthConfig, generate_synthetic
from .oracle import solve_reference
from .problems import DiagonalQuadratic, FiniteSum, LeastSquares, LogisticRegression
from .vrgrad import GradCounter, SnapshotCache, exhaustive_mean, exhaustive_variance

SLACK = 1e-10

# problem used by the strongly convex rate check
SC_CONFIG = SynthConfig(n_samples=200, n_features=20, seed=7, label_noise=0.1, density=1.0)
SC_LAMBDA = 0.01
SC_SEEDS = 100
SC_ITERS = 5000
SC_CHECKPOINTS = (500, 1000, 2000, 5000)
SC_SLACK = 1.2

# problem used by the general convex bound and the O(n) regime checks
GC_CONFIG = SynthConfig(n_samples=1024, n_features=50, seed=7, label_noise=0.1, density=0.2)
GC_SEEDS = 100
GC_OFFSETS = (2, 5, 10, 30, 100, 300, 931, 1200, 2000, 3000)
ON_SEEDS = 20

BUNDLED_BUDGET_PASSES = 300
BUNDLED_SEEDS = (0, 1, 2)
BUNDLED_THRESHOLD = "1e-3"


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    measured: str
    bound: str
    seconds: float = 0.0
    limit: float = math.inf
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] {self.number:2d} {self.name}: measured {self.measured} | "
                f"bound {self.bound} | {self.seconds:.1f}s (limit {self.limit:g}s)"
                + (f" | {self.detail}" if self.detail else ""))


@dataclass
class Check:
    number: int
    name: str
    limit: float
    fn: Callable[["Context"], tuple]

    def run(self, ctx: "Context") -> CheckResult:
        start = time.perf_counter()
        ok, measured, bound, *rest = self.fn(ctx)
        secs = time.perf_counter() - start
        detail = rest[0] if rest else ""
        return CheckResult(self.number, self.name, bool(ok) and secs < self.limit,
                           measured, bound, secs, self.limit, detail)


@dataclass
class Context:
    eta_scale: float = 1.0


@dataclass
class Report:
    results: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.results) and all(r.passed for r in self.results)


# ---------------------------------------------------------------- random instances

def random_problem(rng: np.random.Generator, kind: str, n: int, d: int) -> FiniteSum:
    if kind == "logistic":
        A = rng.standard_normal((n, d)) * (rng.random((n, d)) < 0.7)
        b = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        return LogisticRegression(SparseDataset.from_dense(A, b), lam=float(rng.uniform(0, 0.5)))
    if kind == "least_squares":
        A = rng.standard_normal((n, d))
        return LeastSquares(A, rng.standard_normal(n), lam=float(rng.uniform(0, 0.5)))
    if kind == "diagonal_quadratic":
        return DiagonalQuadratic(rng.uniform(0.0, 3.0, (n, d)), rng.standard_normal((n, d)))
    raise ValueError(kind)


KINDS = ("logistic", "least_squares", "diagonal_quadratic")


def estimator_triples(count: int = 100, seed: int = 2024):
    """``count`` random (problem, u, w) triples with ``n <= 50`` and ``d <= 10``."""
    rng = np.random.default_rng(seed)
    for k in range(count):
        n, d = int(rng.integers(1, 51)), int(rng.integers(1, 11))
        p = random_problem(rng, KINDS[k % 3], n, d)
        scale = float(rng.uniform(0.1, 3.0))
        yield p, scale * rng.standard_normal(d), scale * rng.standard_normal(d)


# ---------------------------------------------------------------- checks

def check_unbiasedness(ctx):
    worst = 0.0
    for p, u, w in estimator_triples():
        cache = SnapshotCache.at(p, w, GradCounter())
        worst = max(worst, float(np.max(np.abs(exhaustive_mean(p, cache, u) - p.full_grad(u)))))
    return worst <= 1e-13, f"max |mean - grad| = {worst:.2e}", "<= 1e-13"


def check_variance(ctx):
    viol6 = viol7 = 0
    worst6 = worst7 = -math.inf
    for p, u, w in estimator_triples():
        L = p.smoothness_L
        cache = SnapshotCache.at(p, w, GradCounter())
        var = exhaustive_variance(p, cache, u)
        b6 = L**2 * float((u - w) @ (u - w))
        b7 = 2 * L * (p.value(w) - p.value(u) - float(p.full_grad(u) @ (w - u)))
        viol6 += int(var > b6 + SLACK)
        viol7 += int(var > b7 + SLACK)
        worst6, worst7 = max(worst6, var - b6), max(worst7, var - b7)
    return (viol6 + viol7 == 0, f"{viol6}+{viol7} violations (max excess {worst6:.1e}, {worst7:.1e})",
            "0 violations at slack 1e-10")


def smoothness_violations(p: FiniteSum, rng, pairs: int) -> tuple[int, int, int]:
    """Counts of violated (Lipschitz gradient, co-coercive Bregman lower bound, strong convexity)."""
    L, mu = p.constants()
    v3 = v4 = v10 = 0
    for _ in range(pairs):
        i = int(rng.integers(p.n))
        scale = float(rng.uniform(0.1, 5.0))
        x, y = scale * rng.standard_normal(p.d), scale * rng.standard_normal(p.d)
        gx, gy = p.component_grad(i, x), p.component_grad(i, y)
        v3 += int(np.linalg.norm(gx - gy) > L * np.linalg.norm(x - y) + SLACK)
        breg = p.component_value(i, x) - p.component_value(i, y) - float(gy @ (x - y))
        v4 += int(float((gx - gy) @ (gx - gy)) / (2 * L) > breg + SLACK)
        if mu > 0:
            fb = p.value(x) - p.value(y) - float(p.full_grad(y) @ (x - y))
            v10 += int(fb < 0.5 * mu * float((x - y) @ (x - y)) - SLACK)
    return v3, v4, v10


def check_smoothness(ctx):
    rng = np.random.default_rng(7)
    counts = {}
    for kind in KINDS:
        p = random_problem(rng, kind, 30, 8)
        counts[kind] = smoothness_violations(p, rng, 1000)
    total = sum(sum(c) for c in counts.values())
    return total == 0, f"{total} violations", "0 at slack 1e-10", str(counts)


def _sc_problem():
    p = LogisticRegression(generate_synthetic(SC_CONFIG), SC_LAMBDA)
    return p, solve_reference(p)


def check_linear_rate(ctx):
    p, ref = _sc_problem()
    L, mu = p.constants()
    prm = schedules.strongly_convex_params(p.n, L, mu)
    weight = (1 + mu * prm.eta) * prm.p * prm.theta / (2 * prm.eta)
    probe_at = (0,) + SC_CHECKPOINTS
    phis = np.zeros(len(probe_at))
    for seed in range(SC_SEEDS):
        r = solvers.run_anita(p, solvers.STRONGLY_CONVEX, 10**15, seed, 0, ref.f_star,
                              x_star=ref.x_star, probe_at=probe_at, max_iter=SC_ITERS,
                              eta_scale=ctx.eta_scale)
        phis += [q.gap + weight * q.x_dist2 for q in r.probes]
    phis /= SC_SEEDS
    rho = schedules.linear_rate(prm)
    ratios = phis[1:] / phis[0]
    bounds = np.array([SC_SLACK * rho**t for t in SC_CHECKPOINTS])
    measured = ", ".join(f"t={t}: {r:.2e}" for t, r in zip(SC_CHECKPOINTS, ratios))
    bound = ", ".join(f"{b:.2e}" for b in bounds)
    return bool(np.all(ratios <= bounds)), f"E[Phi_t]/Phi_0 {measured}", f"1.2*(1-4p*theta/5)^t {bound}"


def _gc_problem():
    p = LogisticRegression(generate_synthetic(GC_CONFIG), 0.0)
    return p, solve_reference(p)


def general_convex_bound(x0_dist2: float, n: int, L: float, t: int, t1: int) -> float:
    prev = schedules.post_t1_params(t - 1 - t1, n, L)
    return 32 * x0_dist2 / (prev.eta * prev.p * (t - t1 + 3 * math.sqrt(n)) ** 2)


def check_general_convex_bound(ctx):
    p, ref = _gc_problem()
    n, L = p.n, p.smoothness_L
    t1 = n - 1
    ts = [t1 + k for k in GC_OFFSETS]
    gaps = np.zeros(len(ts))
    for seed in range(GC_SEEDS):
        r = solvers.run_anita(p, solvers.GENERAL_CONVEX, 10**15, seed, 0, ref.f_star,
                              stage1=schedules.DERANDOMIZED, x_star=ref.x_star, probe_at=ts,
                              max_iter=ts[-1], eta_scale=ctx.eta_scale)
        assert r.t1 == t1
        gaps += [q.gap for q in r.probes]
    gaps /= GC_SEEDS
    x0_dist2 = float(ref.x_star @ ref.x_star)
    bounds = np.array([general_convex_bound(x0_dist2, n, L, t, t1) for t in ts])
    worst = int(np.argmax(gaps / bounds))
    return (bool(np.all(gaps <= bounds)),
            f"max mean-gap/bound {gaps[worst] / bounds[worst]:.2e} at t-t1={GC_OFFSETS[worst]}",
            "<= 1 at t-t1 in " + ",".join(map(str, GC_OFFSETS)))


def check_accounting(ctx):
    p = LogisticRegression(generate_synthetic(SynthConfig(100, 10, 3, 0.1, 1.0)), 0.05)
    runs = [
        solvers.run_anita(p, solvers.GENERAL_CONVEX, 50 * p.n, 1, 7, 0.0),
        solvers.run_anita(p, solvers.GENERAL_CONVEX, 50 * p.n, 2, 0, 0.0,
                          stage1=schedules.DERANDOMIZED),
        solvers.run_anita(p, solvers.STRONGLY_CONVEX, 50 * p.n, 3, 5, 0.0),
        solvers.run_svrg_loopless(p, 50 * p.n, 4, 0.0, 11),
    ]
    identity = all(r.grad_total == 2 * r.iterations + p.n * (1 + r.refreshes) for r in runs)
    iters = 10_000
    r = solvers.run_anita(p, solvers.STRONGLY_CONVEX, 10**15, 5, 0, 0.0, max_iter=iters)
    # per-iteration cost is 2, plus n on a refresh; only the count matters for mean and std
    costs = np.full(iters, 2.0)
    costs[:r.refreshes] += p.n
    mean = costs.mean()
    se = costs.std(ddof=1) / math.sqrt(iters)
    expected = p.n * (1.0 / p.n) + 2
    ok = identity and abs(mean - expected) <= 3 * se and r.grad_total == p.n + costs.sum()
    return (ok, f"identity {'holds' if identity else 'BROKEN'}; mean grads/iter {mean:.4f} "
            f"(se {se:.4f})", f"|mean - (np+2)| <= 3 se, np+2 = {expected:g}")


def check_linear_regime(ctx):
    p, ref = _gc_problem()
    n = p.n
    f0 = p.value(np.zeros(p.d))
    eps0 = (f0 - ref.f_star) / math.sqrt(n)
    gaps = []
    for seed in range(ON_SEEDS):
        r = solvers.run_anita(p, solvers.GENERAL_CONVEX, 4 * n, seed, 0, ref.f_star,
                              stage1=schedules.DERANDOMIZED, eta_scale=ctx.eta_scale)
        gaps.append([rec.gap for rec in r.trace if rec.grads <= 4 * n][-1])
    mean = float(np.mean(gaps))
    return mean <= eps0, f"mean gap after 4n grads {mean:.4e}", f"eps0 = {eps0:.4e}"


def bundled_passes(eta_scale: float = 1.0) -> dict:
    cfg = harness.RunConfig(problem="bundled", algorithms=("gd", "anita-gc"),
                            budget_passes=BUNDLED_BUDGET_PASSES, seeds=BUNDLED_SEEDS,
                            eta_scale=eta_scale)
    summary = harness.run_experiment(cfg)
    return {a: agg["passes_to"][BUNDLED_THRESHOLD] for a, agg in summary["algorithms"].items()}


def load_bundled_passes_golden() -> dict:
    text = resources.files("anita").joinpath("data/bundled_passes_golden.json").read_text()
    return json.loads(text)


def check_bundled_race(ctx):
    got = bundled_passes(ctx.eta_scale)
    golden = load_bundled_passes_golden()
    gd = math.inf if got["gd"] is None else got["gd"]
    faster = got["anita-gc"] is not None and got["anita-gc"] < gd
    same = got == golden["passes_to_1e-3"]
    fmt = lambda v: "not reached" if v is None else f"{v:.3f}"
    return (faster and same,
            f"passes to 1e-3: anita-gc {fmt(got['anita-gc'])}, gd {fmt(got['gd'])}",
            "anita-gc < gd and exact match with golden",
            "" if same else f"golden {golden['passes_to_1e-3']}")


def check_recursion(ctx):
    worst = math.inf
    for n in (4, 16, 100, 10_000):
        prev = schedules.post_t1_params(1, n, 1.0)
        for k in range(2, 10 * n + 1):
            cur = schedules.post_t1_params(k, n, 1.0)
            worst = min(worst, schedules.recursion_gap(prev, cur))
            prev = cur
    return worst >= -1e-12, f"min (rhs - lhs) = {worst:.3e}", ">= -1e-12"


def check_determinism(ctx):
    with tempfile.TemporaryDirectory() as tmp:
        dirs = []
        for run in ("a", "b"):
            out = os.path.join(tmp, run)
            harness.run_experiment(harness.RunConfig(
                problem="synth:300,20,11,0.1,0.5", lam=0.01,
                algorithms=("anita-gc", "anita-sc", "gd", "agd", "svrg"),
                budget_passes=20, seeds=(1, 2), log_every=50, out_dir=out,
                fstar_cache=os.path.join(tmp, f"fstar-{run}.txt"), eta_scale=ctx.eta_scale))
            dirs.append(out)
        names = sorted(os.listdir(dirs[0]))
        same = names == sorted(os.listdir(dirs[1])) and all(
            filecmp.cmp(os.path.join(dirs[0], f), os.path.join(dirs[1], f), shallow=False)
            for f in names)
    return same, f"{len(names)} files {'identical' if same else 'DIFFER'}", "byte-identical"


REGISTRY = [
    Check(1, "estimator unbiasedness", 5, check_unbiasedness),
    Check(2, "estimator variance bounds", 5, check_variance),
    Check(3, "smoothness, co-coercivity, strong convexity", 5, check_smoothness),
    Check(4, "strongly convex linear rate", 60, check_linear_rate),
    Check(5, "general convex bound", 120, check_general_convex_bound),
    Check(6, "gradient accounting", 10, check_accounting),
    Check(7, "O(n) regime", 30, check_linear_regime),
    Check(8, "bundled synthetic: anita-gc vs gd", 60, check_bundled_race),
    Check(9, "schedule recursion feasibility", 1, check_recursion),
    Check(10, "determinism", 30, check_determinism),
]


def select(numbers: Optional[set[int]] = None) -> list[Check]:
    if numbers is None:
        return list(REGISTRY)
    return [c for c in REGISTRY if c.number in numbers]


def verify_suite(checks: Optional[list[Check]] = None, eta_scale: float = 1.0,
                 stream=None) -> Report:
    """Run ``checks`` (the full registry by default) and print one line per check."""
    checks = REGISTRY if checks is None else checks
    stream = sys.stdout if stream is None else stream
    ctx = Context(eta_scale=eta_scale)
    report = Report()
    for check in checks:
        res = check.run(ctx)
        report.results.append(res)
        print(res.line(), file=stream, flush=True)
    n_ok = sum(r.passed for r in report.results)
    print(f"{n_ok}/{len(report.results)} checks passed"
          + ("" if report.results else " (no checks registered)"), file=stream)
    return report
