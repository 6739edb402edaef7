"""ANITA (general and strongly convex modes) and the GD, AGD and loopless SVRG baselines.

All solvers count work in component-gradient evaluations and stop once the
count reaches ``budget``; an iteration that triggers a snapshot refresh may
overshoot the budget by at most ``n + 1``. Each run logs ``TraceRecord``s
holding the objective gap of the point it would return.
"""
from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from . import schedules
from .problems import FiniteSum
from .schedules import ScheduleParams, StageState
from .vrgrad import GradCounter, SnapshotCache, estimate, refresh_snapshot

GENERAL_CONVEX = "general_convex"
STRONGLY_CONVEX = "strongly_convex"

GAP_LIMIT = 1e12


class DivergenceError(RuntimeError):
    def __init__(self, iteration: int, detail: str):
        self.iteration = iteration
        super().__init__(f"diverged at iteration {iteration}: {detail}")


@dataclass
class TraceRecord:
    t: int
    grads: int
    gap: float
    wall_ns: int = 0


@dataclass
class Probe:
    """Snapshot of ``(f(w_t) - f*, ||x_t - x*||^2)`` at a requested iteration."""

    t: int
    gap: float
    x_dist2: float


@dataclass
class RunResult:
    algorithm: str
    output: np.ndarray
    trace: list[TraceRecord]
    grad_total: int
    seed: Optional[int]
    n: int
    iterations: int = 0
    refreshes: int = 0
    t1: Optional[int] = None
    probes: list[Probe] = field(default_factory=list)

    def final_gap(self) -> float:
        return self.trace[-1].gap


@dataclass
class AnitaState:
    x: np.ndarray
    cache: SnapshotCache
    x_under: np.ndarray
    x_bar: np.ndarray
    stage: StageState
    rng: np.random.Generator
    t: int = 0

    @property
    def w(self) -> np.ndarray:
        return self.cache.w

    @classmethod
    def start(cls, problem: FiniteSum, x0: np.ndarray, rng: np.random.Generator,
              stage: StageState, ctr: GradCounter) -> "AnitaState":
        x0 = np.array(x0, dtype=np.float64)
        cache = SnapshotCache.at(problem, x0, ctr)
        return cls(x=x0.copy(), cache=cache, x_under=x0.copy(), x_bar=x0.copy(),
                   stage=stage, rng=rng)


def _check_budget(problem, budget):
    if budget < problem.n:
        raise ValueError(f"budget {budget} is smaller than one data pass ({problem.n})")


def _start_point(problem, x0):
    if x0 is None:
        return np.zeros(problem.d)
    x0 = np.array(x0, dtype=np.float64)
    if x0.shape != (problem.d,) or not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be a finite vector of length d")
    return x0


class _Clock:
    def __init__(self, enabled):
        self.enabled = enabled
        self.start = time.perf_counter_ns() if enabled else 0

    def __call__(self):
        return time.perf_counter_ns() - self.start if self.enabled else 0


def anita_step(problem: FiniteSum, st: AnitaState, params: ScheduleParams, mu: float,
               ctr: GradCounter) -> bool:
    """One iteration of ANITA; returns True when the snapshot moved."""
    theta, eta = params.theta, params.eta
    x, w = st.x, st.cache.w
    x_under = theta * x + (1.0 - theta) * w
    i = int(st.rng.integers(problem.n))
    coin = st.rng.random()
    g = estimate(problem, st.cache, x_under, i, ctr)
    if mu:
        x_next = (x + (mu * eta) * x_under) / (1.0 + mu * eta) - (eta / params.alpha) * g
    else:
        x_next = x - (eta / params.alpha) * g
    if not np.all(np.isfinite(x_next)):
        raise DivergenceError(st.t, "non-finite iterate")
    x_bar = theta * x_next + (1.0 - theta) * w

    stage = st.stage
    if stage.mode == schedules.DERANDOMIZED and stage.t1_observed is None:
        accept = st.t == stage.forced_t1(problem.n)
    else:
        accept = coin < params.p
    if accept:
        if stage.t1_observed is None:
            stage.observe(st.t)
        refresh_snapshot(problem, st.cache, x_bar, ctr)

    st.x, st.x_under, st.x_bar = x_next, x_under, x_bar
    st.t += 1
    return accept


def run_anita(problem: FiniteSum, mode: str, budget: int, seed: int, log_every: int = 0,
              fstar: float = 0.0, *, x0=None, stage1: str = schedules.PROBABILISTIC,
              derandomized_t1: Optional[int] = None, p_override: Optional[float] = None,
              x_star: Optional[np.ndarray] = None, probe_at: Iterable[int] = (),
              eta_scale: float = 1.0, max_iter: Optional[int] = None,
              record_time: bool = False) -> RunResult:
    """Run ANITA until ``budget`` component gradients have been spent (or
    ``max_iter`` iterations have run, when given).

    A trace record is written at ``t = 0``, after every snapshot refresh,
    every ``log_every`` iterations (0 disables) and at the last iteration.
    ``probe_at`` requests ``Probe`` entries (needs ``x_star``) for potential
    tracking. ``eta_scale`` multiplies every stepsize and exists only to check
    that the bound checks notice a mis-set stepsize.
    """
    L, mu = problem.constants()
    if mode == STRONGLY_CONVEX:
        if mu <= 0:
            raise ValueError("strongly convex mode needs mu > 0")
        fixed = schedules.strongly_convex_params(problem.n, L, mu, p_override)
        if eta_scale != 1.0:
            fixed = dataclasses.replace(fixed, eta=fixed.eta * eta_scale)
    elif mode == GENERAL_CONVEX:
        fixed = None
        mu = 0.0
    else:
        raise ValueError(f"unknown mode {mode!r}")
    _check_budget(problem, budget)
    probe_at = set(probe_at)
    if probe_at and x_star is None:
        raise ValueError("probes need x_star")

    ctr = GradCounter()
    clock = _Clock(record_time)
    rng = np.random.default_rng(seed)
    stage = StageState(mode=stage1, derandomized_t1=derandomized_t1)
    st = AnitaState.start(problem, _start_point(problem, x0), rng, stage, ctr)

    def gap():
        return st.cache.f_w - fstar

    def probe():
        r = st.x - x_star
        probes.append(Probe(st.t, gap(), float(r @ r)))

    trace = [TraceRecord(0, ctr.total, gap(), clock())]
    probes: list[Probe] = []
    if 0 in probe_at:
        probe()
    refreshes = 0
    n = problem.n
    while ctr.total < budget and (max_iter is None or st.t < max_iter):
        if fixed is None:
            params = schedules.general_convex_params(st.t, stage, n, L)
            if eta_scale != 1.0:
                params = dataclasses.replace(params, eta=params.eta * eta_scale)
        else:
            params = fixed
        moved = anita_step(problem, st, params, mu, ctr)
        if moved:
            refreshes += 1
            if not gap() <= GAP_LIMIT:
                raise DivergenceError(st.t, f"gap {gap()!r} exceeds {GAP_LIMIT:g}")
        if moved or (log_every and st.t % log_every == 0):
            trace.append(TraceRecord(st.t, ctr.total, gap(), clock()))
        if st.t in probe_at:
            probe()
    if trace[-1].t != st.t:
        trace.append(TraceRecord(st.t, ctr.total, gap(), clock()))

    assert ctr.total == 2 * st.t + n * (1 + refreshes)
    return RunResult(algorithm=f"anita-{'sc' if fixed is not None else 'gc'}",
                     output=st.cache.w, trace=trace, grad_total=ctr.total, seed=seed, n=n,
                     iterations=st.t, refreshes=refreshes, t1=stage.t1_observed, probes=probes)


def _deterministic_trace(problem, x, t, ctr, fstar, clock, trace):
    f = problem.value(x)
    if not (np.all(np.isfinite(x)) and f - fstar <= GAP_LIMIT):
        raise DivergenceError(t, "non-finite iterate or gap above limit")
    trace.append(TraceRecord(t, ctr.total, f - fstar, clock()))


def run_gd(problem: FiniteSum, budget: int, fstar: float = 0.0, *, x0=None,
           record_time: bool = False) -> RunResult:
    """Full-gradient descent with stepsize ``1/L``; every iteration costs ``n``."""
    _check_budget(problem, budget)
    L = problem.smoothness_L
    ctr, clock, trace = GradCounter(), _Clock(record_time), []
    x = _start_point(problem, x0)
    t = 0
    _deterministic_trace(problem, x, t, ctr, fstar, clock, trace)
    while ctr.total < budget:
        g = problem.full_grad(x)
        ctr.charge(problem.n)
        x = x - g / L
        t += 1
        _deterministic_trace(problem, x, t, ctr, fstar, clock, trace)
    return RunResult("gd", x, trace, ctr.total, None, problem.n, iterations=t)


def run_agd(problem: FiniteSum, budget: int, fstar: float = 0.0, *, x0=None,
            record_time: bool = False) -> RunResult:
    """Nesterov's method with stepsize ``1/L``.

    Momentum is ``t/(t+3)`` when ``mu = 0`` and
    ``(sqrt L - sqrt mu)/(sqrt L + sqrt mu)`` otherwise.
    """
    _check_budget(problem, budget)
    L, mu = problem.constants()
    beta = (math.sqrt(L) - math.sqrt(mu)) / (math.sqrt(L) + math.sqrt(mu)) if mu > 0 else None
    ctr, clock, trace = GradCounter(), _Clock(record_time), []
    x = _start_point(problem, x0)
    x_prev = x
    t = 0
    _deterministic_trace(problem, x, t, ctr, fstar, clock, trace)
    while ctr.total < budget:
        m = beta if beta is not None else t / (t + 3.0)
        y = x + m * (x - x_prev)
        g = problem.full_grad(y)
        ctr.charge(problem.n)
        x_prev, x = x, y - g / L
        t += 1
        _deterministic_trace(problem, x, t, ctr, fstar, clock, trace)
    return RunResult("agd", x, trace, ctr.total, None, problem.n, iterations=t)


def run_svrg_loopless(problem: FiniteSum, budget: int, seed: int, fstar: float = 0.0,
                      log_every: int = 0, *, x0=None, record_time: bool = False) -> RunResult:
    """Loopless SVRG: plain steps ``x -= eta * estimate`` with ``eta = 1/(4L)`` and a
    Bernoulli(1/n) snapshot refresh at the new iterate. Returns the last iterate."""
    _check_budget(problem, budget)
    n = problem.n
    eta = 1.0 / (4.0 * problem.smoothness_L)
    p = 1.0 / n
    ctr, clock = GradCounter(), _Clock(record_time)
    rng = np.random.default_rng(seed)
    x = _start_point(problem, x0)
    cache = SnapshotCache.at(problem, x, ctr)
    trace = [TraceRecord(0, ctr.total, cache.f_w - fstar, clock())]
    t = refreshes = 0
    while ctr.total < budget:
        i = int(rng.integers(n))
        coin = rng.random()
        x = x - eta * estimate(problem, cache, x, i, ctr)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(t, "non-finite iterate")
        t += 1
        if coin < p:
            refresh_snapshot(problem, cache, x, ctr)
            refreshes += 1
            trace.append(TraceRecord(t, ctr.total, cache.f_w - fstar, clock()))
        elif log_every and t % log_every == 0:
            trace.append(TraceRecord(t, ctr.total, problem.value(x) - fstar, clock()))
        if not trace[-1].gap <= GAP_LIMIT:
            raise DivergenceError(t, "gap above limit")
    if trace[-1].t != t:
        trace.append(TraceRecord(t, ctr.total, problem.value(x) - fstar, clock()))
    assert ctr.total == 2 * t + n * (1 + refreshes)
    return RunResult("svrg", x, trace, ctr.total, seed, n, iterations=t, refreshes=refreshes)
