"""SVRG gradient estimator, snapshot cache and stochastic-gradient counter."""
from __future__ import annotations

import numpy as np

from .problems import FiniteSum


class GradCounter:
    """Cumulative number of component-gradient evaluations.

    A full gradient costs ``n``; one estimator call costs 2. Value
    evaluations are free.
    """

    __slots__ = ("total",)

    def __init__(self, total: int = 0):
        self.total = int(total)

    def charge(self, k: int) -> None:
        if k < 0:
            raise ValueError("counter is monotone")
        self.total += int(k)

    def __repr__(self):
        return f"GradCounter(total={self.total})"


class SnapshotCache:
    """Snapshot point ``w`` with its full gradient and value.

    Only :func:`refresh_snapshot` should mutate it, which keeps ``grad_w``
    equal to ``full_grad(w)``.
    """

    __slots__ = ("w", "grad_w", "f_w")

    def __init__(self, w: np.ndarray, grad_w: np.ndarray, f_w: float):
        self.w = w
        self.grad_w = grad_w
        self.f_w = f_w

    @classmethod
    def at(cls, problem: FiniteSum, w: np.ndarray, ctr: GradCounter) -> "SnapshotCache":
        cache = cls(None, None, None)
        refresh_snapshot(problem, cache, w, ctr)
        return cache


def refresh_snapshot(problem: FiniteSum, cache: SnapshotCache, new_w: np.ndarray,
                     ctr: GradCounter) -> None:
    new_w = np.array(new_w, dtype=np.float64)
    if not np.all(np.isfinite(new_w)):
        raise ValueError("snapshot point must be finite")
    grad = problem.full_grad(new_w)
    f_w = problem.value(new_w)
    cache.w, cache.grad_w, cache.f_w = new_w, grad, f_w
    ctr.charge(problem.n)


def estimate(problem: FiniteSum, cache: SnapshotCache, u: np.ndarray, i: int,
             ctr: GradCounter) -> np.ndarray:
    """``grad f_i(u) - grad f_i(w) + grad f(w)``; charges 2 evaluations."""
    g = problem.component_grad(i, u)
    g -= problem.component_grad(i, cache.w)
    g += cache.grad_w
    ctr.charge(2)
    return g


def exhaustive_mean(problem: FiniteSum, cache: SnapshotCache, u: np.ndarray) -> np.ndarray:
    """Exact expectation of the estimator over a uniform index (enumerates all i)."""
    scratch = GradCounter()
    return sum(estimate(problem, cache, u, i, scratch) for i in range(problem.n)) / problem.n


def exhaustive_variance(problem: FiniteSum, cache: SnapshotCache, u: np.ndarray) -> float:
    """Exact conditional variance ``(1/n) sum_i ||est_i(u) - grad f(u)||^2``.

    Test tool: enumerates every component and leaves any counter untouched.
    """
    gu = problem.full_grad(u)
    total = 0.0
    for i in range(problem.n):
        r = problem.component_grad(i, u) - problem.component_grad(i, cache.w) + cache.grad_w - gu
        total += float(r @ r)
    return total / problem.n
