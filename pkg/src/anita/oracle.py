"""Reference minimizers and finite-difference gradient checks.

The f* cache is a plain text file with one record per line::

    <sha256 of problem> f_star=<float> grad_norm=<float> method=<tag> iterations=<int>

Floats are written with ``repr`` so they round-trip exactly. Later lines for
the same key win.
"""
from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .problems import DiagonalQuadratic, FiniteSum, LeastSquares

CLOSED_FORM = "closed_form"
HIGH_PRECISION_AGD = "high_precision_agd"


class ReferenceError(RuntimeError):
    def __init__(self, message, grad_norm: float, x: np.ndarray, iterations: int):
        super().__init__(message)
        self.grad_norm = grad_norm
        self.x = x
        self.iterations = iterations


@dataclass
class Reference:
    x_star: Optional[np.ndarray]
    f_star: float
    grad_norm_at_xstar: float
    method: str
    iterations: int = 0
    degraded: bool = False


def solve_reference(problem: FiniteSum, tol: float = 1e-12, max_iter: int = 1_000_000,
                    allow_degraded: bool = False) -> Reference:
    """Minimize ``problem`` to gradient norm ``tol``.

    Quadratic problems are solved directly. Everything else runs deterministic
    full-gradient AGD (the strongly convex variant when ``mu > 0``; otherwise
    ``t/(t+3)`` momentum with gradient-based restarts) and keeps the iterate
    with the smallest gradient norm.
    """
    if isinstance(problem, (LeastSquares, DiagonalQuadratic)):
        x = problem.solve()
        g = problem.full_grad(x)
        return Reference(x, problem.value(x), float(np.linalg.norm(g)), CLOSED_FORM)

    L, mu = problem.constants()
    beta = (math.sqrt(L) - math.sqrt(mu)) / (math.sqrt(L) + math.sqrt(mu)) if mu > 0 else None
    x = np.zeros(problem.d)
    x_prev = x
    best_x, best_norm = x, math.inf
    k = 0
    for it in range(max_iter + 1):
        m = beta if beta is not None else k / (k + 3.0)
        y = x + m * (x - x_prev)
        g = problem.full_grad(y)
        gn = float(np.linalg.norm(g))
        if gn < best_norm:
            best_x, best_norm = y, gn
        if gn <= tol:
            break
        x_new = y - g / L
        # restart the momentum when it points uphill
        if float(g @ (x_new - x)) > 0:
            k = 0
            x_prev = x
            continue
        x_prev, x = x, x_new
        k += 1
    else:
        if not allow_degraded:
            raise ReferenceError(
                f"gradient norm {best_norm:.3e} above {tol:.1e} after {max_iter} iterations",
                best_norm, best_x, max_iter)
        return Reference(best_x, problem.value(best_x), best_norm, HIGH_PRECISION_AGD,
                         max_iter, degraded=True)
    return Reference(best_x, problem.value(best_x), best_norm, HIGH_PRECISION_AGD, it)


def finite_diff_grad(problem: FiniteSum, i: int, x: np.ndarray, h: float) -> np.ndarray:
    """Central differences of ``f_i`` along each coordinate axis."""
    if h <= 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=np.float64)
    g = np.empty_like(x)
    e = np.zeros_like(x)
    for k in range(x.size):
        e[k] = h
        g[k] = (problem.component_value(i, x + e) - problem.component_value(i, x - e)) / (2 * h)
        e[k] = 0.0
    return g


def read_cache(path) -> dict[str, Reference]:
    out: dict[str, Reference] = {}
    if not path or not os.path.exists(path):
        return out
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            fields = dict(p.split("=", 1) for p in parts[1:])
            out[parts[0]] = Reference(
                x_star=None,
                f_star=float(fields["f_star"]),
                grad_norm_at_xstar=float(fields["grad_norm"]),
                method=fields["method"],
                iterations=int(fields.get("iterations", 0)),
            )
    return out


def write_cache(path, entries: dict[str, Reference]) -> None:
    """Rewrite the cache atomically (temp file + rename)."""
    lines = [
        f"{key} f_star={ref.f_star!r} grad_norm={ref.grad_norm_at_xstar!r} "
        f"method={ref.method} iterations={ref.iterations}\n"
        for key, ref in sorted(entries.items())
    ]
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".fstar-")
    with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(lines)
    os.replace(tmp, path)


def cached_reference(problem: FiniteSum, cache_path=None, **kwargs) -> Reference:
    """Look up ``problem`` in the f* cache, solving and storing it on a miss.

    Cache hits carry no ``x_star``.
    """
    key = problem.fingerprint()
    entries = read_cache(cache_path)
    if key in entries:
        return entries[key]
    ref = solve_reference(problem, **kwargs)
    if cache_path:
        entries[key] = ref
        write_cache(cache_path, entries)
    return ref
