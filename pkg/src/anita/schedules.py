"""Parameter rules ``(p_t, theta_t, eta_t, alpha_t)`` for ANITA.

General convex (three stages, split at the first snapshot change ``t1``):

* ``t <= t1``: ``p = 1/(n+1)``, ``theta = 1 - 1/(2 sqrt n)``,
  ``eta = 1/(L (1 + 1/(1-theta)))``, ``alpha = theta``.
* ``t > t1``, with ``s = t - t1 + 3 sqrt n``: ``p = max(4/s, 4/(n+3))``,
  ``theta = 2/(p s)``, ``eta = 1/(3L)``, ``alpha = theta``.

Strongly convex (constant): ``theta = min(1, sqrt(mu/(pL)))/2``,
``eta = 1/(L theta (1 + 1/(1-theta)))``, ``alpha = 1 + mu eta``.

Every stepsize is the largest one the convergence guarantees admit. No rule
needs the target accuracy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

PROBABILISTIC = "probabilistic_stage1"
DERANDOMIZED = "derandomized_stage1"


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class ScheduleParams:
    p: float
    theta: float
    eta: float
    alpha: float

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ScheduleError(f"p={self.p} outside (0, 1]")
        if not 0.0 < self.theta <= 1.0:
            raise ScheduleError(f"theta={self.theta} outside (0, 1]")
        if not (self.eta > 0.0 and self.alpha > 0.0):
            raise ScheduleError("eta and alpha must be positive")


@dataclass
class StageState:
    """Tracks ``t1``, the iteration whose Line-8 draw first moved the snapshot.

    In derandomized mode the first snapshot move is forced at iteration
    ``derandomized_t1`` and no earlier. The default ``n - 1`` makes stage 1 a
    fixed inner loop of ``n`` iterations (``w_n`` is the first new snapshot),
    which costs ``4n`` gradients including the two full gradients.
    """

    mode: str = PROBABILISTIC
    t1_observed: Optional[int] = None
    derandomized_t1: Optional[int] = None

    def __post_init__(self):
        if self.mode not in (PROBABILISTIC, DERANDOMIZED):
            raise ValueError(f"unknown stage-1 mode {self.mode!r}")

    def forced_t1(self, n: int) -> int:
        return n - 1 if self.derandomized_t1 is None else self.derandomized_t1

    def observe(self, t: int) -> None:
        if self.t1_observed is not None:
            raise ScheduleError("t1 already observed")
        self.t1_observed = t

    def in_stage1(self, t: int) -> bool:
        return self.t1_observed is None or t <= self.t1_observed


def stage1_params(n: int, L: float) -> ScheduleParams:
    theta = 1.0 - 1.0 / (2.0 * math.sqrt(n))
    eta = 1.0 / (L * (1.0 + 1.0 / (1.0 - theta)))
    return ScheduleParams(p=1.0 / (n + 1), theta=theta, eta=eta, alpha=theta)


def post_t1_params(k: int, n: int, L: float) -> ScheduleParams:
    """Parameters at ``t = t1 + k`` for ``k >= 1``."""
    if k < 1:
        raise ScheduleError("post-t1 parameters need t > t1")
    s = k + 3.0 * math.sqrt(n)
    if s <= n + 3:
        # 4/s dominates; theta = 2/((4/s) s) is exactly 1/2
        p, theta = 4.0 / s, 0.5
    else:
        p, theta = 4.0 / (n + 3), (n + 3) / (2.0 * s)
    return ScheduleParams(p=p, theta=theta, eta=1.0 / (3.0 * L), alpha=theta)


def general_convex_params(t: int, stage: StageState, n: int, L: float) -> ScheduleParams:
    if n < 1 or L <= 0 or t < 0:
        raise ScheduleError("need n >= 1, L > 0, t >= 0")
    if stage.in_stage1(t):
        return stage1_params(n, L)
    return post_t1_params(t - stage.t1_observed, n, L)


def strongly_convex_params(n: int, L: float, mu: float,
                           p_override: Optional[float] = None) -> ScheduleParams:
    if mu <= 0:
        raise ScheduleError("mu must be positive; use the general-convex schedule for mu = 0")
    if n < 1 or L < mu:
        raise ScheduleError("need n >= 1 and L >= mu")
    p = 1.0 / n if p_override is None else float(p_override)
    theta = 0.5 * min(1.0, math.sqrt(mu / (p * L)))
    eta = 1.0 / (L * theta * (1.0 + 1.0 / (1.0 - theta)))
    return ScheduleParams(p=p, theta=theta, eta=eta, alpha=1.0 + mu * eta)


def stage_boundary(n: int) -> int:
    """Offset ``floor(n + 3 - 3 sqrt n)`` after ``t1`` where ``p`` hits its floor ``4/(n+3)``."""
    if n < 1:
        raise ScheduleError("n must be positive")
    return math.floor(n + 3 - 3.0 * math.sqrt(n))


def linear_rate(params: ScheduleParams) -> float:
    """Per-iteration contraction ``1 - 4 p theta / 5`` of the strongly convex potential."""
    return 1.0 - 4.0 * params.p * params.theta / 5.0


def recursion_gap(prev: ScheduleParams, cur: ScheduleParams) -> float:
    """``eta'/(p' theta'^2) - (1 - p theta) eta/(p theta^2)``; non-negative when the
    weighted per-step inequalities telescope."""
    lhs = (1.0 - cur.p * cur.theta) * cur.eta / (cur.p * cur.theta**2)
    rhs = prev.eta / (prev.p * prev.theta**2)
    return rhs - lhs
