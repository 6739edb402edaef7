"""Finite-sum objectives ``f(x) = (1/n) sum_i f_i(x)``.

Every problem exposes per-component values and gradients, the averaged value
and gradient, and its constants ``(L, mu)``: ``L`` is the Lipschitz constant of
every component gradient, ``mu`` the strong-convexity modulus of the average.
An l2 regularizer ``lam/2 ||x||^2`` is added to every component, so it raises
``L`` and ``mu`` by ``lam`` each.
"""
from __future__ import annotations

import hashlib
import math

import numpy as np
from scipy import sparse

from .dataio import SparseDataset


def sigmoid(z):
    """Overflow-safe logistic function, scalar or array."""
    if np.ndim(z) == 0:
        z = float(z)
        if z >= 0:
            return 1.0 / (1.0 + math.exp(-z))
        e = math.exp(z)
        return e / (1.0 + e)
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def log1pexp(z):
    """``log(1 + exp(z))`` without overflow."""
    if np.ndim(z) == 0:
        z = float(z)
        return math.log1p(math.exp(z)) if z <= 0 else z + math.log1p(math.exp(-z))
    z = np.asarray(z, dtype=np.float64)
    return np.where(z <= 0, np.log1p(np.exp(np.minimum(z, 0.0))), z + np.log1p(np.exp(-np.abs(z))))


class FiniteSum:
    """Base class. Subclasses set ``n``, ``d``, ``lam`` and implement the ``_loss*`` hooks."""

    kind = "abstract"
    n: int
    d: int
    lam: float = 0.0

    def _check_index(self, i):
        if not 0 <= i < self.n:
            raise IndexError(f"component index {i} out of range [0, {self.n})")

    def component_value(self, i: int, x: np.ndarray) -> float:
        self._check_index(i)
        return self._loss_value(i, x) + 0.5 * self.lam * float(x @ x)

    def component_grad(self, i: int, x: np.ndarray) -> np.ndarray:
        self._check_index(i)
        g = self.lam * x if self.lam else np.zeros(self.d)
        self._add_loss_grad(i, x, g)
        return g

    def value(self, x: np.ndarray) -> float:
        return self._mean_loss_value(x) + 0.5 * self.lam * float(x @ x)

    def full_grad(self, x: np.ndarray) -> np.ndarray:
        g = self._mean_loss_grad(x)
        if self.lam:
            g = g + self.lam * x
        return g

    def constants(self) -> tuple[float, float]:
        return self.smoothness_L, self.strong_mu

    @property
    def smoothness_L(self) -> float:
        raise NotImplementedError

    @property
    def strong_mu(self) -> float:
        raise NotImplementedError

    def fingerprint(self) -> str:
        """Content hash identifying the problem (data, regularizer, kind)."""
        h = hashlib.sha256()
        h.update(self.kind.encode())
        h.update(repr(float(self.lam)).encode())
        for arr in self._payload():
            arr = np.ascontiguousarray(arr)
            h.update(str(arr.dtype).encode() + str(arr.shape).encode())
            h.update(arr.tobytes())
        return h.hexdigest()

    def describe(self) -> dict:
        return {"kind": self.kind, "n": self.n, "d": self.d, "lambda": self.lam,
                "L": self.smoothness_L, "mu": self.strong_mu}


class _RowData:
    """CSR row storage shared by the linear-model losses."""

    def _init_rows(self, A):
        A = sparse.csr_matrix(A, dtype=np.float64)
        A.sort_indices()
        self.A = A
        self.At = A.T.tocsr()
        self.n, self.d = A.shape
        self._indptr = A.indptr
        self._indices = A.indices
        self._data = A.data
        self._row_sq = np.asarray(A.multiply(A).sum(axis=1)).ravel()

    def _row(self, i):
        s, e = self._indptr[i], self._indptr[i + 1]
        return self._indices[s:e], self._data[s:e]


class LogisticRegression(_RowData, FiniteSum):
    """``f_i(x) = log(1 + exp(-b_i a_i^T x)) + lam/2 ||x||^2``.

    ``L`` is ``max_i ||a_i||^2 / 4 + lam``, which is ``1/4 + lam`` on unit rows.
    """

    kind = "logistic"

    def __init__(self, data: SparseDataset, lam: float = 0.0):
        if lam < 0:
            raise ValueError("lam must be non-negative")
        self._init_rows(data.to_csr())
        self.b = np.asarray(data.labels, dtype=np.float64)
        self.lam = float(lam)

    @property
    def smoothness_L(self) -> float:
        return 0.25 * float(self._row_sq.max(initial=0.0)) + self.lam

    @property
    def strong_mu(self) -> float:
        return self.lam

    def _loss_value(self, i, x):
        idx, val = self._row(i)
        return log1pexp(-self.b[i] * float(val @ x[idx]))

    def _add_loss_grad(self, i, x, g):
        idx, val = self._row(i)
        z = self.b[i] * float(val @ x[idx])
        g[idx] -= (self.b[i] * sigmoid(-z)) * val

    def _mean_loss_value(self, x):
        z = self.b * (self.A @ x)
        return float(np.mean(log1pexp(-z)))

    def _mean_loss_grad(self, x):
        z = self.b * (self.A @ x)
        return self.At @ (-self.b * sigmoid(-z)) / self.n

    def _payload(self):
        return (self.A.indptr, self.A.indices, self.A.data, self.b)


class LeastSquares(_RowData, FiniteSum):
    """``f_i(x) = 1/2 (a_i^T x - b_i)^2 + lam/2 ||x||^2``."""

    kind = "least_squares"

    def __init__(self, A, b, lam: float = 0.0):
        if lam < 0:
            raise ValueError("lam must be non-negative")
        self._init_rows(A)
        self.b = np.asarray(b, dtype=np.float64)
        if self.b.shape != (self.n,):
            raise ValueError("b must have one entry per row")
        self.lam = float(lam)

    @classmethod
    def from_dataset(cls, data: SparseDataset, lam: float = 0.0) -> "LeastSquares":
        return cls(data.to_csr(), data.labels, lam)

    @property
    def smoothness_L(self) -> float:
        return float(self._row_sq.max(initial=0.0)) + self.lam

    @property
    def strong_mu(self) -> float:
        H = (self.A.T @ self.A).toarray() / self.n
        return max(float(np.linalg.eigvalsh(H)[0]), 0.0) + self.lam

    def _loss_value(self, i, x):
        idx, val = self._row(i)
        r = float(val @ x[idx]) - self.b[i]
        return 0.5 * r * r

    def _add_loss_grad(self, i, x, g):
        idx, val = self._row(i)
        g[idx] += (float(val @ x[idx]) - self.b[i]) * val

    def _mean_loss_value(self, x):
        r = self.A @ x - self.b
        return 0.5 * float(r @ r) / self.n

    def _mean_loss_grad(self, x):
        return self.At @ (self.A @ x - self.b) / self.n

    def _payload(self):
        return (self.A.indptr, self.A.indices, self.A.data, self.b)

    def solve(self) -> np.ndarray:
        H = (self.A.T @ self.A).toarray() / self.n + self.lam * np.eye(self.d)
        return np.linalg.solve(H, self.At @ self.b / self.n)


class DiagonalQuadratic(FiniteSum):
    """``f_i(x) = 1/2 sum_k c_ik (x_k - s_ik)^2`` with ``c_ik >= 0``.

    ``curvature`` and ``centers`` are ``(n, d)`` arrays; a 1-d ``curvature``
    of length ``d`` is shared by all components, and ``centers`` defaults to 0.
    """

    kind = "diagonal_quadratic"

    def __init__(self, curvature, centers=None, n: int | None = None):
        c = np.asarray(curvature, dtype=np.float64)
        if c.ndim == 1:
            c = np.tile(c, (n or 1, 1))
        if np.any(c < 0):
            raise ValueError("curvatures must be non-negative")
        self.c = c
        self.n, self.d = c.shape
        self.s = np.zeros_like(c) if centers is None else np.broadcast_to(
            np.asarray(centers, dtype=np.float64), c.shape).copy()
        self.lam = 0.0
        self._cmean = self.c.mean(axis=0)
        self._csmean = (self.c * self.s).mean(axis=0)

    @property
    def smoothness_L(self) -> float:
        return float(self.c.max())

    @property
    def strong_mu(self) -> float:
        return float(self._cmean.min())

    def _loss_value(self, i, x):
        r = x - self.s[i]
        return 0.5 * float(self.c[i] @ (r * r))

    def _add_loss_grad(self, i, x, g):
        g += self.c[i] * (x - self.s[i])

    def _mean_loss_value(self, x):
        r = x[None, :] - self.s
        return 0.5 * float(np.mean(np.sum(self.c * r * r, axis=1)))

    def _mean_loss_grad(self, x):
        return self._cmean * x - self._csmean

    def _payload(self):
        return (self.c, self.s)

    def solve(self) -> np.ndarray:
        if np.any(self._cmean <= 0):
            raise ValueError("average curvature is singular")
        return self._csmean / self._cmean
