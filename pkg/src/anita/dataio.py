"""LIBSVM reading/writing, row normalization and synthetic data generation.

Datasets are stored row-sparse in CSR layout (``indptr``/``indices``/``values``)
with 0-based feature indices and labels in {-1, +1}.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import sparse


class LibsvmParseError(ValueError):
    """Raised on malformed LIBSVM input. ``lineno`` is 1-based (0 for whole-input errors)."""

    def __init__(self, message: str, lineno: int = 0):
        self.lineno = lineno
        if lineno:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class SparseDataset:
    n_samples: int
    n_features: int
    indptr: np.ndarray
    indices: np.ndarray
    values: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        for name in ("indptr", "indices", "values", "labels"):
            getattr(self, name).setflags(write=False)
        if self.indptr.shape != (self.n_samples + 1,):
            raise ValueError("indptr must have n_samples + 1 entries")
        if self.labels.shape != (self.n_samples,):
            raise ValueError("labels must have n_samples entries")
        if not np.all(np.abs(self.labels) == 1.0):
            raise ValueError("labels must be -1 or +1")
        if self.indices.size and self.indices.max() >= self.n_features:
            raise ValueError("feature index out of range")
        if np.any(self.values == 0.0):
            raise ValueError("explicit zeros are not stored")

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        s, e = self.indptr[i], self.indptr[i + 1]
        return self.indices[s:e], self.values[s:e]

    def nnz(self) -> int:
        return int(self.indptr[-1])

    def to_csr(self) -> sparse.csr_matrix:
        return sparse.csr_matrix(
            (self.values, self.indices, self.indptr),
            shape=(self.n_samples, self.n_features),
        )

    @classmethod
    def from_rows(cls, rows, labels, n_features: int | None = None) -> "SparseDataset":
        """Build from a list of ``[(index, value), ...]`` rows (0-based indices)."""
        indptr = [0]
        indices: list[int] = []
        values: list[float] = []
        for row in rows:
            for j, v in row:
                if v != 0.0:
                    indices.append(int(j))
                    values.append(float(v))
            indptr.append(len(indices))
        if n_features is None:
            n_features = max(indices) + 1 if indices else 0
        return cls(
            n_samples=len(indptr) - 1,
            n_features=n_features,
            indptr=np.asarray(indptr, dtype=np.int64),
            indices=np.asarray(indices, dtype=np.int64),
            values=np.asarray(values, dtype=np.float64),
            labels=np.asarray(labels, dtype=np.float64),
        )

    @classmethod
    def from_dense(cls, A: np.ndarray, labels) -> "SparseDataset":
        A = np.asarray(A, dtype=np.float64)
        m = sparse.csr_matrix(A)
        m.eliminate_zeros()
        m.sort_indices()
        return cls(
            n_samples=A.shape[0],
            n_features=A.shape[1],
            indptr=m.indptr.astype(np.int64),
            indices=m.indices.astype(np.int64),
            values=m.data.astype(np.float64),
            labels=np.asarray(labels, dtype=np.float64),
        )

    def __eq__(self, other):
        if not isinstance(other, SparseDataset):
            return NotImplemented
        return (
            self.n_samples == other.n_samples
            and self.n_features == other.n_features
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.labels, other.labels)
        )

    __hash__ = None


@dataclass(frozen=True)
class SynthConfig:
    n_samples: int
    n_features: int
    seed: int
    label_noise: float = 0.0
    density: float = 1.0

    def __post_init__(self):
        if self.n_samples < 1 or self.n_features < 1:
            raise ValueError("n_samples and n_features must be positive")
        if not 0.0 < self.density <= 1.0:
            raise ValueError("density must lie in (0, 1]")
        if not 0.0 <= self.label_noise <= 1.0:
            raise ValueError("label_noise must lie in [0, 1]")


def _label(token: str, lineno: int) -> float:
    try:
        y = float(token)
    except ValueError:
        raise LibsvmParseError(f"non-numeric label {token!r}", lineno) from None
    if not np.isfinite(y):
        raise LibsvmParseError(f"non-finite label {token!r}", lineno)
    return -1.0 if y <= 0 else 1.0


def parse_libsvm(data: Union[bytes, str]) -> SparseDataset:
    """Parse LIBSVM text (``<label> <idx>:<val> ...``, 1-based indices).

    Labels ``<= 0`` map to -1, everything else to +1. Explicit zero values are
    dropped. Blank lines are skipped.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    indptr = [0]
    indices: list[int] = []
    values: list[float] = []
    labels: list[float] = []
    max_index = 0
    for lineno, line in enumerate(data.splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        labels.append(_label(tokens[0], lineno))
        prev = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise LibsvmParseError(f"expected <index>:<value>, got {tok!r}", lineno)
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise LibsvmParseError(f"non-numeric token {tok!r}", lineno) from None
            if idx < 1:
                raise LibsvmParseError(f"index {idx} < 1", lineno)
            if idx <= prev:
                raise LibsvmParseError(f"non-increasing indices ({prev} then {idx})", lineno)
            if not np.isfinite(val):
                raise LibsvmParseError(f"non-finite value {tok!r}", lineno)
            prev = idx
            max_index = max(max_index, idx)
            if val != 0.0:
                indices.append(idx - 1)
                values.append(val)
        indptr.append(len(indices))
    if not labels:
        raise LibsvmParseError("empty input")
    return SparseDataset(
        n_samples=len(labels),
        n_features=max_index,
        indptr=np.asarray(indptr, dtype=np.int64),
        indices=np.asarray(indices, dtype=np.int64),
        values=np.asarray(values, dtype=np.float64),
        labels=np.asarray(labels, dtype=np.float64),
    )


def load_libsvm(path) -> SparseDataset:
    with open(path, "rb") as fh:
        return parse_libsvm(fh.read())


def format_libsvm(ds: SparseDataset) -> str:
    """Inverse of :func:`parse_libsvm` for datasets whose last feature column is populated."""
    lines = []
    for i in range(ds.n_samples):
        idx, val = ds.row(i)
        label = "+1" if ds.labels[i] > 0 else "-1"
        feats = " ".join(f"{j + 1}:{v!r}" for j, v in zip(idx.tolist(), val.tolist()))
        lines.append(f"{label} {feats}".rstrip())
    return "\n".join(lines) + "\n"


def normalize_rows(ds: SparseDataset) -> SparseDataset:
    """Scale every nonzero row to unit Euclidean norm; empty rows are left alone."""
    counts = np.diff(ds.indptr)
    rows = np.repeat(np.arange(ds.n_samples), counts)
    # divide by the row max first so tiny or huge entries do not under/overflow when squared
    peak = np.zeros(ds.n_samples)
    np.maximum.at(peak, rows, np.abs(ds.values))
    peak[counts == 0] = 1.0
    scaled = ds.values / peak[rows]
    sq = np.bincount(rows, weights=scaled**2, minlength=ds.n_samples)
    norms = np.where(counts > 0, np.sqrt(sq), 1.0)
    values = scaled / norms[rows]
    return SparseDataset(
        n_samples=ds.n_samples,
        n_features=ds.n_features,
        indptr=ds.indptr.copy(),
        indices=ds.indices.copy(),
        values=values,
        labels=ds.labels.copy(),
    )


def generate_synthetic(cfg: SynthConfig) -> SparseDataset:
    """Random sparse Gaussian features labelled by a random linear separator.

    A pure function of ``cfg``: draws, in order, the sparsity mask, the feature
    values, the separator, and the label flips from one seeded stream.
    """
    rng = np.random.default_rng(cfg.seed)
    n, d = cfg.n_samples, cfg.n_features
    mask = rng.random((n, d)) < cfg.density
    A = np.where(mask, rng.standard_normal((n, d)), 0.0)
    w_true = rng.standard_normal(d)
    margins = A @ w_true
    labels = np.where(margins >= 0.0, 1.0, -1.0)
    flips = rng.random(n) < cfg.label_noise
    labels[flips] *= -1.0
    return normalize_rows(SparseDataset.from_dense(A, labels))


def synth_w_true(cfg: SynthConfig) -> np.ndarray:
    """The separator drawn inside :func:`generate_synthetic` for ``cfg``."""
    rng = np.random.default_rng(cfg.seed)
    n, d = cfg.n_samples, cfg.n_features
    rng.random((n, d))
    rng.standard_normal((n, d))
    return rng.standard_normal(d)
