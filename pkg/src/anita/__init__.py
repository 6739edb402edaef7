"""Loopless accelerated variance-reduced gradient methods for finite sums, plus a benchmark harness."""
from .dataio import SparseDataset, SynthConfig, generate_synthetic, load_libsvm, parse_libsvm
from .problems import DiagonalQuadratic, FiniteSum, LeastSquares, LogisticRegression
from .solvers import RunResult, run_agd, run_anita, run_gd, run_svrg_loopless

__version__ = "0.1.0"

__all__ = [
    "SparseDataset", "SynthConfig", "generate_synthetic", "load_libsvm", "parse_libsvm",
    "DiagonalQuadratic", "FiniteSum", "LeastSquares", "LogisticRegression",
    "RunResult", "run_agd", "run_anita", "run_gd", "run_svrg_loopless",
]
