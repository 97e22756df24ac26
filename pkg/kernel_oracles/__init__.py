# kernel_oracles/__init__.py
"""
Exact limiting kernels of dense and sparse random features.

Scalar entry points take two points and return a float; the KernelSpec
classes behind them also evaluate row-paired batches, cross matrices and
Gram matrices.
"""
import csv
from pathlib import Path

import numpy as np

from errors import DimensionMismatchError, ValidationError
from .additive import DegreeMixture, RegularAdditive, Scaled
from .base_kernel import KERNEL_VARIANTS, KernelSpec, as_pairs, kernel_from_dict
from .builder import base_kernel_for_degree, oracle_for
from .dense import RBF, ArcCos0, DenseSign, MGFGaussian
from .quadrature import GaussianQuadrature
from .sparse import SparseSignD1, SparseStepD1

__all__ = [
    "KERNEL_VARIANTS", "KernelSpec", "kernel_from_dict", "oracle_for", "base_kernel_for_degree",
    "RBF", "ArcCos0", "DenseSign", "MGFGaussian", "SparseStepD1", "SparseSignD1",
    "RegularAdditive", "DegreeMixture", "Scaled", "GaussianQuadrature",
    "rbf_kernel", "arccos0_kernel", "dense_sign_kernel", "mgf_gaussian_kernel",
    "sparse_step_d1", "sparse_sign_d1", "regular_additive_kernel", "degree_mixture_kernel",
    "gram_matrix", "write_gram_csv",
]


def rbf_kernel(x, x2, sigma: float) -> float:
    return RBF(sigma).evaluate(x, x2)


def arccos0_kernel(x, x2) -> float:
    return ArcCos0().evaluate(x, x2)


def dense_sign_kernel(x, x2, sigma: float, a1: float, a2: float, l: int) -> float:
    return DenseSign(sigma, a1, a2, l).evaluate(x, x2)


def mgf_gaussian_kernel(x, x2, mean, covariance, bias_constant: float) -> float:
    return MGFGaussian(mean, covariance, bias_constant).evaluate(x, x2)


def sparse_step_d1(x, x2) -> float:
    return SparseStepD1().evaluate(x, x2)


def sparse_sign_d1(x, x2, c: float, l: int) -> float:
    X, _ = as_pairs(x, x2)
    if X.shape[1] != l:
        raise DimensionMismatchError(f"inputs have {X.shape[1]} coordinates, expected l={l}")
    return SparseSignD1(c).evaluate(x, x2)


def regular_additive_kernel(x, x2, d: int, base_kernel: KernelSpec) -> float:
    return RegularAdditive(d, base_kernel).evaluate(x, x2)


def degree_mixture_kernel(x, x2, pmf, per_degree_bases: dict[int, KernelSpec], zero_constant: float | None = None) -> float:
    return DegreeMixture(pmf, per_degree_bases, zero_constant).evaluate(x, x2)


def gram_matrix(spec: KernelSpec, X, workers: int = 1) -> np.ndarray:
    if not isinstance(spec, KernelSpec):
        raise ValidationError(f"expected a KernelSpec, got {type(spec).__name__}")
    return spec.gram(X, workers=workers)


def write_gram_csv(G: np.ndarray, path) -> Path:
    """Row-major CSV with a leading `n,<n>` header row."""
    G = np.asarray(G)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise DimensionMismatchError(f"Gram matrix must be square, got {G.shape}")
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["n", G.shape[0]])
        for row in G:
            writer.writerow([repr(float(v)) for v in row])
    return path
