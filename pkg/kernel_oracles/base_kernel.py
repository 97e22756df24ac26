# kernel_oracles/base_kernel.py
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor

import numpy as np

import config
from errors import DimensionMismatchError, ValidationError

KERNEL_VARIANTS: dict[str, type["KernelSpec"]] = {}


def as_pairs(X, Y) -> tuple[np.ndarray, np.ndarray]:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if X.shape != Y.shape:
        raise DimensionMismatchError(f"paired inputs differ in shape: {X.shape} vs {Y.shape}")
    return X, Y


class KernelSpec(ABC):
    """
    An exact kernel oracle. Subclasses implement `paired`, the kernel value for
    each row pair (x_j, y_j); everything else (scalar evaluation, cross and Gram
    matrices, JSON form) is built on top of it here.
    """
    variant: str = ""
    dim: int | None = None

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        if cls.variant:
            KERNEL_VARIANTS[cls.variant] = cls

    @abstractmethod
    def paired(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Kernel values for row pairs of two equally shaped n x l arrays."""

    @abstractmethod
    def params(self) -> dict:
        """JSON-ready constructor arguments."""

    @classmethod
    def from_params(cls, params: dict) -> "KernelSpec":
        return cls(**params)

    def check_dim(self, X: np.ndarray):
        if self.dim is not None and X.shape[1] != self.dim:
            raise DimensionMismatchError(f"{self.variant} kernel is defined on {self.dim} dims, got {X.shape[1]}")

    def evaluate(self, x, y) -> float:
        X, Y = as_pairs(x, y)
        if X.shape[0] != 1:
            raise DimensionMismatchError("evaluate takes two single points; use paired for batches")
        return float(self.paired(X, Y)[0])

    def cross(self, X, Y) -> np.ndarray:
        """n_x x n_y matrix of k(x_i, y_j)."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
        if X.shape[1] != Y.shape[1]:
            raise DimensionMismatchError(f"cross kernel inputs differ in width: {X.shape[1]} vs {Y.shape[1]}")
        out = np.empty((X.shape[0], Y.shape[0]))
        if Y.shape[0] == 0:
            return out
        rows = max(1, config.GRAM_CHUNK_PAIRS // Y.shape[0])
        for start in range(0, X.shape[0], rows):
            block = X[start:start + rows]
            values = self.paired(np.repeat(block, Y.shape[0], axis=0), np.tile(Y, (block.shape[0], 1)))
            out[start:start + block.shape[0]] = values.reshape(block.shape[0], Y.shape[0])
        return out

    def gram(self, X, workers: int = 1) -> np.ndarray:
        """Symmetric n x n Gram matrix, assembled from fixed chunks of the upper triangle."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        n = X.shape[0]
        iu, ju = np.triu_indices(n)
        chunks = [(s, min(s + config.GRAM_CHUNK_PAIRS, iu.size)) for s in range(0, iu.size, config.GRAM_CHUNK_PAIRS)]

        def run(bounds):
            s, e = bounds
            return self.paired(X[iu[s:e]], X[ju[s:e]])

        if workers > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(run, chunks))
        else:
            parts = [run(c) for c in chunks]
        values = np.concatenate(parts) if parts else np.empty(0)
        G = np.empty((n, n))
        G[iu, ju] = values
        G[ju, iu] = values
        return G

    def to_dict(self) -> dict:
        return {"variant": self.variant, **self.params()}

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


def kernel_from_dict(data: dict) -> KernelSpec:
    data = dict(data)
    variant = data.pop("variant", None)
    if variant not in KERNEL_VARIANTS:
        raise ValidationError(f"unknown kernel variant {variant!r}; expected one of {sorted(KERNEL_VARIANTS)}")
    return KERNEL_VARIANTS[variant].from_params(data)
