# kernel_oracles/sparse.py
"""Closed forms for regular degree d = 1 features."""
import numpy as np

from errors import ValidationError
from .base_kernel import KernelSpec


class SparseStepD1(KernelSpec):
    """
    Bias-free step features with Gaussian weights: one minus the normalized
    Hamming distance between sgn(x) and sgn(x'). sgn(0) = 0, so a zero
    coordinate disagrees with both signs.

    Two zero coordinates count as agreeing, so Scaled(1/2, SparseStepD1())
    gives 1/2 there, while bias-free step features give Theta(0)^2 = 0.
    Inputs with exact zeros therefore sit off the feature limit.
    """
    variant = "sparse_step_d1"

    def paired(self, X, Y):
        return 1.0 - np.mean(np.sign(X) != np.sign(Y), axis=1)

    def params(self):
        return {}


class SparseSignD1(KernelSpec):
    """Random stumps: 1 - (c / l) ||x - x'||_1 with c = 2 E|w| / (a2 - a1). May go negative."""
    variant = "sparse_sign_d1"

    def __init__(self, c: float):
        if not c > 0:
            raise ValidationError(f"stump constant c must be positive, got {c}")
        self.c = float(c)

    @classmethod
    def from_laws(cls, mean_abs_weight: float, a1: float, a2: float) -> "SparseSignD1":
        if not a1 < a2:
            raise ValidationError(f"bias interval needs a1 < a2, got ({a1}, {a2})")
        return cls(2.0 * mean_abs_weight / (a2 - a1))

    def paired(self, X, Y):
        return 1.0 - self.c * np.mean(np.abs(X - Y), axis=1)

    def params(self):
        return {"c": self.c}
