# kernel_oracles/additive.py
from itertools import combinations
from math import comb

import numpy as np

import config
from errors import CombinatorialGuardError, DimensionMismatchError, ValidationError
from .base_kernel import KernelSpec, kernel_from_dict


class Scaled(KernelSpec):
    variant = "scaled"

    def __init__(self, factor: float, base: KernelSpec):
        self.factor = float(factor)
        self.base = base

    def paired(self, X, Y):
        return self.factor * self.base.paired(X, Y)

    def params(self):
        return {"factor": self.factor, "base": self.base.to_dict()}

    @classmethod
    def from_params(cls, params):
        return cls(params["factor"], kernel_from_dict(params["base"]))


class RegularAdditive(KernelSpec):
    """
    Average of `base` over all d-subsets N of the coordinates: the limit of
    regular degree-d sparse features. The enumeration is exact and refuses
    to run past COMBINATORIAL_GUARD subsets.
    """
    variant = "regular_additive"

    def __init__(self, d: int, base: KernelSpec):
        if d < 1:
            raise ValidationError(f"additive order d must be >= 1, got {d}")
        if base.dim is not None and base.dim != d:
            raise ValidationError(f"base kernel is defined on {base.dim} dims, not d={d}")
        self.d = int(d)
        self.base = base

    def paired(self, X, Y):
        l = X.shape[1]
        if self.d > l:
            raise DimensionMismatchError(f"additive order d={self.d} exceeds input dimension l={l}")
        count = comb(l, self.d)
        if count > config.COMBINATORIAL_GUARD:
            raise CombinatorialGuardError(l, self.d, count, config.COMBINATORIAL_GUARD)
        total = np.zeros(X.shape[0])
        for subset in combinations(range(l), self.d):
            cols = list(subset)
            total += self.base.paired(X[:, cols], Y[:, cols])
        return total / count

    def params(self):
        return {"d": self.d, "base": self.base.to_dict()}

    @classmethod
    def from_params(cls, params):
        return cls(params["d"], kernel_from_dict(params["base"]))


class DegreeMixture(KernelSpec):
    """
    sum_d D(d) k_d^reg: the limit of sparse features whose degrees follow D.
    The d = 0 term is the constant E[h(b)^2] of a feature with no inputs.
    """
    variant = "degree_mixture"

    def __init__(self, pmf, bases: dict[int, KernelSpec], zero_constant: float | None = None):
        pmf = np.asarray(pmf, dtype=np.float64)
        if pmf.ndim != 1 or pmf.size < 2:
            raise ValidationError("degree PMF needs entries for 0..l with l >= 1")
        if np.any(pmf < 0) or abs(pmf.sum() - 1.0) > config.PMF_TOLERANCE:
            raise ValidationError(f"degree PMF must be nonnegative and sum to 1 (got {pmf.sum():.15g})")
        if pmf[0] > 0 and zero_constant is None:
            raise ValidationError("PMF puts mass on d = 0; supply the constant E[h(b)^2]")
        self.pmf = pmf
        self.dim = pmf.size - 1
        self.zero_constant = float(zero_constant) if zero_constant is not None else None
        self.bases = {int(d): base for d, base in bases.items()}
        self.terms = {}
        for d in range(1, pmf.size):
            if pmf[d] > 0:
                if d not in self.bases:
                    raise ValidationError(f"PMF puts mass on d = {d} but no base kernel was given for it")
                self.terms[d] = RegularAdditive(d, self.bases[d])

    def paired(self, X, Y):
        self.check_dim(X)
        total = np.full(X.shape[0], self.pmf[0] * (self.zero_constant or 0.0))
        for d, term in self.terms.items():
            total += self.pmf[d] * term.paired(X, Y)
        return total

    def params(self):
        return {
            "pmf": self.pmf.tolist(),
            "bases": {str(d): b.to_dict() for d, b in self.bases.items()},
            "zero_constant": self.zero_constant,
        }

    @classmethod
    def from_params(cls, params):
        bases = {int(d): kernel_from_dict(b) for d, b in params["bases"].items()}
        return cls(params["pmf"], bases, params.get("zero_constant"))
