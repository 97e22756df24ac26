# kernel_oracles/builder.py
import math

import numpy as np

from errors import NoOracleError
from nonlinearities import Cosine, Exponential, Nonlinearity, Sign, SinCosPair, Step, ThresholdPoly
from sparse_features import DegreeSpec, WeightLaw
from .additive import DegreeMixture, RegularAdditive, Scaled
from .base_kernel import KernelSpec
from .dense import RBF, ArcCos0, DenseSign, MGFGaussian
from .quadrature import GaussianQuadrature
from .sparse import SparseSignD1, SparseStepD1


def _full_periods(interval, period: float) -> bool:
    if interval is None:
        return False
    ratio = (interval[1] - interval[0]) / period
    return round(ratio) >= 1 and abs(ratio - round(ratio)) < 1e-9


def base_kernel_for_degree(d: int, weight_law: WeightLaw, nonlinearity: Nonlinearity) -> KernelSpec:
    """Limiting kernel of one degree-d feature restricted to its neighborhood."""
    bias = weight_law.bias
    if isinstance(nonlinearity, Sign):
        if bias is None:
            raise NoOracleError("sign features need a uniform bias law for a closed-form kernel")
        if d == 1:
            return SparseSignD1.from_laws(weight_law.mean_abs(1), *bias)
        if weight_law.gaussian:
            std = float(weight_law.std_for_degree(d))
            return DenseSign(std * math.sqrt(d), bias[0], bias[1], d)
        raise NoOracleError("sign features with Rademacher weights only have a closed form at d = 1")

    if not weight_law.gaussian:
        raise NoOracleError(f"no closed form for {nonlinearity.to_name()} features with Rademacher weights")
    std = float(weight_law.std_for_degree(d))

    if isinstance(nonlinearity, SinCosPair):
        return RBF(1.0 / std)
    if isinstance(nonlinearity, Cosine):
        if not _full_periods(bias, math.pi):
            raise NoOracleError("cosine features reduce to the RBF kernel only when the bias covers whole periods")
        return RBF(1.0 / std)
    if isinstance(nonlinearity, Step):
        if bias is not None:
            raise NoOracleError("biased step features have no closed-form kernel")
        return Scaled(0.5, ArcCos0())
    if isinstance(nonlinearity, Exponential):
        return MGFGaussian(np.zeros(d), std**2 * np.eye(d), nonlinearity.bias_mean_square(bias))
    if isinstance(nonlinearity, ThresholdPoly):
        return GaussianQuadrature(nonlinearity.to_name(), std, bias)
    raise NoOracleError(f"no oracle for {nonlinearity.to_name()} features")


def oracle_for(l: int, degree_spec: DegreeSpec, weight_law: WeightLaw, nonlinearity: Nonlinearity) -> KernelSpec:
    """
    The kernel that scale-normalized feature products of this configuration
    converge to as m grows.
    """
    if degree_spec.variant == "regular":
        d = degree_spec.d
        if d == 1 and isinstance(nonlinearity, Step) and weight_law.gaussian and weight_law.bias is None:
            return Scaled(0.5, SparseStepD1())
        base = base_kernel_for_degree(d, weight_law, nonlinearity)
        if d == 1 and isinstance(base, SparseSignD1):
            return base
        return RegularAdditive(d, base)

    pmf = degree_spec.pmf_vector()
    bases = {d: base_kernel_for_degree(d, weight_law, nonlinearity) for d in range(1, l + 1) if pmf[d] > 0}
    return DegreeMixture(pmf, bases, nonlinearity.bias_mean_square(weight_law.bias))
