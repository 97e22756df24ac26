# kernel_oracles/quadrature.py
import math

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss

import config
from errors import ValidationError
from nonlinearities import parse_nonlinearity
from .base_kernel import KernelSpec

_ROWS_PER_CHUNK = 256


class GaussianQuadrature(KernelSpec):
    """
    Numerical-integration oracle E[h(u + b) h(v + b)] for weights N(0, s^2 I),
    where (u, v) = (w·x, w·x') is a centred bivariate Gaussian with covariance
    s^2 [[x·x, x·x'], [x·x', x'·x']] (Gauss-Hermite) and b is uniform on the
    bias interval (Gauss-Legendre), or 0 without bias.
    Used for threshold polynomials, whose closed forms are not implemented.
    """
    variant = "gaussian_quadrature"

    def __init__(self, nonlinearity: str, weight_std: float, bias=None,
                 nodes: int = config.QUADRATURE_NODES, bias_nodes: int = config.QUADRATURE_BIAS_NODES):
        if not weight_std > 0:
            raise ValidationError(f"weight std must be positive, got {weight_std}")
        if bias is not None and not bias[0] < bias[1]:
            raise ValidationError(f"bias interval needs a1 < a2, got {bias}")
        self.h = parse_nonlinearity(nonlinearity)
        self.weight_std = float(weight_std)
        self.bias = tuple(float(v) for v in bias) if bias is not None else None
        self.nodes = int(nodes)
        self.bias_nodes = int(bias_nodes)

        z, wz = hermegauss(self.nodes)
        self._z1, self._z2 = np.meshgrid(z, z, indexing="ij")
        self._w2 = np.outer(wz, wz) / (2.0 * math.pi)
        if self.bias is None:
            self._b, self._wb = np.zeros(1), np.ones(1)
        else:
            t, wt = leggauss(self.bias_nodes)
            a1, a2 = self.bias
            self._b = 0.5 * (a2 - a1) * t + 0.5 * (a1 + a2)
            self._wb = 0.5 * wt

    def _chunk(self, X, Y):
        s2 = self.weight_std**2
        a = s2 * np.sum(X * X, axis=1)
        b = s2 * np.sum(Y * Y, axis=1)
        c = s2 * np.sum(X * Y, axis=1)
        sa = np.sqrt(a)
        coef = np.divide(c, sa, out=np.zeros_like(c), where=sa > 0)
        rest = np.sqrt(np.clip(b - coef**2, 0.0, None))
        u = sa[:, None, None] * self._z1
        v = coef[:, None, None] * self._z1 + rest[:, None, None] * self._z2
        total = np.zeros(X.shape[0])
        for bias, weight in zip(self._b, self._wb):
            products = sum(hu * hv for hu, hv in zip(self.h.apply(u + bias), self.h.apply(v + bias)))
            total += weight * np.sum(products * self._w2, axis=(1, 2))
        return total

    def paired(self, X, Y):
        parts = [self._chunk(X[s:s + _ROWS_PER_CHUNK], Y[s:s + _ROWS_PER_CHUNK])
                 for s in range(0, X.shape[0], _ROWS_PER_CHUNK)]
        return np.concatenate(parts) if parts else np.empty(0)

    def params(self):
        return {
            "nonlinearity": self.h.to_name(), "weight_std": self.weight_std,
            "bias": list(self.bias) if self.bias else None,
            "nodes": self.nodes, "bias_nodes": self.bias_nodes,
        }
