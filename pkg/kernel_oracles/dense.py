# kernel_oracles/dense.py
import math

import numpy as np

from errors import DomainError, ValidationError
from .base_kernel import KernelSpec


class RBF(KernelSpec):
    """exp(-||x - x'||^2 / (2 sigma^2)); the limit of Fourier features with weights N(0, sigma^-2 I)."""
    variant = "rbf"

    def __init__(self, sigma: float):
        if not sigma > 0:
            raise ValidationError(f"RBF length scale must be positive, got {sigma}")
        self.sigma = float(sigma)

    def paired(self, X, Y):
        return np.exp(-np.sum((X - Y) ** 2, axis=1) / (2.0 * self.sigma**2))

    def params(self):
        return {"sigma": self.sigma}


class ArcCos0(KernelSpec):
    """1 - theta/pi, theta the angle between x and x'."""
    variant = "arccos0"

    def paired(self, X, Y):
        nx = np.linalg.norm(X, axis=1)
        ny = np.linalg.norm(Y, axis=1)
        if np.any(nx == 0) or np.any(ny == 0):
            raise DomainError("arc-cosine kernel is undefined for the zero vector")
        U = X / nx[:, None]
        V = Y / ny[:, None]
        # half-angle form stays accurate near theta = 0 and theta = pi
        theta = 2.0 * np.arctan2(np.linalg.norm(U - V, axis=1), np.linalg.norm(U + V, axis=1))
        return 1.0 - theta / math.pi

    def params(self):
        return {}


class DenseSign(KernelSpec):
    """
    Sign features with b ~ U[a1, a2] and w ~ N(0, sigma^2 / l I):
    1 - 2 sigma sqrt(2 / (pi l)) ||x - x'||_2 / (a2 - a1).
    Valid while w·x stays inside the bias interval.
    """
    variant = "dense_sign"

    def __init__(self, sigma: float, a1: float, a2: float, l: int):
        if not sigma > 0:
            raise ValidationError(f"sigma must be positive, got {sigma}")
        if not a1 < a2:
            raise ValidationError(f"bias interval needs a1 < a2, got ({a1}, {a2})")
        if l < 1:
            raise ValidationError(f"l must be positive, got {l}")
        self.sigma, self.a1, self.a2, self.l = float(sigma), float(a1), float(a2), int(l)

    def paired(self, X, Y):
        slope = 2.0 * self.sigma * math.sqrt(2.0 / (math.pi * self.l)) / (self.a2 - self.a1)
        return 1.0 - slope * np.linalg.norm(X - Y, axis=1)

    def params(self):
        return {"sigma": self.sigma, "a1": self.a1, "a2": self.a2, "l": self.l}


class MGFGaussian(KernelSpec):
    """Exponential features with w ~ N(mean, covariance): exp(m·s + s'Σs/2) · E exp(2b), s = x + x'."""
    variant = "mgf_gaussian"

    def __init__(self, mean, covariance, bias_constant: float = 1.0):
        self.mean = np.asarray(mean, dtype=np.float64).ravel()
        self.covariance = np.atleast_2d(np.asarray(covariance, dtype=np.float64))
        l = self.mean.size
        if self.covariance.shape != (l, l):
            raise ValidationError(f"covariance must be {l}x{l}, got {self.covariance.shape}")
        if not np.allclose(self.covariance, self.covariance.T, rtol=0, atol=1e-12):
            raise ValidationError("covariance must be symmetric")
        eig = np.linalg.eigvalsh(self.covariance) if l else np.zeros(0)
        if eig.size and eig.min() < -1e-12 * max(1.0, abs(eig).max()):
            raise ValidationError("covariance must be positive semidefinite")
        if not (math.isfinite(bias_constant) and bias_constant > 0):
            raise ValidationError(f"bias constant E exp(2b) must be finite and positive, got {bias_constant}")
        self.bias_constant = float(bias_constant)
        self.dim = l

    def paired(self, X, Y):
        self.check_dim(X)
        S = X + Y
        return np.exp(S @ self.mean + 0.5 * np.einsum("ij,jk,ik->i", S, self.covariance, S)) * self.bias_constant

    def params(self):
        return {"mean": self.mean.tolist(), "covariance": self.covariance.tolist(), "bias_constant": self.bias_constant}
