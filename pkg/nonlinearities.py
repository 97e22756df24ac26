# nonlinearities.py
import math
from abc import ABC, abstractmethod

import numpy as np

from errors import ValidationError


class Nonlinearity(ABC):
    """
    Pointwise activation h applied to the pre-activation w·x + b of a feature.
    Subclasses declare how many outputs each feature emits and the constant
    E[h(b)^2] that a degree-0 feature contributes to the limiting kernel.
    """
    name: str = ""
    outputs: int = 1
    lipschitz: bool = False

    @abstractmethod
    def apply(self, z: np.ndarray) -> list[np.ndarray]:
        """Returns `outputs` arrays shaped like z."""

    @abstractmethod
    def bias_mean_square(self, interval: tuple[float, float] | None) -> float:
        """E[sum_k h_k(b)^2] for b ~ U(interval), or h(0)^2 when there is no bias."""

    def to_name(self) -> str:
        return self.name

    def __eq__(self, other) -> bool:
        return isinstance(other, Nonlinearity) and self.to_name() == other.to_name()

    def __hash__(self) -> int:
        return hash(self.to_name())

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.to_name()!r})"


class Step(Nonlinearity):
    name = "step"

    def apply(self, z):
        return [(z > 0).astype(np.float64)]

    def bias_mean_square(self, interval):
        if interval is None:
            return 0.0
        a1, a2 = interval
        return (max(a2, 0.0) - max(a1, 0.0)) / (a2 - a1)


class Sign(Nonlinearity):
    name = "sign"

    def apply(self, z):
        return [np.sign(z).astype(np.float64)]

    def bias_mean_square(self, interval):
        # b == 0 has probability zero under a continuous bias law
        return 0.0 if interval is None else 1.0


class Cosine(Nonlinearity):
    """sqrt(2)·cos(z): with b ~ U[-pi, pi] the feature products average to cos(w·(x - x'))."""
    name = "cosine"
    lipschitz = True

    def apply(self, z):
        return [math.sqrt(2.0) * np.cos(z)]

    def bias_mean_square(self, interval):
        if interval is None:
            return 2.0
        a1, a2 = interval
        return 1.0 + (math.sin(2 * a2) - math.sin(2 * a1)) / (2 * (a2 - a1))


class SinCosPair(Nonlinearity):
    name = "sincos"
    outputs = 2
    lipschitz = True

    def apply(self, z):
        return [np.sin(z), np.cos(z)]

    def bias_mean_square(self, interval):
        return 1.0


class Exponential(Nonlinearity):
    name = "exponential"

    def apply(self, z):
        return [np.exp(z)]

    def bias_mean_square(self, interval):
        if interval is None:
            return 1.0
        a1, a2 = interval
        return (math.exp(2 * a2) - math.exp(2 * a1)) / (2 * (a2 - a1))


class ThresholdPoly(Nonlinearity):
    """max(z, 0)^p; p = 0 is the step function."""

    def __init__(self, p: int):
        if int(p) != p or p < 0:
            raise ValidationError(f"threshold polynomial order must be a nonnegative integer, got {p}")
        self.p = int(p)
        self.lipschitz = self.p == 1

    @property
    def name(self) -> str:
        return "threshold-poly"

    def to_name(self) -> str:
        return f"threshold-poly:{self.p}"

    def apply(self, z):
        if self.p == 0:
            return [(z > 0).astype(np.float64)]
        return [np.where(z > 0, z, 0.0) ** self.p]

    def bias_mean_square(self, interval):
        if interval is None:
            return 0.0
        a1, a2 = interval
        q = 2 * self.p + 1
        return (max(a2, 0.0) ** q - max(a1, 0.0) ** q) / (q * (a2 - a1))


NONLINEARITIES = {
    "step": Step,
    "sign": Sign,
    "cosine": Cosine,
    "sincos": SinCosPair,
    "exponential": Exponential,
}


def parse_nonlinearity(text: str) -> Nonlinearity:
    """'cosine', 'sincos', 'threshold-poly:1', ..."""
    name, _, arg = text.strip().lower().partition(":")
    if name == "threshold-poly":
        try:
            return ThresholdPoly(int(arg or 1))
        except ValueError as e:
            raise ValidationError(f"bad threshold-poly order in {text!r}") from e
    if name not in NONLINEARITIES or arg:
        raise ValidationError(
            f"unknown nonlinearity {text!r}; expected one of {sorted(NONLINEARITIES)} or threshold-poly:<p>"
        )
    return NONLINEARITIES[name]()
