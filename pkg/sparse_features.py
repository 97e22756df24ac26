# sparse_features.py
"""
Sparse random feature maps.

Each feature i connects to a neighborhood N_i of d_i input coordinates, drawn
in two steps: the degree d_i from a degree distribution, then N_i uniformly
among the C(l, d_i) subsets. Nonzero weights follow a WeightLaw and the
feature emits scale * h(w_i · x_{N_i} + b_i) with scale = 1/sqrt(m).

The pre-activation is w·x + b everywhere. Biases are drawn from the given
interval; for symmetric intervals this is the same distribution as w·x - b.
"""
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse
from scipy.stats import binom

import config
from errors import DimensionMismatchError, ValidationError
from nonlinearities import Nonlinearity, parse_nonlinearity
from rng import as_generator, stream


@dataclass(frozen=True)
class DegreeSpec:
    """Degree distribution D(d) over in-degrees 0..l."""
    variant: str
    l: int
    d: int | None = None
    p: float | None = None
    pmf: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.l < 1:
            raise ValidationError(f"input dimension l must be positive, got {self.l}")
        if self.variant == "regular":
            if self.d is None or not 1 <= self.d <= self.l:
                raise ValidationError(f"regular degree must satisfy 1 <= d <= l={self.l}, got {self.d}")
        elif self.variant == "binomial":
            if self.p is None or not 0.0 <= self.p <= 1.0:
                raise ValidationError(f"binomial probability must lie in [0, 1], got {self.p}")
        elif self.variant == "custom":
            pmf = np.asarray(self.pmf if self.pmf is not None else (), dtype=np.float64)
            if pmf.shape != (self.l + 1,):
                raise ValidationError(f"custom PMF needs l+1={self.l + 1} entries, got {pmf.size}")
            if np.any(pmf < 0) or not np.all(np.isfinite(pmf)):
                raise ValidationError("custom PMF entries must be finite and nonnegative")
            if abs(pmf.sum() - 1.0) > config.PMF_TOLERANCE:
                raise ValidationError(f"custom PMF must sum to 1 (got {pmf.sum():.15g})")
        else:
            raise ValidationError(f"unknown degree variant {self.variant!r}")

    @classmethod
    def regular(cls, l: int, d: int) -> "DegreeSpec":
        return cls("regular", l, d=int(d))

    @classmethod
    def binomial(cls, l: int, p: float) -> "DegreeSpec":
        return cls("binomial", l, p=float(p))

    @classmethod
    def custom(cls, l: int, pmf) -> "DegreeSpec":
        return cls("custom", l, pmf=tuple(float(v) for v in pmf))

    def pmf_vector(self) -> np.ndarray:
        if self.variant == "regular":
            out = np.zeros(self.l + 1)
            out[self.d] = 1.0
            return out
        if self.variant == "binomial":
            return binom.pmf(np.arange(self.l + 1), self.l, self.p)
        return np.asarray(self.pmf, dtype=np.float64)

    def to_dict(self) -> dict:
        out = {"variant": self.variant, "l": self.l}
        if self.variant == "regular":
            out["d"] = self.d
        elif self.variant == "binomial":
            out["p"] = self.p
        else:
            out["pmf"] = list(self.pmf)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "DegreeSpec":
        return cls(
            data["variant"], int(data["l"]), d=data.get("d"), p=data.get("p"),
            pmf=tuple(data["pmf"]) if data.get("pmf") is not None else None,
        )


@dataclass(frozen=True)
class WeightLaw:
    """
    Law of the nonzero weights given the degree, plus the bias law.

    gaussian-iso:    w ~ N(0, sigma^2) per connection.
    gaussian-scaled: w ~ N(0, sigma^2 / d_i), so E||w_i||^2 = sigma^2 for every degree.
    rademacher:      w = +/- scale.
    """
    kind: str
    sigma: float
    bias: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in ("gaussian-iso", "gaussian-scaled", "rademacher"):
            raise ValidationError(f"unknown weight law {self.kind!r}")
        if not self.sigma > 0:
            raise ValidationError(f"weight scale must be positive, got {self.sigma}")
        if self.bias is not None:
            a1, a2 = self.bias
            if not a1 < a2:
                raise ValidationError(f"bias interval needs a1 < a2, got ({a1}, {a2})")

    @property
    def gaussian(self) -> bool:
        return self.kind != "rademacher"

    def std_for_degree(self, d) -> np.ndarray | float:
        if self.kind == "gaussian-scaled":
            return self.sigma / np.sqrt(np.maximum(d, 1))
        return self.sigma * np.ones_like(d, dtype=np.float64) if np.ndim(d) else self.sigma

    def mean_abs(self, d: int) -> float:
        """E|w| of one nonzero weight for a degree-d feature."""
        if self.kind == "rademacher":
            return self.sigma
        return float(self.std_for_degree(d)) * math.sqrt(2.0 / math.pi)

    def sample_weights(self, degrees: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        total = int(degrees.sum())
        if self.kind == "rademacher":
            return self.sigma * (2.0 * rng.integers(0, 2, size=total) - 1.0)
        return rng.standard_normal(total) * np.repeat(self.std_for_degree(degrees), degrees)

    def sample_biases(self, count: int, rng: np.random.Generator) -> np.ndarray:
        if self.bias is None:
            return np.zeros(count)
        return rng.uniform(self.bias[0], self.bias[1], size=count)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "sigma": self.sigma, "bias": list(self.bias) if self.bias else None}

    @classmethod
    def from_dict(cls, data: dict) -> "WeightLaw":
        bias = data.get("bias")
        return cls(data["kind"], float(data["sigma"]), tuple(bias) if bias else None)


@dataclass(frozen=True, eq=False)
class SparseFeatureMap:
    """
    m sparse features in CSR layout: row i holds the sorted neighborhood N_i
    (`indices[indptr[i]:indptr[i+1]]`) and the matching weights.
    Immutable after construction; safe to share between threads.
    """
    l: int
    m: int
    degrees: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    biases: np.ndarray
    nonlinearity: Nonlinearity
    seed: int
    degree_spec: DegreeSpec | None = None
    weight_law: WeightLaw | None = None
    scale: float = field(default=0.0)

    def __post_init__(self):
        if self.m < 1:
            raise ValidationError(f"feature count m must be positive, got {self.m}")
        if not self.scale:
            object.__setattr__(self, "scale", 1.0 / math.sqrt(self.m))
        if self.degrees.size != self.m or self.biases.size != self.m or self.indptr.size != self.m + 1:
            raise ValidationError(
                f"need one degree and one bias per feature (m={self.m}), "
                f"got {self.degrees.size} degrees and {self.biases.size} biases"
            )
        if np.any(self.degrees < 0):
            raise ValidationError("degrees must be nonnegative")
        if self.indptr[-1] != self.indices.size or self.indices.size != self.weights.size:
            raise ValidationError("stored weights must equal the sum of the degrees")
        if np.any(np.diff(self.indptr) != self.degrees):
            raise ValidationError("degrees disagree with the neighborhood layout")
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= self.l):
            raise ValidationError(f"neighborhood index outside [0, {self.l})")
        same_row = np.diff(self.feature_of_entry) == 0
        if np.any(np.diff(self.indices)[same_row] <= 0):
            raise ValidationError("neighborhoods must list distinct coordinates in increasing order")

    @property
    def n_outputs(self) -> int:
        return self.m * self.nonlinearity.outputs

    @property
    def neighborhoods(self) -> list[np.ndarray]:
        return [self.indices[self.indptr[i]:self.indptr[i + 1]] for i in range(self.m)]

    @property
    def weight_rows(self) -> list[np.ndarray]:
        return [self.weights[self.indptr[i]:self.indptr[i + 1]] for i in range(self.m)]

    @cached_property
    def csr(self) -> scipy.sparse.csr_matrix:
        return scipy.sparse.csr_matrix((self.weights, self.indices, self.indptr), shape=(self.m, self.l))

    @cached_property
    def feature_of_entry(self) -> np.ndarray:
        return np.repeat(np.arange(self.m), self.degrees)

    def weight_norms_squared(self) -> np.ndarray:
        return np.bincount(self.feature_of_entry, weights=self.weights**2, minlength=self.m)

    def affected_features(self, k: int) -> np.ndarray:
        """Boolean mask of features whose neighborhood contains coordinate k."""
        mask = np.zeros(self.m, dtype=bool)
        mask[self.feature_of_entry[self.indices == k]] = True
        return mask


# --- Sampling ---

def sample_degrees(spec: DegreeSpec, m: int, rng_seed) -> np.ndarray:
    rng = as_generator(rng_seed)
    if spec.variant == "regular":
        return np.full(m, spec.d, dtype=np.int64)
    if spec.variant == "binomial":
        return rng.binomial(spec.l, spec.p, size=m).astype(np.int64)
    return rng.choice(spec.l + 1, size=m, p=spec.pmf_vector()).astype(np.int64)


def sample_neighborhood(l: int, d: int, rng_stream) -> np.ndarray:
    if not 0 <= d <= l:
        raise ValidationError(f"degree must satisfy 0 <= d <= l={l}, got {d}")
    rng = as_generator(rng_stream)
    return np.sort(rng.choice(l, size=d, replace=False)).astype(np.int64)


def sample_neighborhoods(l: int, degrees: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """
    Vectorized neighborhood draw for a block of features: a random
    permutation per row keeps its first d_i coordinates, which is uniform
    over the d_i-subsets. Returns (indptr, indices) with sorted rows.
    """
    if np.any(degrees < 0) or np.any(degrees > l):
        raise ValidationError(f"degrees must lie in [0, {l}]")
    order = np.argsort(rng.random((degrees.size, l)), axis=1)
    keep = np.arange(l)[None, :] < degrees[:, None]
    selected = np.zeros((degrees.size, l), dtype=bool)
    np.put_along_axis(selected, order, keep, axis=1)
    _, indices = np.nonzero(selected)
    indptr = np.concatenate(([0], np.cumsum(degrees)))
    return indptr.astype(np.int64), indices.astype(np.int64)


def _sample_block(args):
    block, count, l, degree_spec, weight_law, seed = args
    rng = stream(seed, block)
    degrees = sample_degrees(degree_spec, count, rng)
    indptr, indices = sample_neighborhoods(l, degrees, rng)
    weights = weight_law.sample_weights(degrees, rng)
    biases = weight_law.sample_biases(count, rng)
    return degrees, indptr, indices, weights, biases


def build_feature_map(l: int, m: int, degree_spec: DegreeSpec, weight_law: WeightLaw,
                      nonlinearity: Nonlinearity, seed: int, workers: int = 1) -> SparseFeatureMap:
    """Blocks of FEATURE_BLOCK_SIZE features each draw from substream (seed, block)."""
    if m < 1:
        raise ValidationError(f"feature count m must be positive, got {m}")
    if degree_spec.l != l:
        raise ValidationError(f"degree spec is for l={degree_spec.l}, map has l={l}")
    size = config.FEATURE_BLOCK_SIZE
    jobs = [(b, min(size, m - b * size), l, degree_spec, weight_law, seed) for b in range(math.ceil(m / size))]
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(_sample_block, jobs))
    else:
        blocks = [_sample_block(job) for job in jobs]

    offsets = np.cumsum([0] + [blk[2].size for blk in blocks[:-1]])
    indptr = np.concatenate([[0]] + [blk[1][1:] + off for blk, off in zip(blocks, offsets)])
    return SparseFeatureMap(
        l=l, m=m,
        degrees=np.concatenate([blk[0] for blk in blocks]),
        indptr=indptr.astype(np.int64),
        indices=np.concatenate([blk[2] for blk in blocks]),
        weights=np.concatenate([blk[3] for blk in blocks]),
        biases=np.concatenate([blk[4] for blk in blocks]),
        nonlinearity=nonlinearity, seed=seed,
        degree_spec=degree_spec, weight_law=weight_law,
    )


# --- Application ---

def apply_features(feature_map: SparseFeatureMap, X) -> np.ndarray:
    """
    n x m' matrix with entry (j, i) = scale * h(sum_{k in N_i} w_ik x_jk + b_i).
    Costs O(n * sum d_i); SinCosPair returns the m sine columns then the m cosine columns.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != feature_map.l:
        raise DimensionMismatchError(f"expected inputs with {feature_map.l} columns, got shape {X.shape}")
    pre = np.asarray(feature_map.csr @ X.T).T + feature_map.biases
    outputs = feature_map.nonlinearity.apply(pre)
    F = outputs[0] if len(outputs) == 1 else np.hstack(outputs)
    return feature_map.scale * F


def empirical_kernel(feature_map: SparseFeatureMap, X) -> np.ndarray:
    F = apply_features(feature_map, X)
    G = F @ F.T
    return 0.5 * (G + G.T)


def paired_empirical_kernel(feature_map: SparseFeatureMap, X, Y) -> np.ndarray:
    """phi(x_j) · phi(y_j) for each row pair."""
    return np.einsum("ij,ij->i", apply_features(feature_map, X), apply_features(feature_map, Y))


# --- Parsing and serialization ---

def parse_degree_spec(text: str, l: int) -> DegreeSpec:
    """'regular:3' | 'binomial:0.25' | 'custom:pmf.json'"""
    kind, _, arg = text.strip().partition(":")
    try:
        if kind == "regular":
            return DegreeSpec.regular(l, int(arg))
        if kind == "binomial":
            return DegreeSpec.binomial(l, float(arg))
        if kind == "custom":
            data = json.loads(Path(arg).read_text(encoding="utf-8"))
            return DegreeSpec.custom(l, data["pmf"] if isinstance(data, dict) else data)
    except (ValueError, KeyError, TypeError, OSError) as e:
        if isinstance(e, ValidationError):
            raise
        raise ValidationError(f"bad degree spec {text!r}: {e}") from e
    raise ValidationError(f"unknown degree spec {text!r}; expected regular:<d>, binomial:<p> or custom:<file>")


def parse_weight_law(weights: str, bias: str = "none") -> WeightLaw:
    """weights 'gaussian-iso:1.0' | 'gaussian-scaled:1.0' | 'rademacher:1.0'; bias 'uniform:a1:a2' | 'none'."""
    kind, _, arg = weights.strip().partition(":")
    try:
        sigma = float(arg or 1.0)
        interval = None
        if bias.strip().lower() != "none":
            name, a1, a2 = bias.strip().split(":")
            if name != "uniform":
                raise ValueError(f"unknown bias law {name!r}")
            interval = (float(a1), float(a2))
    except ValueError as e:
        if isinstance(e, ValidationError):
            raise
        raise ValidationError(f"bad weight/bias law {weights!r} / {bias!r}: {e}") from e
    return WeightLaw(kind, sigma, interval)


def feature_map_to_dict(feature_map: SparseFeatureMap) -> dict:
    return {
        "version": config.MODEL_FORMAT_VERSION,
        "l": feature_map.l,
        "m": feature_map.m,
        "nonlinearity": feature_map.nonlinearity.to_name(),
        "scale": feature_map.scale,
        "seed": feature_map.seed,
        "degrees": feature_map.degrees.tolist(),
        "neighborhoods": [row.tolist() for row in feature_map.neighborhoods],
        "weights": [row.tolist() for row in feature_map.weight_rows],
        "biases": feature_map.biases.tolist(),
        "degree_spec": feature_map.degree_spec.to_dict() if feature_map.degree_spec else None,
        "weight_law": feature_map.weight_law.to_dict() if feature_map.weight_law else None,
    }


def feature_map_from_dict(data: dict) -> SparseFeatureMap:
    if data.get("version") != config.MODEL_FORMAT_VERSION:
        raise ValidationError(f"unsupported feature map version {data.get('version')!r}")
    degrees = np.asarray(data["degrees"], dtype=np.int64)
    neighborhoods = data["neighborhoods"]
    weight_rows = data["weights"]
    m = int(data["m"])
    if degrees.size != m or len(neighborhoods) != m or len(weight_rows) != m:
        raise ValidationError("feature map rows disagree with m")
    for i, (row, w, d) in enumerate(zip(neighborhoods, weight_rows, degrees)):
        if len(row) != d or len(w) != d:
            raise ValidationError(f"feature {i} has degree {d} but {len(row)} inputs and {len(w)} weights")
    return SparseFeatureMap(
        l=int(data["l"]), m=m,
        degrees=degrees,
        indptr=np.concatenate(([0], np.cumsum(degrees))).astype(np.int64),
        indices=np.asarray([k for row in neighborhoods for k in row], dtype=np.int64),
        weights=np.asarray([w for row in weight_rows for w in row], dtype=np.float64),
        biases=np.asarray(data["biases"], dtype=np.float64),
        nonlinearity=parse_nonlinearity(data["nonlinearity"]),
        seed=int(data["seed"]),
        degree_spec=DegreeSpec.from_dict(data["degree_spec"]) if data.get("degree_spec") else None,
        weight_law=WeightLaw.from_dict(data["weight_law"]) if data.get("weight_law") else None,
        scale=float(data["scale"]),
    )
