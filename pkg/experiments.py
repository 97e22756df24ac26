# experiments.py
"""
Reproducible studies: kernel convergence of sparse features, generalization
on a sparse polynomial test function, and stability under sparse input
corruption (regression scores and Gram eigenvalue amplification).

Every study is a pure function of (seed, config). Grid cells draw from
their own substreams, run in a thread pool, and are collected in cell order,
so the CSV written by `save_study` is byte-identical for any worker count.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

import config
from errors import ConvergenceError, ValidationError
from kernel_oracles import KernelSpec, SparseSignD1, oracle_for
from nonlinearities import Nonlinearity, SinCosPair
from regression import (
    huber_fit, kernel_ridge_cv, linear_ols, log_grid, mse, r2_score, ridge_cv,
    train_test_split, trimmed_linear,
)
from results_logger import ResultsLogger, status, write_meta
from rng import derive_seed, stream
from sparse_features import (
    DegreeSpec, WeightLaw, apply_features, build_feature_map, paired_empirical_kernel,
)


@dataclass
class StudyResult:
    name: str
    header: list[str]
    rows: list[dict]
    params: dict
    summary: dict = field(default_factory=dict)


def save_study(result: StudyResult, out_dir, seed: int) -> tuple[Path, Path]:
    """Writes `<name>.csv` and `<name>.meta.json` under out_dir."""
    out_dir = Path(out_dir)
    csv_path = out_dir / f"{result.name}.csv"
    ResultsLogger(csv_path, result.header).log_many(result.rows)
    meta_path = write_meta(out_dir / f"{result.name}.meta.json", result.name, result.params, seed,
                           {"summary": result.summary})
    status(result.name, f"wrote {len(result.rows)} rows to {csv_path}")
    return csv_path, meta_path


def _run_cells(fn, cells, workers: int):
    if workers > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, cells))
    return [fn(cell) for cell in cells]


def sum_of_sines(X) -> np.ndarray:
    """First-order additive target sum_j sin(x_j)."""
    return np.sin(np.asarray(X, dtype=np.float64)).sum(axis=1)


# --- Convergence of the empirical kernel ---

def probe_pairs(l: int, n_pairs: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """
    Half the pairs uniform in [-1, 1]^l; the rest split between antipodal
    pairs (x, -x) and near-duplicates (x, x + small jitter).
    """
    n_uniform = n_pairs // 2
    n_anti = (n_pairs - n_uniform) // 2
    n_near = n_pairs - n_uniform - n_anti
    X = rng.uniform(-1.0, 1.0, size=(n_pairs, l))
    Y = np.empty_like(X)
    Y[:n_uniform] = rng.uniform(-1.0, 1.0, size=(n_uniform, l))
    Y[n_uniform:n_uniform + n_anti] = -X[n_uniform:n_uniform + n_anti]
    jitter = rng.uniform(-0.01, 0.01, size=(n_near, l))
    Y[n_uniform + n_anti:] = np.clip(X[n_uniform + n_anti:] + jitter, -1.0, 1.0)
    return X, Y


def loglog_slope(m_values, errors) -> float:
    m_values, errors = np.asarray(m_values, dtype=np.float64), np.asarray(errors, dtype=np.float64)
    if m_values.size < 2 or np.any(errors <= 0):
        return float("nan")
    return float(np.polyfit(np.log(m_values), np.log(errors), 1)[0])


def convergence_study(l: int, nonlinearity: Nonlinearity, degree_spec: DegreeSpec, weight_law: WeightLaw,
                      m_grid, n_probe_pairs: int = 200, seed: int = 0, workers: int = 1) -> StudyResult:
    """sup and mean |empirical - oracle| over fixed probe pairs, for each feature count m."""
    m_grid = [int(m) for m in m_grid]
    if not m_grid:
        raise ValidationError("m grid is empty")
    if any(m < 1 for m in m_grid):
        raise ValidationError(f"feature counts must be positive, got {m_grid}")
    if n_probe_pairs < 1:
        raise ValidationError(f"need at least one probe pair, got {n_probe_pairs}")
    oracle = oracle_for(l, degree_spec, weight_law, nonlinearity)
    if not nonlinearity.lipschitz:
        status("convergence", f"{nonlinearity.to_name()} is not Lipschitz; the uniform rate is not guaranteed", "warn")

    X, Y = probe_pairs(l, n_probe_pairs, stream(seed, 0))
    exact = oracle.paired(X, Y)

    def cell(args):
        idx, m = args
        fmap = build_feature_map(l, m, degree_spec, weight_law, nonlinearity, derive_seed(seed, 1, idx))
        err = np.abs(paired_empirical_kernel(fmap, X, Y) - exact)
        return {"m": m, "sup_error": float(err.max()), "mean_error": float(err.mean())}

    rows = _run_cells(cell, list(enumerate(m_grid)), workers)
    for row in rows:
        status("convergence", f"m={row['m']} sup_error={row['sup_error']:.4g}")
    slope = loglog_slope([r["m"] for r in rows], [r["sup_error"] for r in rows])
    params = {
        "l": l, "nonlinearity": nonlinearity.to_name(), "degree_spec": degree_spec.to_dict(),
        "weight_law": weight_law.to_dict(), "m_grid": m_grid, "n_probe_pairs": n_probe_pairs,
        "oracle": oracle.to_dict(),
    }
    return StudyResult("convergence", ["m", "sup_error", "mean_error"], rows, params, {"loglog_slope": slope})


# --- Polynomial test function ---

@dataclass
class PolyTarget:
    """
    f(x) = c1 a·x + c2 p(x): a linear term plus a sparse polynomial of
    `n_terms` monomials of degree 3. c1 and c2 give the linear and nonlinear
    parts standard deviations proportional to (1 - alpha) and alpha.
    """
    a: np.ndarray
    terms: np.ndarray
    coefficients: np.ndarray
    c1: float
    c2: float
    alpha: float
    noise_std: float

    @classmethod
    def sample(cls, l: int, rng: np.random.Generator, alpha: float = 0.05, noise_std: float = 0.05,
               n_calibration: int = 100_000, n_terms: int = 3, degree: int = 3) -> "PolyTarget":
        if l < degree:
            raise ValidationError(f"need l >= {degree} for degree-{degree} monomials, got l={l}")
        if not 0.0 <= alpha <= 1.0:
            raise ValidationError(f"nonlinear fraction must lie in [0, 1], got {alpha}")
        a = rng.standard_normal(l)
        terms = np.array([np.sort(rng.choice(l, size=degree, replace=False)) for _ in range(n_terms)])
        coefficients = rng.standard_normal(n_terms)
        target = cls(a, terms, coefficients, 1.0, 1.0, alpha, noise_std)
        X = rng.random((n_calibration, l))
        norm = math.sqrt(alpha**2 + (1 - alpha) ** 2)
        target.c1 = (1 - alpha) / norm / float(np.std(target.linear_part(X)))
        target.c2 = alpha / norm / float(np.std(target.nonlinear_part(X)))
        return target

    def linear_part(self, X) -> np.ndarray:
        return np.asarray(X) @ self.a

    def nonlinear_part(self, X) -> np.ndarray:
        X = np.asarray(X)
        return sum(c * np.prod(X[:, t], axis=1) for c, t in zip(self.coefficients, self.terms))

    def evaluate(self, X) -> np.ndarray:
        return self.c1 * self.linear_part(X) + self.c2 * self.nonlinear_part(X)

    def sample_targets(self, X, rng: np.random.Generator) -> np.ndarray:
        return self.evaluate(X) + self.noise_std * rng.standard_normal(np.shape(X)[0])


def polytest_weight_law(d: int, weight_variance: str = "literal") -> WeightLaw:
    """'literal': variance d^(-1/2); 'inverse_degree': variance 1/d. Biases U[-pi, pi]."""
    bias = (-math.pi, math.pi)
    if weight_variance == "literal":
        return WeightLaw("gaussian-iso", d ** -0.25, bias)
    if weight_variance == "inverse_degree":
        return WeightLaw("gaussian-scaled", 1.0, bias)
    raise ValidationError(f"weight variance convention must be 'literal' or 'inverse_degree', got {weight_variance!r}")


def polytest_study(l: int = 16, d_grid=(1, 3, 10, 16), n_grid=(100, 200, 400, 800), seed: int = 0,
                   m: int = 300, n_test: int = 10_000, alpha: float = 0.05, noise_std: float = 0.05,
                   weight_variance: str = "literal", k_folds: int = config.DEFAULT_K_FOLDS,
                   lambda_grid=None, n_calibration: int = 100_000, workers: int = 1) -> StudyResult:
    """Test MSE and CV-selected ridge penalty for sin/cos sparse features of each degree d and train size n."""
    d_grid, n_grid = [int(d) for d in d_grid], [int(n) for n in n_grid]
    if any(not 1 <= d <= l for d in d_grid):
        raise ValidationError(f"degrees must lie in [1, {l}], got {d_grid}")
    if any(n < k_folds for n in n_grid):
        raise ValidationError(f"every training size must be at least k_folds={k_folds}, got {n_grid}")
    grid = log_grid(*config.POLY_LAMBDA_GRID) if lambda_grid is None else np.asarray(lambda_grid, dtype=np.float64)

    target = PolyTarget.sample(l, stream(seed, 0), alpha, noise_std, n_calibration)
    test_rng = stream(seed, 1)
    X_test = test_rng.random((n_test, l))
    y_test = target.sample_targets(X_test, test_rng)
    train_sets = []
    for n_idx, n in enumerate(n_grid):
        rng = stream(seed, 2, n_idx)
        X = rng.random((n, l))
        train_sets.append((X, target.sample_targets(X, rng)))

    cells = [(c, d, n_idx) for c, (d, n_idx) in enumerate((d, i) for d in d_grid for i in range(len(n_grid)))]

    def cell(args):
        cell_idx, d, n_idx = args
        X, y = train_sets[n_idx]
        fmap = build_feature_map(l, m, DegreeSpec.regular(l, d), polytest_weight_law(d, weight_variance),
                                 SinCosPair(), derive_seed(seed, 3, cell_idx))
        lam, fit = ridge_cv(apply_features(fmap, X), y, grid, k_folds, derive_seed(seed, 4, n_idx))
        test_mse = mse(y_test, fit.predict(apply_features(fmap, X_test)))
        return {"d": d, "n": n_grid[n_idx], "test_mse": test_mse,
                "train_mse": fit.diagnostics["train_mse"], "selected_lambda": lam}

    rows = _run_cells(cell, cells, workers)
    for row in rows:
        status("polytest", f"d={row['d']} n={row['n']} test_mse={row['test_mse']:.5f} lambda={row['selected_lambda']:.3g}")
    params = {
        "l": l, "d_grid": d_grid, "n_grid": n_grid, "m": m, "n_test": n_test, "alpha": alpha,
        "noise_std": noise_std, "weight_variance": weight_variance, "k_folds": k_folds,
        "lambda_grid": grid.tolist(), "n_calibration": n_calibration,
    }
    summary = {"noise_floor": noise_std**2, "c1": target.c1, "c2": target.c2}
    return StudyResult("polytest", ["d", "n", "test_mse", "train_mse", "selected_lambda"], rows, params, summary)


# --- Sparse input corruption ---

@dataclass(frozen=True)
class CorruptionSpec:
    """Spike-and-slab corruption: entries (or whole rows) replaced by N(0, sigma^2) noise with probability p."""
    p: float
    sigma: float = 6.0
    mode: str = "per-coordinate"

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValidationError(f"corruption probability must lie in [0, 1], got {self.p}")
        if not self.sigma > 0:
            raise ValidationError(f"noise std must be positive, got {self.sigma}")
        if self.mode not in ("per-coordinate", "per-sample"):
            raise ValidationError(f"corruption mode must be per-coordinate or per-sample, got {self.mode!r}")


def corrupt_inputs(X, spec: CorruptionSpec, seed) -> tuple[np.ndarray, np.ndarray]:
    """Returns the corrupted copy and a boolean n x l mask of replaced entries."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    rng = seed if isinstance(seed, np.random.Generator) else stream(int(seed))
    if spec.mode == "per-coordinate":
        mask = rng.random(X.shape) < spec.p
    else:
        mask = np.repeat((rng.random(X.shape[0]) < spec.p)[:, None], X.shape[1], axis=1)
    noise = spec.sigma * rng.standard_normal(X.shape)
    return np.where(mask, noise, X), mask


def stability_study(n: int = 800, l: int = 10, p: float = 0.03, sigma: float = 6.0, seed: int = 0,
                    mode: str = "per-coordinate", test_fraction: float = config.TEST_FRACTION,
                    lambda_grid=None, huber_delta: float = config.HUBER_DELTA, trim_z: float = config.TRIM_Z,
                    k_folds: int = config.DEFAULT_K_FOLDS, workers: int = 1) -> StudyResult:
    """
    Linear truth y = X beta observed through corrupted inputs. Scores (R^2) of
    OLS, kernel ridge with the l1 stump kernel 1 - ||x - x'||_1 / l, trimmed OLS
    and Huber regression on a train/test split of the corrupted data.
    """
    spec = CorruptionSpec(p, sigma, mode)
    rng = stream(seed, 0)
    X = rng.standard_normal((n, l))
    beta = rng.standard_normal(l)
    y = X @ beta
    W, mask = corrupt_inputs(X, spec, stream(seed, 1))
    train, test = train_test_split(n, test_fraction, derive_seed(seed, 2))
    if test.size == 0:
        raise ValidationError("stability study needs a held-out split (test_fraction > 0)")
    W_tr, W_te, y_tr, y_te = W[train], W[test], y[train], y[test]
    grid = log_grid(*config.POLY_LAMBDA_GRID) if lambda_grid is None else np.asarray(lambda_grid, dtype=np.float64)

    scores = {}
    fit = linear_ols(W_tr, y_tr)
    scores["linear"] = (fit.predict(W_tr), fit.predict(W_te), {})

    kernel = SparseSignD1(1.0)
    G = kernel.gram(W_tr, workers=workers)
    lam, kfit = kernel_ridge_cv(G, y_tr, grid, k_folds, derive_seed(seed, 3), workers=workers)
    scores["kernel"] = (kfit.predict(G), kfit.predict(kernel.cross(W_te, W_tr)), {"lambda": lam})

    fit = trimmed_linear(W_tr, y_tr, trim_z)
    scores["trim+linear"] = (fit.predict(W_tr), fit.predict(W_te), {"n_trimmed": fit.diagnostics["n_trimmed"]})

    try:
        fit = huber_fit(W_tr, y_tr, huber_delta)
    except ConvergenceError as e:
        status("stability", f"{e}; scoring the last iterate", "warn")
        fit = e.last_iterate
    scores["huber"] = (fit.predict(W_tr), fit.predict(W_te), {})

    rows = []
    for model, (pred_tr, pred_te, _) in scores.items():
        rows.append({"model": model, "train_r2": r2_score(y_tr, pred_tr), "test_r2": r2_score(y_te, pred_te)})
        status("stability", f"{model}: train R2={rows[-1]['train_r2']:.3f} test R2={rows[-1]['test_r2']:.3f}")
    params = {
        "n": n, "l": l, "p": p, "sigma": sigma, "mode": mode, "test_fraction": test_fraction,
        "lambda_grid": grid.tolist(), "huber_delta": huber_delta, "trim_z": trim_z, "k_folds": k_folds,
    }
    summary = {
        "n_train": int(train.size), "n_test": int(test.size), "corrupted_entries": int(mask.sum()),
        "kernel_lambda": scores["kernel"][2]["lambda"], "n_trimmed": scores["trim+linear"][2]["n_trimmed"],
    }
    return StudyResult("stability", ["model", "train_r2", "test_r2"], rows, params, summary)


# --- Gram eigenvalue amplification ---

@dataclass
class Amplification:
    p: float
    sigma: float
    clean: np.ndarray
    noisy: np.ndarray
    db: np.ndarray

    @property
    def finite(self) -> np.ndarray:
        return self.db[np.isfinite(self.db)]

    def mean_db(self) -> float:
        return float(self.finite.mean()) if self.finite.size else float("nan")

    def top_mean_abs_db(self, k: int = 10) -> float:
        top = self.db[:k]
        top = top[np.isfinite(top)]
        return float(np.abs(top).mean()) if top.size else float("nan")


def _magnitude_sorted_eigenvalues(G: np.ndarray) -> np.ndarray:
    eig = np.linalg.eigvalsh(G)
    return eig[np.argsort(-np.abs(eig), kind="stable")]


def eigen_amplification(X, spec_grid, kernel: KernelSpec, seed: int = 0, mode: str = "per-coordinate",
                        workers: int = 1) -> list[Amplification]:
    """
    10 log10(|lambda_noisy,i| / |lambda_clean,i|) for eigenvalues sorted by
    magnitude, one vector per (p, sigma). A zero clean eigenvalue gives +inf,
    which the summaries skip.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    specs = [CorruptionSpec(float(p), float(s), mode) for p, s in spec_grid]
    clean = _magnitude_sorted_eigenvalues(kernel.gram(X, workers=workers))

    def cell(args):
        idx, spec = args
        Xc, _ = corrupt_inputs(X, spec, stream(seed, 1, idx))
        noisy = _magnitude_sorted_eigenvalues(kernel.gram(Xc))
        with np.errstate(divide="ignore"):
            db = np.where(clean != 0, 10.0 * np.log10(np.abs(noisy) / np.abs(np.where(clean != 0, clean, 1.0))), np.inf)
        return Amplification(spec.p, spec.sigma, clean, noisy, db)

    return _run_cells(cell, list(enumerate(specs)), workers)


def eigen_study(n: int = 800, l: int = 10, configs=((0.03, 6.0), (0.2, 6.0), (0.5, 6.0)), seed: int = 0,
                mode: str = "per-coordinate", kernel: KernelSpec | None = None, workers: int = 1) -> StudyResult:
    kernel = kernel or SparseSignD1(1.0)
    X = stream(seed, 0).standard_normal((n, l))
    results = eigen_amplification(X, configs, kernel, seed, mode, workers)
    rows, summary = [], {}
    for res in results:
        for i in range(res.db.size):
            rows.append({"p": res.p, "sigma": res.sigma, "index": i, "clean_eigenvalue": float(res.clean[i]),
                         "noisy_eigenvalue": float(res.noisy[i]), "amplification_db": float(res.db[i])})
        summary[f"p={res.p!r},sigma={res.sigma!r}"] = {"mean_db": res.mean_db(), "top10_mean_abs_db": res.top_mean_abs_db(10)}
        status("eigen", f"p={res.p} sigma={res.sigma} mean={res.mean_db():.2f} dB top10={res.top_mean_abs_db(10):.2f} dB")
    params = {"n": n, "l": l, "configs": [list(c) for c in configs], "mode": mode, "kernel": kernel.to_dict()}
    header = ["p", "sigma", "index", "clean_eigenvalue", "noisy_eigenvalue", "amplification_db"]
    return StudyResult("eigen", header, rows, params, summary)
