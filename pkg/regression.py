# regression.py
import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

import config
from errors import ConvergenceError, DimensionMismatchError, SingularSystemError, ValidationError
from rng import stream


# --- Metrics ---

def mse(y_true, y_pred) -> float:
    y_true, y_pred = _same_length(y_true, y_pred)
    return float(np.mean((y_true - y_pred) ** 2))


def r2_score(y_true, y_pred) -> float:
    """1 - SS_res / SS_tot. Raises for a constant y_true."""
    y_true, y_pred = _same_length(y_true, y_pred)
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValidationError("R^2 is undefined for a zero-variance target")
    return 1.0 - float(np.sum((y_true - y_pred) ** 2)) / ss_tot


def _same_length(a, b):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size:
        raise DimensionMismatchError(f"length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValidationError("metrics need at least one sample")
    return a, b


def _diagnostics(y, pred) -> dict:
    try:
        r2 = r2_score(y, pred)
    except ValidationError:
        r2 = 0.0  # mean-predictor convention for a constant target
    return {"train_mse": mse(y, pred), "train_r2": r2, "n_train": int(np.size(y))}


# --- Data ---

@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    columns: list[str] | None = None
    target: str | None = None

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        self.y = np.asarray(self.y, dtype=np.float64).ravel()
        if self.X.shape[0] < 1:
            raise ValidationError("dataset needs at least one row")
        if self.X.shape[0] != self.y.size:
            raise DimensionMismatchError(f"X has {self.X.shape[0]} rows but y has {self.y.size}")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise ValidationError("dataset entries must be finite")
        if self.columns is not None and len(self.columns) != self.X.shape[1]:
            raise DimensionMismatchError("column names disagree with the number of columns")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def l(self) -> int:
        return self.X.shape[1]


def read_csv_matrix(path) -> tuple[list[str], np.ndarray]:
    """Headered, comma-separated numeric CSV. An empty file gives no columns and no rows."""
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows:
        return [], np.empty((0, 0))
    header, body = rows[0], [r for r in rows[1:] if r]
    try:
        values = np.array([[float(v) for v in r] for r in body], dtype=np.float64)
    except ValueError as e:
        raise ValidationError(f"{path}: non-numeric entry ({e})") from e
    if body and values.shape[1] != len(header):
        raise ValidationError(f"{path}: rows have {values.shape[1]} fields, header has {len(header)}")
    return header, values.reshape(len(body), len(header))


def load_dataset(path, target: str | None = None) -> Dataset:
    """Last column is the target unless `target` names another one."""
    header, values = read_csv_matrix(path)
    if not header:
        raise ValidationError(f"{path}: empty CSV")
    if target is None:
        t = len(header) - 1
    elif target in header:
        t = header.index(target)
    else:
        raise ValidationError(f"{path}: no column named {target!r}")
    keep = [j for j in range(len(header)) if j != t]
    return Dataset(values[:, keep], values[:, t], [header[j] for j in keep], header[t])


def train_test_split(n: int, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded permutation split; test_fraction = 0 keeps every row in its original order."""
    if not 0.0 <= test_fraction < 1.0:
        raise ValidationError(f"test fraction must lie in [0, 1), got {test_fraction}")
    if test_fraction == 0.0:
        return np.arange(n), np.arange(0)
    n_test = int(round(n * test_fraction))
    if n_test < 1 or n_test >= n:
        raise ValidationError(f"cannot hold out {test_fraction:.0%} of {n} rows")
    order = stream(seed, 0x5EED).permutation(n)
    return np.sort(order[n_test:]), np.sort(order[:n_test])


# --- Fitted models ---

@dataclass
class RidgeFit:
    coefficients: np.ndarray
    intercept: float
    penalty: float
    diagnostics: dict = field(default_factory=dict)
    input_bounds: tuple[np.ndarray, np.ndarray] | None = None

    def predict(self, F) -> np.ndarray:
        F = np.atleast_2d(np.asarray(F, dtype=np.float64))
        if F.shape[1] != self.coefficients.size:
            raise DimensionMismatchError(f"expected {self.coefficients.size} columns, got {F.shape[1]}")
        if self.input_bounds is not None:
            F = np.clip(F, *self.input_bounds)
        return F @ self.coefficients + self.intercept

    def to_dict(self) -> dict:
        out = {
            "lambda": self.penalty,
            "intercept": self.intercept,
            "coefficients": self.coefficients.tolist(),
            "diagnostics": self.diagnostics,
        }
        if self.input_bounds is not None:
            out["input_bounds"] = [self.input_bounds[0].tolist(), self.input_bounds[1].tolist()]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RidgeFit":
        bounds = data.get("input_bounds")
        return cls(
            coefficients=np.asarray(data["coefficients"], dtype=np.float64),
            intercept=float(data["intercept"]),
            penalty=float(data["lambda"]),
            diagnostics=dict(data.get("diagnostics", {})),
            input_bounds=(np.asarray(bounds[0]), np.asarray(bounds[1])) if bounds else None,
        )


@dataclass
class KernelRidgeFit:
    """Dual coefficients beta; predictions are K(new, train) @ beta."""
    dual_coefficients: np.ndarray
    penalty: float
    diagnostics: dict = field(default_factory=dict)

    def predict(self, K_cross) -> np.ndarray:
        K_cross = np.atleast_2d(np.asarray(K_cross, dtype=np.float64))
        if K_cross.shape[1] != self.dual_coefficients.size:
            raise DimensionMismatchError(f"cross kernel needs {self.dual_coefficients.size} columns, got {K_cross.shape[1]}")
        return K_cross @ self.dual_coefficients


# --- Ridge ---

def _check_xy(F, y) -> tuple[np.ndarray, np.ndarray]:
    F = np.atleast_2d(np.asarray(F, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if F.shape[0] != y.size:
        raise DimensionMismatchError(f"features have {F.shape[0]} rows but y has {y.size}")
    if y.size == 0:
        raise ValidationError("cannot fit on zero samples")
    return F, y


def _center(F, y, fit_intercept):
    if not fit_intercept:
        return F, y, np.zeros(F.shape[1]), 0.0
    f_mean, y_mean = F.mean(axis=0), float(y.mean())
    return F - f_mean, y - y_mean, f_mean, y_mean


def _singular(lam: float) -> SingularSystemError:
    if lam > 0:
        return SingularSystemError(f"normal equations are numerically singular at lambda={lam}; increase the ridge penalty")
    return SingularSystemError(f"normal equations are singular at lambda={lam}; use a positive ridge penalty")


def ridge_fit(F, y, lam: float, fit_intercept: bool = True, weights=None) -> RidgeFit:
    """
    Solves (F'F + lam I) alpha = F'y by Cholesky, after centering y and the
    columns of F when fitting an intercept. `weights` gives weighted least squares.
    """
    F, y = _check_xy(F, y)
    if not lam >= 0:
        raise ValidationError(f"ridge penalty must be >= 0, got {lam}")
    if weights is None:
        Fc, yc, f_mean, y_mean = _center(F, y, fit_intercept)
        A, rhs = Fc.T @ Fc, Fc.T @ yc
    else:
        w = np.asarray(weights, dtype=np.float64)
        f_mean = (w @ F) / w.sum() if fit_intercept else np.zeros(F.shape[1])
        y_mean = float(w @ y / w.sum()) if fit_intercept else 0.0
        Fc, yc = F - f_mean, y - y_mean
        A, rhs = (Fc.T * w) @ Fc, (Fc.T * w) @ yc
    A[np.diag_indices_from(A)] += lam
    try:
        factor = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as e:
        raise _singular(lam) from e
    pivots = np.abs(np.diag(factor[0]))
    if pivots.size and (pivots.min() / pivots.max()) ** 2 < 1e3 * np.finfo(np.float64).eps:
        raise _singular(lam)
    alpha = scipy.linalg.cho_solve(factor, rhs, check_finite=False)
    if not np.all(np.isfinite(alpha)):
        raise _singular(lam)
    fit = RidgeFit(alpha, float(y_mean - f_mean @ alpha), float(lam))
    fit.diagnostics = _diagnostics(y, fit.predict(F))
    return fit


def log_grid(lo: float, hi: float, num: int) -> np.ndarray:
    if not (0 < lo <= hi) or num < 1:
        raise ValidationError(f"log grid needs 0 < lo <= hi and num >= 1, got ({lo}, {hi}, {num})")
    return np.logspace(math.log10(lo), math.log10(hi), num)


def ridge_grid_for(n: int) -> np.ndarray:
    """5 log-spaced penalties between 1e-4 n and 1e2 n."""
    return log_grid(1e-4 * n, 1e2 * n, 5)


def kfold_indices(n: int, k_folds: int, seed: int) -> list[np.ndarray]:
    if k_folds < 2:
        raise ValidationError(f"need at least 2 folds, got {k_folds}")
    if n < k_folds:
        raise ValidationError(f"{n} samples cannot be split into {k_folds} folds")
    order = stream(seed, 0xF01D).permutation(n)
    return [np.sort(part) for part in np.array_split(order, k_folds)]


def _fold_errors(args):
    F, y, train, val, grid, fit_intercept = args
    Fc, yc, f_mean, y_mean = _center(F[train], y[train], fit_intercept)
    # one eigendecomposition serves every penalty on the grid
    evals, evecs = np.linalg.eigh(Fc.T @ Fc)
    proj = evecs.T @ (Fc.T @ yc)
    errors = []
    for lam in grid:
        with np.errstate(divide="ignore", invalid="ignore"):
            alpha = evecs @ (proj / (evals + lam))
        pred = (F[val] - f_mean) @ alpha + y_mean
        err = float(np.mean((y[val] - pred) ** 2))
        errors.append(err if np.isfinite(err) else np.inf)
    return errors


def ridge_cv(F, y, lambda_grid, k_folds: int = config.DEFAULT_K_FOLDS, seed: int = 0,
             fit_intercept: bool = True, workers: int = 1) -> tuple[float, RidgeFit]:
    """Penalty with the lowest mean validation MSE over seeded folds, refit on all data."""
    F, y = _check_xy(F, y)
    grid = np.asarray(lambda_grid, dtype=np.float64).ravel()
    if grid.size == 0:
        raise ValidationError("penalty grid is empty")
    if grid.size == 1:
        best = float(grid[0])
        return best, ridge_fit(F, y, best, fit_intercept)
    folds = kfold_indices(y.size, k_folds, seed)
    jobs = [(F, y, np.setdiff1d(np.arange(y.size), val), val, grid, fit_intercept) for val in folds]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            errors = np.array(list(pool.map(_fold_errors, jobs)))
    else:
        errors = np.array([_fold_errors(job) for job in jobs])
    scores = errors.mean(axis=0)
    best = float(grid[int(np.argmin(scores))])
    fit = ridge_fit(F, y, best, fit_intercept)
    fit.diagnostics["cv_mse"] = dict(zip([repr(float(g)) for g in grid], scores.tolist()))
    return best, fit


# --- Kernel ridge ---

def _solve_regularized(G, y, lam):
    A = G + lam * np.eye(G.shape[0])
    try:
        return scipy.linalg.solve(A, y, assume_a="sym", check_finite=False)
    except np.linalg.LinAlgError as e:
        raise SingularSystemError(f"G + lambda I is singular at lambda={lam}") from e


def kernel_ridge_fit(G, y, lam: float) -> KernelRidgeFit:
    """Solves (G + lam I) beta = y."""
    G = np.atleast_2d(np.asarray(G, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if G.shape != (y.size, y.size):
        raise DimensionMismatchError(f"Gram matrix {G.shape} does not match {y.size} targets")
    if not np.allclose(G, G.T, rtol=1e-10, atol=1e-12):
        raise ValidationError("Gram matrix must be symmetric")
    if not lam > 0:
        raise ValidationError(f"kernel ridge penalty must be > 0, got {lam}")
    fit = KernelRidgeFit(_solve_regularized(G, y, lam), float(lam))
    fit.diagnostics = _diagnostics(y, fit.predict(G))
    return fit


def _kernel_fold_errors(args):
    G, y, train, val, grid = args
    G_tt, G_vt = G[np.ix_(train, train)], G[np.ix_(val, train)]
    errors = []
    for lam in grid:
        try:
            beta = _solve_regularized(G_tt, y[train], lam)
            errors.append(float(np.mean((y[val] - G_vt @ beta) ** 2)))
        except SingularSystemError:
            errors.append(np.inf)
    return errors


def kernel_ridge_cv(G, y, lambda_grid, k_folds: int = config.DEFAULT_K_FOLDS, seed: int = 0,
                    workers: int = 1) -> tuple[float, KernelRidgeFit]:
    G = np.atleast_2d(np.asarray(G, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    grid = np.asarray(lambda_grid, dtype=np.float64).ravel()
    if grid.size == 0:
        raise ValidationError("penalty grid is empty")
    folds = kfold_indices(y.size, k_folds, seed)
    jobs = [(G, y, np.setdiff1d(np.arange(y.size), val), val, grid) for val in folds]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            errors = np.array(list(pool.map(_kernel_fold_errors, jobs)))
    else:
        errors = np.array([_kernel_fold_errors(job) for job in jobs])
    best = float(grid[int(np.argmin(errors.mean(axis=0)))])
    return best, kernel_ridge_fit(G, y, best)


# --- Baselines on raw inputs ---

def linear_ols(X, y) -> RidgeFit:
    return ridge_fit(X, y, 0.0)


def trimmed_linear(X, y, z_thresh: float = config.TRIM_Z) -> RidgeFit:
    """
    OLS on the rows whose column-standardized coordinates all stay within
    z_thresh. The fitted model clips new inputs to the same window.
    """
    X, y = _check_xy(X, y)
    if not z_thresh > 0:
        raise ValidationError(f"trim threshold must be positive, got {z_thresh}")
    mean, std = X.mean(axis=0), X.std(axis=0)
    safe_std = np.where(std > 0, std, 1.0)
    keep = np.all(np.abs((X - mean) / safe_std) <= z_thresh, axis=1)
    if not keep.any():
        raise ValidationError(f"every sample lies beyond |z| = {z_thresh}; nothing left to fit")
    fit = linear_ols(X[keep], y[keep])
    fit.input_bounds = (mean - z_thresh * std, mean + z_thresh * std)
    fit.diagnostics["n_kept"] = int(keep.sum())
    fit.diagnostics["n_trimmed"] = int((~keep).sum())
    return fit


def huber_fit(X, y, delta: float = config.HUBER_DELTA, iterations: int = config.HUBER_MAX_ITER,
              tol: float = config.HUBER_TOL) -> RidgeFit:
    """
    Huber regression by iteratively reweighted least squares. Residuals are
    measured in units of 1.4826 * MAD, re-estimated every iteration; weights
    are 1 inside delta and delta / |r| outside.
    """
    X, y = _check_xy(X, y)
    if not delta > 0:
        raise ValidationError(f"Huber delta must be positive, got {delta}")
    fit = linear_ols(X, y)
    floor = 1e-12 * (1.0 + float(np.std(y)))
    for it in range(iterations):
        resid = y - fit.predict(X)
        scale = max(1.4826 * float(np.median(np.abs(resid - np.median(resid)))), floor)
        r = np.abs(resid) / scale
        weights = np.where(r <= delta, 1.0, delta / np.maximum(r, delta))
        new = ridge_fit(X, y, 0.0, weights=weights)
        change = float(np.max(np.abs(np.append(new.coefficients - fit.coefficients, new.intercept - fit.intercept))))
        fit = new
        if change < tol:
            fit.diagnostics = _diagnostics(y, fit.predict(X))
            fit.diagnostics["iterations"] = it + 1
            return fit
    fit.diagnostics = _diagnostics(y, fit.predict(X))
    raise ConvergenceError(f"Huber IRLS did not converge in {iterations} iterations", last_iterate=fit)
