# cli.py
import functools
import json
import math
import sys
from pathlib import Path

import click
import numpy as np

import config
import experiments
from errors import DimensionMismatchError, SparsekernError, ValidationError
from kernel_oracles import SparseSignD1, write_gram_csv
from model_store import ModelStore, StoredModel
from nonlinearities import parse_nonlinearity
from regression import (
    load_dataset, log_grid, mse, r2_score, read_csv_matrix, ridge_cv, ridge_fit, train_test_split,
)
from results_logger import format_value, status
from rng import derive_seed, stream
from sparse_features import (
    apply_features, build_feature_map, feature_map_to_dict, parse_degree_spec, parse_weight_law,
)

FULL_PERIOD_BIAS = f"uniform:{-math.pi!r}:{math.pi!r}"
FEATURE_SEED_KEY = 0xFEA7
FOLD_SEED_KEY = 0xC5


def handle_errors(fn):
    """Validation problems exit 2, runtime failures exit 1."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValidationError as e:
            raise click.UsageError(str(e)) from e
        except (SparsekernError, OSError) as e:
            raise click.ClickException(str(e)) from e
    return wrapper


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ValidationError(f"expected a comma-separated list of integers, got {text!r}") from e


def _parse_lambda_grid(text: str) -> np.ndarray:
    """'lo:hi:num' log-spaced, or a comma-separated list."""
    try:
        if ":" in text:
            lo, hi, num = text.split(":")
            return log_grid(float(lo), float(hi), int(num))
        grid = np.array([float(v) for v in text.split(",")])
    except ValueError as e:
        raise ValidationError(f"bad penalty grid {text!r}: {e}") from e
    if grid.size == 0 or np.any(grid < 0):
        raise ValidationError(f"penalties must be nonnegative, got {text!r}")
    return grid


def _parse_configs(text: str) -> list[tuple[float, float]]:
    """'0.03:6,0.2:6' -> [(0.03, 6.0), (0.2, 6.0)]"""
    try:
        return [tuple(float(v) for v in item.split(":")) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise ValidationError(f"bad corruption configs {text!r}: {e}") from e


class Context:
    def __init__(self, seed: int, out_dir: Path, workers: int):
        self.seed = seed
        self.out_dir = out_dir
        self.workers = workers


pass_context = click.make_pass_decorator(Context)


@click.group()
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=0, show_default=True, help="Master seed.")
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path), default=Path("results"),
              show_default=True, help="Directory for artifacts.")
@click.option("--threads", type=int, envvar="SPARSEKERN_THREADS", default=None,
              help="Worker threads (0 = one per CPU). Results do not depend on it.")
@click.pass_context
def main(ctx, seed, out_dir, threads):
    """Sparse random features, their limiting additive kernels and the studies built on them."""
    try:
        workers = config.resolve_workers(threads)
    except ValueError as e:
        raise click.UsageError(str(e)) from e
    ctx.obj = Context(seed, out_dir, workers)


def _feature_options(fn):
    for option in reversed([
        click.option("--degree", default="regular:1", show_default=True,
                      help="regular:<d> | binomial:<p> | custom:<pmf.json>"),
        click.option("--nonlinearity", default="cosine", show_default=True),
        click.option("--m", "m", type=int, default=1000, show_default=True, help="Number of features."),
        click.option("--weights", default="gaussian-iso:1.0", show_default=True,
                     help="gaussian-iso:<s> | gaussian-scaled:<s> | rademacher:<s>"),
        click.option("--bias", default=FULL_PERIOD_BIAS, show_default=True, help="uniform:<a1>:<a2> | none"),
    ]):
        fn = option(fn)
    return fn


def _build_map(obj: Context, l: int, degree: str, nonlinearity: str, m: int, weights: str, bias: str):
    if m < 1:
        raise ValidationError(f"--m must be positive, got {m}")
    return build_feature_map(
        l, m, parse_degree_spec(degree, l), parse_weight_law(weights, bias), parse_nonlinearity(nonlinearity),
        seed=derive_seed(obj.seed, FEATURE_SEED_KEY), workers=obj.workers,
    )


@main.command()
@click.option("--l", "l", type=int, required=True, help="Input dimension.")
@_feature_options
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Output JSON (default <out-dir>/features.json).")
@pass_context
@handle_errors
def features(obj: Context, l, degree, nonlinearity, m, weights, bias, out):
    """Sample a sparse feature map and write it as JSON."""
    fmap = _build_map(obj, l, degree, nonlinearity, m, weights, bias)
    out = out or obj.out_dir / "features.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(feature_map_to_dict(fmap), indent=1) + "\n", encoding="utf-8")
    status("features", f"wrote {m} features over l={l} to {out}")


@main.command()
@click.option("--data", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--target", default=None, help="Target column (default: last).")
@_feature_options
@click.option("--lambda-grid", "lambda_grid", default=None, help="lo:hi:num or a comma-separated list.")
@click.option("--lambda", "lam", type=float, default=None, help="Fixed penalty; skips cross-validation.")
@click.option("--k-folds", type=int, default=config.DEFAULT_K_FOLDS, show_default=True)
@click.option("--test-fraction", type=float, default=config.TEST_FRACTION, show_default=True)
@pass_context
@handle_errors
def fit(obj: Context, data, target, degree, nonlinearity, m, weights, bias, lambda_grid, lam, k_folds, test_fraction):
    """Fit a sparse-feature ridge model; writes model.json and metrics.json."""
    if lam is not None and lambda_grid is not None:
        raise ValidationError("--lambda and --lambda-grid are mutually exclusive")
    ds = load_dataset(data, target)
    train, test = train_test_split(ds.n, test_fraction, derive_seed(obj.seed, FOLD_SEED_KEY))
    fmap = _build_map(obj, ds.l, degree, nonlinearity, m, weights, bias)
    F = apply_features(fmap, ds.X)
    F_tr, y_tr = F[train], ds.y[train]
    if lam is not None:
        if lam < 0:
            raise ValidationError(f"--lambda must be nonnegative, got {lam}")
        model = ridge_fit(F_tr, y_tr, lam)
    else:
        grid = _parse_lambda_grid(lambda_grid) if lambda_grid else log_grid(*config.POLY_LAMBDA_GRID)
        lam, model = ridge_cv(F_tr, y_tr, grid, k_folds, derive_seed(obj.seed, FOLD_SEED_KEY, 1), workers=obj.workers)

    metrics = {
        "lambda": lam, "m": m, "l": ds.l, "degree": degree, "nonlinearity": nonlinearity, "seed": obj.seed,
        "n_train": int(train.size), "n_test": int(test.size),
        "train_mse": model.diagnostics["train_mse"], "train_r2": model.diagnostics["train_r2"],
    }
    if test.size:
        pred = model.predict(F[test])
        metrics["test_mse"] = mse(ds.y[test], pred)
        metrics["test_r2"] = r2_score(ds.y[test], pred)

    ModelStore(obj.out_dir / "model.json").save(StoredModel(fmap, model, ds.columns, ds.target))
    metrics_path = obj.out_dir / "metrics.json"
    metrics_path.write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    summary = f"lambda={lam:.3g} train R2={metrics['train_r2']:.4f}"
    if "test_r2" in metrics:
        summary += f" test R2={metrics['test_r2']:.4f}"
    status("fit", summary)


def _prediction_inputs(header: list[str], values: np.ndarray, stored: StoredModel) -> np.ndarray:
    """Picks the model's columns by name when present; otherwise uses the file as is."""
    l = stored.feature_map.l
    if stored.columns and all(c in header for c in stored.columns):
        return values[:, [header.index(c) for c in stored.columns]]
    if values.shape[1] != l:
        raise DimensionMismatchError(f"model expects {l} input columns, data has {values.shape[1]}")
    return values


@main.command()
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--data", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Default: stdout.")
@handle_errors
def predict(model_path, data, out):
    """One prediction per input row, in input order."""
    stored = ModelStore(model_path).load()
    header, values = read_csv_matrix(data)
    predictions = np.empty(0)
    if values.shape[0]:
        X = _prediction_inputs(header, values, stored)
        predictions = stored.fit.predict(apply_features(stored.feature_map, X))
    text = "prediction\n" + "".join(format_value(float(v)) + "\n" for v in predictions)
    if out is None:
        click.echo(text, nl=False)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
        status("predict", f"wrote {predictions.size} predictions to {out}")


@main.group()
def study():
    """Reproducible studies; each writes <name>.csv and <name>.meta.json."""


_CONV = config.STUDIES_CONFIG["convergence"]
_POLY = config.STUDIES_CONFIG["polytest"]
_STAB = config.STUDIES_CONFIG["stability"]
_EIGEN = config.STUDIES_CONFIG["eigen"]


@study.command()
@click.option("--l", "l", type=int, default=_CONV["l"], show_default=True)
@click.option("--nonlinearity", default=_CONV["nonlinearity"], show_default=True)
@click.option("--degree", default=_CONV["degree"], show_default=True)
@click.option("--weights", default=_CONV["weights"], show_default=True)
@click.option("--bias", default=_CONV["bias"], show_default=True)
@click.option("--m-grid", default=",".join(map(str, _CONV["m_grid"])), show_default=True)
@click.option("--n-probe-pairs", type=int, default=_CONV["n_probe_pairs"], show_default=True)
@pass_context
@handle_errors
def convergence(obj: Context, l, nonlinearity, degree, weights, bias, m_grid, n_probe_pairs):
    """Sup error of the empirical kernel against its exact limit, per feature count."""
    result = experiments.convergence_study(
        l, parse_nonlinearity(nonlinearity), parse_degree_spec(degree, l), parse_weight_law(weights, bias),
        _int_list(m_grid), n_probe_pairs, obj.seed, obj.workers,
    )
    experiments.save_study(result, obj.out_dir, obj.seed)


@study.command()
@click.option("--l", "l", type=int, default=_POLY["l"], show_default=True)
@click.option("--d-grid", default=",".join(map(str, _POLY["d_grid"])), show_default=True)
@click.option("--n-grid", default=",".join(map(str, _POLY["n_grid"])), show_default=True)
@click.option("--m", "m", type=int, default=_POLY["m"], show_default=True)
@click.option("--n-test", type=int, default=_POLY["n_test"], show_default=True)
@click.option("--alpha", type=float, default=_POLY["alpha"], show_default=True)
@click.option("--noise-std", type=float, default=_POLY["noise_std"], show_default=True)
@click.option("--weight-variance", type=click.Choice(["literal", "inverse_degree"]),
              default=_POLY["weight_variance"], show_default=True)
@click.option("--n-calibration", type=int, default=_POLY["n_calibration"], show_default=True)
@pass_context
@handle_errors
def polytest(obj: Context, l, d_grid, n_grid, m, n_test, alpha, noise_std, weight_variance, n_calibration):
    """Test MSE of sin/cos sparse features on a sparse polynomial, per degree and train size."""
    result = experiments.polytest_study(
        l, _int_list(d_grid), _int_list(n_grid), obj.seed, m=m, n_test=n_test, alpha=alpha,
        noise_std=noise_std, weight_variance=weight_variance, n_calibration=n_calibration, workers=obj.workers,
    )
    experiments.save_study(result, obj.out_dir, obj.seed)


_MODES = click.Choice(["per-coordinate", "per-sample"])


@study.command()
@click.option("--n", "n", type=int, default=_STAB["n"], show_default=True)
@click.option("--l", "l", type=int, default=_STAB["l"], show_default=True)
@click.option("--p", "p", type=float, default=_STAB["p"], show_default=True)
@click.option("--sigma", type=float, default=_STAB["sigma"], show_default=True)
@click.option("--mode", type=_MODES, default=_STAB["mode"], show_default=True)
@click.option("--test-fraction", type=float, default=_STAB["test_fraction"], show_default=True)
@pass_context
@handle_errors
def stability(obj: Context, n, l, p, sigma, mode, test_fraction):
    """R^2 of linear, kernel, trimmed and Huber regression under sparse input corruption."""
    result = experiments.stability_study(n, l, p, sigma, obj.seed, mode, test_fraction, workers=obj.workers)
    experiments.save_study(result, obj.out_dir, obj.seed)


@study.command()
@click.option("--n", "n", type=int, default=_EIGEN["n"], show_default=True)
@click.option("--l", "l", type=int, default=_EIGEN["l"], show_default=True)
@click.option("--configs", default=",".join(f"{p!r}:{s!r}" for p, s in _EIGEN["configs"]), show_default=True,
              help="Comma-separated p:sigma pairs.")
@click.option("--mode", type=_MODES, default=_EIGEN["mode"], show_default=True)
@click.option("--gram-out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Also write the clean Gram matrix as CSV.")
@pass_context
@handle_errors
def eigen(obj: Context, n, l, configs, mode, gram_out):
    """Eigenvalue amplification (dB) of the l1 stump kernel Gram matrix under corruption."""
    result = experiments.eigen_study(n, l, _parse_configs(configs), obj.seed, mode, workers=obj.workers)
    experiments.save_study(result, obj.out_dir, obj.seed)
    if gram_out is not None:
        X = stream(obj.seed, 0).standard_normal((n, l))
        gram_out.parent.mkdir(parents=True, exist_ok=True)
        write_gram_csv(SparseSignD1(1.0).gram(X, workers=obj.workers), gram_out)
        status("eigen", f"wrote clean Gram matrix to {gram_out}")


if __name__ == "__main__":
    sys.exit(main())
