"""Estimators for the pinned-site density, tails, and finite-size fits.

Error bars come from batch means (16 batches by default): the series is
cut into equal blocks and the spread of block averages absorbs the
autocorrelation. Estimates built from fewer than 8 batches refuse to
report a standard error and carry the low_data flag instead.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import FitError, ParameterError
from .model import DELTA, SQUARE_WELL


@dataclass
class Estimate:
    """Point value with batch-means standard error."""

    value: float
    se: float            # None when low_data
    n_batches: int
    tau_int: float
    low_data: bool = False

    def __str__(self):
        if self.low_data:
            return f"{self.value:.6g} (se unavailable: <8 batches)"
        return f"{self.value:.6g} +/- {self.se:.2g}"


def batch_means(series, n_batches=16):
    """Mean of a correlated series with batch-means standard error."""
    x = np.asarray(series, dtype=float)
    if x.size == 0:
        raise ParameterError("empty series")
    value = float(x.mean())
    k = min(int(n_batches), x.size)
    if k < 8:
        return Estimate(value, None, k, math.nan, low_data=True)
    bs = x.size // k
    tail = x[x.size - bs * k:]
    bm = tail.reshape(k, bs).mean(axis=1)
    se = float(bm.std(ddof=1) / math.sqrt(k))
    var = float(x.var(ddof=1))
    tau = 0.5 * bs * float(bm.var(ddof=1)) / var if var > 0 else 0.5
    return Estimate(value, se, k, tau)


def pinned_count(cfg, pin):
    """Number of pinned sites of a configuration.

    Square well counts heights <= a; delta pinning counts the atom mask
    (height exactly 0); without pinning the count is 0 by convention.
    """
    if pin.kind == SQUARE_WELL:
        return int((cfg.heights <= pin.a).sum())
    if pin.kind == DELTA:
        return int(cfg.pinned.sum())
    return 0


def estimate_rho(trace, lat, n_batches=16):
    """Pinned-site density: mean of nu / |Lambda| over the trace."""
    if trace.n_snapshots == 0:
        raise ParameterError("empty trace")
    return batch_means(trace.nu / lat.n_sites, n_batches)


def estimate_mean_height(trace, n_batches=16):
    return batch_means(trace.mean_height, n_batches)


def estimate_center_height(trace, n_batches=16):
    return batch_means(trace.center_height, n_batches)


def tail_probability(trace, M, n_batches=16):
    """Empirical frequency of nu > M with batch-corrected error."""
    return batch_means((trace.nu > M).astype(float), n_batches)


# ---------------------------------------------------------------------------
# finite-size scaling fits
# ---------------------------------------------------------------------------

_MODELS = {
    "c_over_N": lambda n: np.stack([1.0 / n], axis=1),
    "log": lambda n: np.stack([np.ones_like(n), np.log(n)], axis=1),
    "sqrt_log": lambda n: np.stack([np.ones_like(n), np.sqrt(np.log(n))], axis=1),
    "constant": lambda n: np.stack([np.ones_like(n)], axis=1),
}


@dataclass
class FitResult:
    model: str
    coef: np.ndarray
    coef_se: np.ndarray
    resid_norm: float    # sqrt of the weighted residual sum of squares
    n_points: int

    def predict(self, n):
        n = np.asarray(n, dtype=float)
        return _MODELS[self.model](n) @ self.coef


def fit_scaling(points, model):
    """Weighted least squares of (N, value, se) triples against a model.

    Models: c_over_N (value = c/N), log (a + b log N), sqrt_log
    (a + b sqrt(log N)), constant. Weights are 1/se^2; if any se is
    missing or zero the fit falls back to equal weights.
    """
    if model not in _MODELS:
        raise ParameterError(f"unknown scaling model {model!r}")
    pts = list(points)
    if len(pts) < 3:
        raise ParameterError("need at least 3 points to fit")
    n = np.array([p[0] for p in pts], dtype=float)
    y = np.array([p[1] for p in pts], dtype=float)
    se = np.array(
        [p[2] if len(p) > 2 and p[2] is not None else 0.0 for p in pts], dtype=float
    )
    w = 1.0 / se**2 if (se > 0).all() else np.ones_like(y)
    X = _MODELS[model](n)
    xtwx = X.T @ (w[:, None] * X)
    try:
        cov = np.linalg.inv(xtwx)
    except np.linalg.LinAlgError as exc:
        raise FitError(f"singular design matrix for model {model!r}") from exc
    if not np.isfinite(cov).all():
        raise FitError(f"singular design matrix for model {model!r}")
    coef = cov @ (X.T @ (w * y))
    resid = y - X @ coef
    return FitResult(
        model=model,
        coef=coef,
        coef_se=np.sqrt(np.diag(cov)),
        resid_norm=float(np.sqrt((w * resid**2).sum())),
        n_points=len(pts),
    )
