"""Empirical distributions of metaorder duration, length and participation,
and estimation of the discrete Pareto (zeta) tail exponent beta."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .model import hurwitz_zeta

__all__ = ["empirical_histogram", "estimate_beta", "BetaEstimate"]

# tail bins with fewer points than this are excluded from the log-log fit
MIN_REGRESSION_COUNT = 5


def empirical_histogram(
    values: Sequence[float],
    kind: str = "linear",
    n_bins: int = 50,
) -> tuple[np.ndarray, np.ndarray]:
    """Normalized histogram with linear, logarithmic or integer binning.

    Returns (bin centers, frequencies); frequencies sum to 1. Integer
    binning counts each integer value in [min, max] separately and is the
    right choice for metaorder lengths.
    """
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("empirical_histogram requires non-empty values")
    if kind == "integer":
        ints = np.asarray(values)
        lo, hi = int(ints.min()), int(ints.max())
        centers = np.arange(lo, hi + 1, dtype=float)
        counts = np.bincount((ints - lo).astype(int), minlength=hi - lo + 1)
        return centers, counts / counts.sum()
    if kind == "linear":
        counts, edges = np.histogram(x, bins=n_bins)
    elif kind == "log":
        if np.any(x <= 0):
            raise ValueError("log binning requires strictly positive values")
        lo, hi = x.min(), x.max()
        if lo == hi:
            counts, edges = np.histogram(x, bins=1)
        else:
            edges = np.logspace(np.log10(lo), np.log10(hi), n_bins + 1)
            edges[0], edges[-1] = lo, hi  # guard against float drift at the ends
            counts, edges = np.histogram(x, bins=edges)
    else:
        raise ValueError(f"unknown binning kind {kind!r}")
    centers = 0.5 * (edges[:-1] + edges[1:])
    return centers, counts / counts.sum()


@dataclass(frozen=True)
class BetaEstimate:
    beta: float
    stderr: float
    method: str
    n_samples: int


def _truncated_zeta_norm(beta: float, n_min: int, n_max: int | None) -> float:
    s = beta + 1.0
    if n_max is None:
        return hurwitz_zeta(s, float(n_min))
    ks = np.arange(n_min, n_max + 1, dtype=float)
    return float(np.sum(ks ** (-s)))


def estimate_beta(
    lengths: Iterable[int],
    method: str = "mle",
    n_min: int = 2,
    n_max: int | None = None,
) -> BetaEstimate:
    """Estimate the tail exponent of p_n ~ n^-(beta+1) from observed lengths.

    ``mle`` maximizes the zeta likelihood truncated and renormalized over
    [n_min, n_max] (the pipeline only ever sees N >= 2, so the law must be
    renormalized accordingly). ``loglog_regression`` fits
    log freq(n) = c - (beta+1) log n by OLS over values with at least
    MIN_REGRESSION_COUNT observations. Standard errors come from the observed
    information (mle) or the OLS slope error (regression).
    """
    arr = np.asarray(list(lengths), dtype=np.int64)
    if arr.size == 0:
        raise ValueError("estimate_beta requires non-empty lengths")
    if np.any(arr < n_min):
        raise ValueError(f"all lengths must be >= {n_min}")
    distinct = np.unique(arr)
    if method == "mle":
        if distinct.size < 2:
            raise ValueError("too few distinct lengths")
        return _mle(arr, n_min, n_max)
    if method == "loglog_regression":
        if distinct.size < 5:
            raise ValueError("too few distinct lengths")
        return _loglog_regression(arr)
    raise ValueError(f"unknown method {method!r}")


def _mle(arr: np.ndarray, n_min: int, n_max: int | None) -> BetaEstimate:
    n = arr.size
    sum_log = float(np.log(arr).sum())

    def nll(beta: float) -> float:
        return (beta + 1.0) * sum_log + n * np.log(_truncated_zeta_norm(beta, n_min, n_max))

    res = minimize_scalar(nll, bounds=(0.02, 8.0), method="bounded",
                          options={"xatol": 1e-10})
    beta_hat = float(res.x)
    h = 1e-4
    second = (nll(beta_hat + h) - 2.0 * nll(beta_hat) + nll(beta_hat - h)) / h**2
    stderr = float(1.0 / np.sqrt(second)) if second > 0 else float("nan")
    return BetaEstimate(beta=beta_hat, stderr=stderr, method="mle", n_samples=n)


def _loglog_regression(arr: np.ndarray) -> BetaEstimate:
    values, counts = np.unique(arr, return_counts=True)
    # apply the count threshold to counts reduced by their gcd, so exact
    # duplication of the whole sample cannot change the fitted bin set
    reduced = counts // np.gcd.reduce(counts)
    keep = reduced >= MIN_REGRESSION_COUNT
    values, counts = values[keep], counts[keep]
    if values.size < 5:
        raise ValueError("too few distinct lengths")
    freqs = counts / arr.size
    x = np.log(values.astype(float))
    y = np.log(freqs)
    design = np.vstack([np.ones_like(x), x]).T
    coef, residuals, *_ = np.linalg.lstsq(design, y, rcond=None)
    slope = float(coef[1])
    fitted = design @ coef
    dof = max(x.size - 2, 1)
    s2 = float(np.sum((y - fitted) ** 2)) / dof
    sxx = float(np.sum((x - x.mean()) ** 2))
    stderr = float(np.sqrt(s2 / sxx)) if sxx > 0 else float("nan")
    return BetaEstimate(beta=-slope - 1.0, stderr=stderr,
                        method="loglog_regression", n_samples=arr.size)


DISTRIBUTION_COLUMNS = ("bin_center", "frequency")


def write_histogram(centers: np.ndarray, freqs: np.ndarray, stream) -> None:
    stream.write(",".join(DISTRIBUTION_COLUMNS) + "\n")
    for c, f in zip(centers, freqs):
        stream.write(f"{c:.12g},{f:.12g}\n")
