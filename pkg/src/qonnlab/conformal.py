"""Split-conformal intervals scaled by ensemble spread.

Nonconformity is the absolute error in units of predictive spread, so the
calibrated band adapts locally: wide where members disagree, tight where they
agree. The quantile uses the finite-sample (n+1) rule and degrades to an
infinite band when the calibration set is too small for the requested level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SPREAD_EPS",
    "nonconformity",
    "calibrate",
    "predict_interval",
    "IntervalMetrics",
    "interval_metrics",
]

SPREAD_EPS = 1e-8


def nonconformity(
    y: np.ndarray, mu: np.ndarray, sigma: np.ndarray, eps: float = SPREAD_EPS
) -> np.ndarray:
    """Spread-normalized residuals |y - mu| / (sigma + eps), elementwise."""
    y, mu, sigma = (np.asarray(a, dtype=float) for a in (y, mu, sigma))
    return np.abs(y - mu) / (sigma + eps)


def calibrate(scores: np.ndarray, alpha: float) -> float:
    """Finite-sample quantile: the ceil((n+1)(1-alpha))-th smallest score.

    Returns +inf when the calibration set cannot certify the level, which
    keeps the coverage guarantee (vacuously) instead of undershooting it.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    scores = np.asarray(scores, dtype=float).reshape(-1)
    n = scores.size
    if n == 0:
        return math.inf
    k = math.ceil((n + 1) * (1.0 - alpha))
    if k > n:
        return math.inf
    return float(np.sort(scores)[k - 1])


def predict_interval(
    mu: np.ndarray, sigma: np.ndarray, q_hat: float, eps: float = SPREAD_EPS
) -> tuple[np.ndarray, np.ndarray]:
    """Band mu +/- q_hat (sigma + eps), matching the nonconformity transform."""
    mu = np.asarray(mu, dtype=float)
    half = q_hat * (np.asarray(sigma, dtype=float) + eps)
    return mu - half, mu + half


@dataclass(frozen=True)
class IntervalMetrics:
    coverage: float
    avg_width: float
    peak_width: float


def interval_metrics(y: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> IntervalMetrics:
    """Empirical coverage plus mean and peak full widths of the band."""
    y = np.asarray(y, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    inside = (y >= lo) & (y <= hi)
    width = hi - lo
    return IntervalMetrics(
        coverage=float(inside.mean()),
        avg_width=float(width.mean()),
        peak_width=float(width.max()),
    )
