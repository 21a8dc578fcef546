"""Conformal interval tests: quantile rule, transforms, coverage property."""

import math

import numpy as np
import pytest

from qonnlab.conformal import (
    SPREAD_EPS,
    IntervalMetrics,
    calibrate,
    interval_metrics,
    nonconformity,
    predict_interval,
)


def test_nonconformity_frozen():
    r = nonconformity(np.array([2.0]), np.array([1.0]), np.array([0.5]))
    assert r[0] == pytest.approx(1.0 / (0.5 + SPREAD_EPS))


def test_nonconformity_zero_spread_guard():
    r = nonconformity(np.array([1.0]), np.array([0.0]), np.array([0.0]))
    assert np.isfinite(r[0]) and r[0] == pytest.approx(1.0 / SPREAD_EPS)


def test_calibrate_frozen_small():
    scores = np.array([1.0, 2.0, 3.0, 4.0])
    # k = ceil(5 * 0.5) = 3 -> third smallest
    assert calibrate(scores, alpha=0.5) == 3.0
    # k = ceil(5 * 0.95) = 5 > 4 -> infinite band
    assert calibrate(scores, alpha=0.05) == math.inf


def test_calibrate_order_invariant():
    rng = np.random.default_rng(0)
    scores = rng.uniform(size=101)
    assert calibrate(scores, 0.1) == calibrate(np.sort(scores)[::-1], 0.1)


def test_calibrate_empty_and_bad_alpha():
    assert calibrate(np.array([]), 0.1) == math.inf
    with pytest.raises(ValueError):
        calibrate(np.array([1.0]), 0.0)
    with pytest.raises(ValueError):
        calibrate(np.array([1.0]), 1.0)


def test_interval_matches_transform_roundtrip():
    mu = np.array([0.0, 1.0, -2.0])
    sigma = np.array([1.0, 0.1, 2.0])
    y = np.array([1.5, 1.05, -5.0])
    scores = nonconformity(y, mu, sigma)
    lo, hi = predict_interval(mu, sigma, float(scores.max()))
    inside = (y >= lo - 1e-12) & (y <= hi + 1e-12)
    assert inside.all()
    lo2, hi2 = predict_interval(mu, sigma, float(scores.max()) * 0.999)
    assert not (((y >= lo2) & (y <= hi2)).all())


def test_calibration_set_self_coverage():
    rng = np.random.default_rng(5)
    mu = rng.normal(size=500)
    sigma = np.abs(rng.normal(size=500)) + 0.1
    y = mu + sigma * rng.normal(size=500)
    q = calibrate(nonconformity(y, mu, sigma), alpha=0.1)
    lo, hi = predict_interval(mu, sigma, q)
    assert interval_metrics(y, lo, hi).coverage >= 0.9


def test_marginal_coverage_property():
    # Fresh test points drawn exchangeably with the calibration scores must be
    # covered at least 1 - alpha on average over repeated trials.
    alpha = 0.1
    rng = np.random.default_rng(11)
    hits = []
    for _ in range(300):
        sigma_cal = np.abs(rng.normal(size=60)) + 0.2
        y_cal = sigma_cal * rng.normal(size=60)
        q = calibrate(nonconformity(y_cal, 0.0, sigma_cal), alpha)
        sigma_new = abs(rng.normal()) + 0.2
        y_new = sigma_new * rng.normal()
        lo, hi = predict_interval(np.array([0.0]), np.array([sigma_new]), q)
        hits.append(float(lo[0] <= y_new <= hi[0]))
    mean_cov = np.mean(hits)
    se = np.std(hits, ddof=1) / math.sqrt(len(hits))
    assert mean_cov >= (1 - alpha) - 2 * se


def test_interval_metrics_frozen():
    y = np.array([0.0, 2.0, 4.0])
    lo = np.array([-1.0, 1.0, 0.0])
    hi = np.array([1.0, 3.0, 2.0])
    m = interval_metrics(y, lo, hi)
    assert m == IntervalMetrics(coverage=pytest.approx(2 / 3),
                                avg_width=pytest.approx(2.0),
                                peak_width=pytest.approx(2.0))
