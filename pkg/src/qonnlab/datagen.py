"""Synthetic operator-learning data: random fields, solvers, dataset plumbing.

Input functions are Gaussian random field draws; targets come from cheap exact
or near-exact solvers (cumulative trapezoid for antiderivatives, periodic
translation for constant-speed advection). Datasets persist as plain CSV with
a JSON sidecar so runs can be inspected and reproduced without the package.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_trapezoid

__all__ = [
    "KernelSpec",
    "kernel_matrix",
    "grf_sample",
    "antiderivative",
    "advection_solve",
    "OperatorDataset",
    "build_antiderivative_dataset",
    "build_advection_dataset",
    "damped_multitone",
    "build_window_dataset",
    "split_dataset",
    "save_dataset",
    "load_dataset",
]

_JITTER = 1e-10


@dataclass(frozen=True)
class KernelSpec:
    """Covariance kernel: squared-exponential or periodic exp-sine-squared."""

    kind: str = "se"
    length: float = 0.2
    period: float = 1.0

    def __post_init__(self):
        if self.kind not in ("se", "expsine"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.length <= 0.0 or self.period <= 0.0:
            raise ValueError("kernel scales must be positive")

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        diff = np.subtract.outer(x, y)
        if self.kind == "se":
            return np.exp(-(diff**2) / (2.0 * self.length**2))
        s = np.sin(math.pi * np.abs(diff) / self.period)
        return np.exp(-2.0 * (s / self.length) ** 2)


def kernel_matrix(spec: KernelSpec, grid: np.ndarray) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    return spec(grid, grid)


def grf_sample(
    spec: KernelSpec, grid: np.ndarray, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw n zero-mean field realizations on the grid; returns (n, len(grid))."""
    grid = np.asarray(grid, dtype=float)
    k = kernel_matrix(spec, grid) + _JITTER * np.eye(grid.size)
    chol = np.linalg.cholesky(k)
    z = rng.standard_normal((n, grid.size))
    return z @ chol.T


# ------------------------------------------------------------------ solvers


def antiderivative(u_vals: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Cumulative integral of sampled u with s(grid[0]) = 0; trapezoid rule."""
    u_vals = np.atleast_2d(np.asarray(u_vals, dtype=float))
    return cumulative_trapezoid(u_vals, np.asarray(grid, dtype=float), axis=1, initial=0.0)


def advection_solve(
    u0_vals: np.ndarray,
    grid: np.ndarray,
    queries: np.ndarray,
    speed: float = 1.0,
) -> np.ndarray:
    """Constant-speed periodic advection: s(x, t) = u0((x - c t) mod period.

    u0 is sampled on a periodic grid covering [0, period); values between grid
    points come from periodic linear interpolation. queries is (M, 2) with
    columns (x, t); returns (n_funcs, M).
    """
    u0_vals = np.atleast_2d(np.asarray(u0_vals, dtype=float))
    grid = np.asarray(grid, dtype=float)
    queries = np.asarray(queries, dtype=float)
    if queries.ndim != 2 or queries.shape[1] != 2:
        raise ValueError("advection queries must be (M, 2) pairs of (x, t)")
    period = grid.size * (grid[1] - grid[0])
    x_src = np.mod(queries[:, 0] - speed * queries[:, 1], period)
    return np.stack(
        [np.interp(x_src, grid, row, period=period) for row in u0_vals]
    )


# ------------------------------------------------------------------ datasets


@dataclass
class OperatorDataset:
    """Sensor readings, query coordinates and target values for one task."""

    U: np.ndarray  # (N, d_u)
    sensors: np.ndarray  # (d_u,) or (d_u, d)
    queries: np.ndarray  # (M,) or (M, d)
    S: np.ndarray  # (N, M)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.U.shape[0] != self.S.shape[0]:
            raise ValueError("U and S disagree on the number of functions")
        if self.S.shape[1] != self.queries.shape[0]:
            raise ValueError("S and queries disagree on the number of queries")

    @property
    def n_functions(self) -> int:
        return self.U.shape[0]

    def take(self, idx) -> "OperatorDataset":
        return OperatorDataset(
            U=self.U[idx].copy(),
            sensors=self.sensors,
            queries=self.queries,
            S=self.S[idx].copy(),
            meta=dict(self.meta),
        )


def build_antiderivative_dataset(
    n_functions: int,
    seed: int = 0,
    n_sensors: int = 10,
    n_queries: int = 100,
    length: float = 0.4,
) -> OperatorDataset:
    """Antiderivatives of squared-exponential field draws on [0, 1]."""
    rng = np.random.default_rng(seed)
    grid = np.linspace(0.0, 1.0, n_queries)
    u = grf_sample(KernelSpec("se", length=length), grid, n_functions, rng)
    s = antiderivative(u, grid)
    sensor_idx = np.linspace(0, n_queries - 1, n_sensors).round().astype(int)
    return OperatorDataset(
        U=u[:, sensor_idx],
        sensors=grid[sensor_idx],
        queries=grid,
        S=s,
        meta={
            "task": "antiderivative",
            "seed": seed,
            "kernel": "se",
            "length": length,
            "n_sensors": n_sensors,
            "n_queries": n_queries,
        },
    )


def build_advection_dataset(
    n_functions: int,
    seed: int = 0,
    resolution: int = 100,
    sensor_stride: int = 5,
    n_query_x: int = 50,
    n_query_t: int = 50,
    speed: float = 1.0,
    length: float = 1.0,
) -> OperatorDataset:
    """Periodic advection of exp-sine-squared field draws on [0, 1).

    Queries are the (x, t) product grid, t outermost, flattened row-major.
    """
    rng = np.random.default_rng(seed)
    grid = np.linspace(0.0, 1.0, resolution, endpoint=False)
    u0 = grf_sample(KernelSpec("expsine", length=length, period=1.0), grid, n_functions, rng)
    x_q = grid[:: resolution // n_query_x][:n_query_x]
    t_q = np.linspace(0.0, 1.0, n_query_t)
    tt, xx = np.meshgrid(t_q, x_q, indexing="ij")
    queries = np.stack([xx.ravel(), tt.ravel()], axis=1)
    s = advection_solve(u0, grid, queries, speed=speed)
    return OperatorDataset(
        U=u0[:, ::sensor_stride],
        sensors=grid[::sensor_stride],
        queries=queries,
        S=s,
        meta={
            "task": "advection",
            "seed": seed,
            "kernel": "expsine",
            "length": length,
            "speed": speed,
            "resolution": resolution,
            "n_query_x": n_query_x,
            "n_query_t": n_query_t,
        },
    )


def damped_multitone(
    n_steps: int,
    freqs=(0.05, 0.12),
    amps=(1.0, 0.6),
    damp: float = 2e-3,
    noise: float = 0.0,
    seed: int = 0,
) -> np.ndarray:
    """Decaying sum of sinusoids sampled at unit spacing, optional white noise."""
    t = np.arange(n_steps, dtype=float)
    sig = np.zeros(n_steps)
    for f, a in zip(freqs, amps):
        sig += a * np.sin(2.0 * math.pi * f * t)
    sig *= np.exp(-damp * t)
    if noise > 0.0:
        sig = sig + noise * np.random.default_rng(seed).standard_normal(n_steps)
    return sig


def build_window_dataset(series: np.ndarray, window: int, horizon: int) -> OperatorDataset:
    """Sliding windows of a scalar series: predict the next `horizon` steps.

    Produces T - window - horizon + 1 examples; queries are the forecast
    offsets 1..horizon in sample units.
    """
    series = np.asarray(series, dtype=float).reshape(-1)
    count = series.size - window - horizon + 1
    if count < 1:
        raise ValueError("series too short for the requested window and horizon")
    U = np.stack([series[i : i + window] for i in range(count)])
    S = np.stack([series[i + window : i + window + horizon] for i in range(count)])
    return OperatorDataset(
        U=U,
        sensors=np.arange(-window + 1, 1, dtype=float),
        queries=np.arange(1, horizon + 1, dtype=float),
        S=S,
        meta={"task": "windows", "window": window, "horizon": horizon},
    )


def split_dataset(
    ds: OperatorDataset, n_train: int, n_cal: int, n_test: int, seed: int = 0
) -> tuple[OperatorDataset, OperatorDataset, OperatorDataset]:
    """Disjoint train/calibration/test split over functions, shuffled by seed."""
    total = n_train + n_cal + n_test
    if total > ds.n_functions:
        raise ValueError(f"split needs {total} functions, dataset has {ds.n_functions}")
    perm = np.random.default_rng(seed).permutation(ds.n_functions)[:total]
    return (
        ds.take(perm[:n_train]),
        ds.take(perm[n_train : n_train + n_cal]),
        ds.take(perm[n_train + n_cal :]),
    )


# ---------------------------------------------------------------- persistence

_FMT = "%.17g"  # full float64 round trip


def save_dataset(ds: OperatorDataset, directory: str | Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    np.savetxt(directory / "U.csv", ds.U, fmt=_FMT, delimiter=",")
    np.savetxt(directory / "S.csv", ds.S, fmt=_FMT, delimiter=",")
    np.savetxt(directory / "sensors.csv", ds.sensors, fmt=_FMT, delimiter=",")
    np.savetxt(directory / "queries.csv", ds.queries, fmt=_FMT, delimiter=",")
    (directory / "meta.json").write_text(json.dumps(ds.meta, indent=2, sort_keys=True))
    return directory


def load_dataset(directory: str | Path) -> OperatorDataset:
    directory = Path(directory)
    if not (directory / "meta.json").exists():
        raise FileNotFoundError(f"no dataset at {directory}")
    meta = json.loads((directory / "meta.json").read_text())

    def arr(name, ndim=None):
        a = np.loadtxt(directory / name, delimiter=",", ndmin=ndim or 1)
        return a

    return OperatorDataset(
        U=arr("U.csv", ndim=2),
        sensors=arr("sensors.csv"),
        queries=arr("queries.csv"),
        S=arr("S.csv", ndim=2),
        meta=meta,
    )
