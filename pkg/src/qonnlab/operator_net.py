"""Operator learning on orthogonal networks: branch/trunk model and training.

A model pairs a branch network over sensor readings with a trunk network over
query coordinates; predictions are latent dot products, so one branch pass
serves every query. Training runs all ensemble members as parameter stacks
with a shared Adam loop, and the full-batch MSE never materializes the dense
prediction matrix: it works through the latent Gram matrices instead.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .qonn import (
    NormalizationSpec,
    QOrthoNN,
    net_from_dict,
    net_to_dict,
    qonn_forward,
    qonn_init,
    stack_backward,
    stack_forward,
    stack_plans,
)

__all__ = [
    "FourierFeatureSpec",
    "fourier_features",
    "dominant_frequencies",
    "DeepONetModel",
    "deeponet_init",
    "mse_loss",
    "rel_l2",
    "shared_query_mse",
    "TrainConfig",
    "TrainResult",
    "train_deeponet",
]


# ------------------------------------------------------------- trunk features


@dataclass(frozen=True)
class FourierFeatureSpec:
    """Harmonic lift of a scalar coordinate: (t, cos 2 pi f t, sin 2 pi f t, ...)."""

    freqs: tuple[float, ...]

    @property
    def dim(self) -> int:
        return 1 + 2 * len(self.freqs)

    def apply(self, t: np.ndarray) -> np.ndarray:
        """Featurize (M,) coordinates to (M, dim); (M, d) inputs go per column."""
        t = np.asarray(t, dtype=float)
        if t.ndim == 2:
            return np.concatenate([self.apply(t[:, j]) for j in range(t.shape[1])], axis=1)
        t = t.reshape(-1)
        cols = [t]
        for f in self.freqs:
            phase = 2.0 * math.pi * f * t
            cols.append(np.cos(phase))
            cols.append(np.sin(phase))
        return np.stack(cols, axis=1)

    def to_dict(self) -> dict:
        return {"freqs": list(self.freqs)}

    @classmethod
    def from_dict(cls, d: dict) -> "FourierFeatureSpec":
        return cls(freqs=tuple(float(f) for f in d["freqs"]))


def fourier_features(t: np.ndarray, freqs) -> np.ndarray:
    return FourierFeatureSpec(freqs=tuple(freqs)).apply(t)


def dominant_frequencies(signals: np.ndarray, grid: np.ndarray, k: int) -> tuple[float, ...]:
    """Pick the k strongest nonzero frequencies of a batch of sampled signals.

    Magnitudes are averaged over the batch after a Hann window; frequencies are
    returned in cycles per coordinate unit, ordered by strength.
    """
    signals = np.atleast_2d(np.asarray(signals, dtype=float))
    grid = np.asarray(grid, dtype=float).reshape(-1)
    m = grid.size
    if signals.shape[1] != m:
        raise ValueError("signals and grid disagree on sample count")
    window = np.hanning(m)
    spectrum = np.abs(np.fft.rfft(signals * window, axis=1)).mean(axis=0)
    dt = grid[1] - grid[0]
    freqs = np.fft.rfftfreq(m, d=dt)
    floor = 1e-9 * spectrum.max()
    # Window leakage puts skirts around every line, so rank only the strict
    # local maxima of the averaged spectrum (DC and Nyquist excluded).
    candidates = np.array(
        [
            i
            for i in range(1, spectrum.size - 1)
            if spectrum[i] > floor
            and spectrum[i] > spectrum[i - 1]
            and spectrum[i] >= spectrum[i + 1]
        ],
        dtype=int,
    )
    if candidates.size < k:
        raise ValueError(f"only {candidates.size} spectral peaks found, need {k}")
    order = candidates[np.argsort(spectrum[candidates])[::-1]]
    top = sorted(order[:k])  # ascending frequency for stable feature layouts
    return tuple(float(freqs[i]) for i in top)


# ------------------------------------------------------------------- model


@dataclass
class DeepONetModel:
    branch: QOrthoNN
    trunk: QOrthoNN
    features: FourierFeatureSpec | None = None

    def __post_init__(self):
        if self.branch.latent_dim != self.trunk.latent_dim:
            raise ValueError("branch and trunk disagree on latent dimension")

    @property
    def latent_dim(self) -> int:
        return self.branch.latent_dim

    def trunk_inputs(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.features is not None:
            return self.features.apply(t)
        return t.reshape(-1, 1) if t.ndim == 1 else t

    def predict(self, U: np.ndarray, t: np.ndarray) -> np.ndarray:
        """Exact predictions on a shared query set; returns (N, M)."""
        b = qonn_forward(self.branch, np.atleast_2d(U))
        tr = qonn_forward(self.trunk, self.trunk_inputs(t))
        return b @ tr.T

    def predict_noisy(
        self,
        U: np.ndarray,
        t: np.ndarray,
        profile,
        rng=None,
        hybrid: str = "quantum",
        return_info: bool = False,
    ):
        """Predictions with one or both sub-networks run through noisy circuits.

        hybrid: "quantum" (both noisy), "classical-branch" or "classical-trunk"
        (named sub-network evaluated exactly).  With ``return_info`` the result
        is ``(pred, info)`` where info carries the mean post-selection
        retention over all quantum sub-network evaluations.
        """
        from .noise import noisy_qonn_forward

        if hybrid not in ("quantum", "classical-branch", "classical-trunk"):
            raise ValueError(f"unknown hybrid mode {hybrid!r}")
        if isinstance(rng, (int, np.integer)) or rng is None:
            rng = np.random.default_rng(rng)
        b_mode = "none" if hybrid == "classical-branch" else "all"
        t_mode = "none" if hybrid == "classical-trunk" else "all"
        b, b_info = noisy_qonn_forward(self.branch, np.atleast_2d(U), profile, rng,
                                       quantum_layers=b_mode, return_info=True)
        tr, t_info = noisy_qonn_forward(self.trunk, self.trunk_inputs(t), profile, rng,
                                        quantum_layers=t_mode, return_info=True)
        pred = b @ tr.T
        if not return_info:
            return pred
        retained = [b_info["retained"]] if b_mode == "all" else []
        if t_mode == "all":
            retained.append(t_info["retained"])
        info = {
            "retained": float(np.mean(np.concatenate(retained))) if retained else 1.0
        }
        return pred, info

    def to_dict(self) -> dict:
        return {
            "branch": net_to_dict(self.branch),
            "trunk": net_to_dict(self.trunk),
            "features": None if self.features is None else self.features.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DeepONetModel":
        feats = d.get("features")
        return cls(
            branch=net_from_dict(d["branch"]),
            trunk=net_from_dict(d["trunk"]),
            features=None if feats is None else FourierFeatureSpec.from_dict(feats),
        )


def deeponet_init(
    U: np.ndarray,
    t: np.ndarray,
    width: int,
    depth: int,
    latent: int | None = None,
    features: FourierFeatureSpec | None = None,
    residual: bool = False,
    seed: int | np.random.SeedSequence = 0,
    trunk_width: int | None = None,
    trunk_depth: int | None = None,
) -> DeepONetModel:
    """Build a model sized for the given sensor readings and query coordinates.

    Normalization bounds are fitted here, on the training data only.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    latent = width if latent is None else latent
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    seed_b, seed_t = seed.spawn(2)
    feat = (
        FourierFeatureSpec(freqs=tuple(features)) if isinstance(features, (list, tuple))
        else features
    )
    t_arr = np.asarray(t, dtype=float)
    t_in = feat.apply(t_arr) if feat is not None else (
        t_arr.reshape(-1, 1) if t_arr.ndim == 1 else t_arr
    )
    branch = qonn_init(
        in_dim=U.shape[1], width=width, n_layers=depth, latent_dim=latent,
        residual=residual, seed=seed_b, norm=NormalizationSpec.fit(U),
    )
    trunk = qonn_init(
        in_dim=t_in.shape[1], width=trunk_width or width,
        n_layers=trunk_depth or depth, latent_dim=latent,
        residual=residual, seed=seed_t, norm=NormalizationSpec.fit(t_in),
    )
    return DeepONetModel(branch=branch, trunk=trunk, features=feat)


# ------------------------------------------------------------------- metrics


def mse_loss(pred: np.ndarray, target: np.ndarray) -> float:
    diff = np.asarray(pred) - np.asarray(target)
    return float(np.mean(diff * diff))


def rel_l2(pred: np.ndarray, target: np.ndarray, reduce: str = "mean") -> float | np.ndarray:
    """Per-row relative L2 error ||pred - target|| / ||target||, averaged by default."""
    pred = np.atleast_2d(np.asarray(pred, dtype=float))
    target = np.atleast_2d(np.asarray(target, dtype=float))
    num = np.linalg.norm(pred - target, axis=-1)
    den = np.linalg.norm(target, axis=-1)
    ratios = num / np.where(den > 0, den, 1.0)
    if reduce == "none":
        return ratios
    if reduce == "mean":
        return float(ratios.mean())
    raise ValueError(f"unknown reduction {reduce!r}")


# ------------------------------------------------------------------ training


@dataclass
class TrainConfig:
    iters: int = 1000
    lr: float = 1e-3
    gamma: float = 1.0
    min_lr: float = 0.0
    batch_functions: int | None = None  # None = full batch
    log_every: int = 100
    seed: int = 0
    contraction_dtype: str = "float64"  # "float32" speeds up the data contractions

    def __post_init__(self):
        if self.contraction_dtype not in ("float64", "float32"):
            raise ValueError("contraction_dtype must be float64 or float32")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.iters < 1:
            raise ValueError("iters must be positive")


@dataclass
class TrainResult:
    loss_trace: np.ndarray  # (n_logged, L)
    trace_iters: np.ndarray
    final_loss: np.ndarray  # (L,)
    diverged: np.ndarray  # (L,) bool
    wall_time: float


def shared_query_mse(b_out, t_out, S, ss=None, cast32=False, s_t=None):
    """MSE of latent dot-product predictions against S over a shared query grid.

    b_out (L, N, p), t_out (L, M, p), S (N, M). Returns per-member losses and
    the gradients with respect to both output stacks, all computed through
    p x p Gram matrices so the (N, M) prediction matrix never materializes.
    Pass a contiguous transpose as s_t to skip recomputing it per call.
    """
    n, m = S.shape
    n_members, _, p = b_out.shape
    ss = float(np.sum(S.astype(np.float64) ** 2)) if ss is None else ss
    dt_c = np.float32 if (cast32 or b_out.dtype == np.float32) else np.float64
    b_cat = np.moveaxis(b_out, 0, 1).reshape(n, n_members * p).astype(dt_c, copy=False)
    t_cat = np.moveaxis(t_out, 0, 1).reshape(m, n_members * p).astype(dt_c, copy=False)
    s_rows = S.astype(dt_c, copy=False)
    if s_t is None:
        s_t = np.ascontiguousarray(s_rows.T)
    st = np.ascontiguousarray(
        np.moveaxis((s_rows @ t_cat).reshape(n, n_members, p), 1, 0)
    ).astype(b_out.dtype, copy=False)
    stb = np.ascontiguousarray(
        np.moveaxis((s_t @ b_cat).reshape(m, n_members, p), 1, 0)
    ).astype(t_out.dtype, copy=False)
    gram_t = np.matmul(np.swapaxes(t_out, 1, 2), t_out)
    gram_b = np.matmul(np.swapaxes(b_out, 1, 2), b_out)
    denom = n * m
    losses = (
        np.einsum("lij,lij->l", gram_b, gram_t, dtype=np.float64)
        - 2.0 * np.einsum("lij,lij->l", b_out, st, dtype=np.float64)
        + ss
    ) / denom
    coef = b_out.dtype.type(2.0 / denom)
    db = np.matmul(b_out, gram_t)
    db -= st
    db *= coef
    dt = np.matmul(t_out, gram_b)
    dt -= stb
    dt *= coef
    return losses, db, dt


class _Adam:
    def __init__(self, shapes, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.lr = lr
        self.b1, self.b2, self.eps = beta1, beta2, eps
        self.t = 0

    def step(self, params, grads, lr):
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def _stack_net_params(nets: list[QOrthoNN]):
    n_layers = len(nets[0].layers)
    angle_stacks = [np.stack([net.layers[i].angles for net in nets]) for i in range(n_layers)]
    gain_stacks = [np.stack([net.layers[i].gain for net in nets]) for i in range(n_layers)]
    bias_stacks = [np.stack([net.layers[i].bias for net in nets]) for i in range(n_layers)]
    head_w = np.stack([net.head_w for net in nets])
    head_b = np.stack([net.head_b for net in nets])
    return angle_stacks, gain_stacks, bias_stacks, head_w, head_b


def _write_back(nets: list[QOrthoNN], angle_stacks, gain_stacks, bias_stacks, head_w, head_b):
    for li in range(len(angle_stacks)):
        for mi, net in enumerate(nets):
            net.layers[li].angles = angle_stacks[li][mi].copy()
            net.layers[li].gain = gain_stacks[li][mi].copy()
            net.layers[li].bias = bias_stacks[li][mi].copy()
    for mi, net in enumerate(nets):
        net.head_w = head_w[mi].copy()
        net.head_b = head_b[mi].copy()


def train_deeponet(
    models: DeepONetModel | list[DeepONetModel],
    U: np.ndarray,
    t: np.ndarray,
    S: np.ndarray,
    config: TrainConfig,
) -> TrainResult:
    """Train one model or a whole stack of them on shared data.

    All members must share architecture; their parameters evolve independently
    under a joint Adam loop. The MSE over the (functions x queries) grid and
    its gradients are computed from latent Gram matrices, so cost stays linear
    in the data size. Members whose loss turns non-finite are frozen and
    flagged instead of poisoning the others.
    """
    single = isinstance(models, DeepONetModel)
    models = [models] if single else list(models)
    n_members = len(models)
    U = np.atleast_2d(np.asarray(U, dtype=float))
    S = np.atleast_2d(np.asarray(S, dtype=float))
    t_in = models[0].trunk_inputs(t)
    n_funcs, n_queries = S.shape
    if U.shape[0] != n_funcs or t_in.shape[0] != n_queries:
        raise ValueError("data shapes disagree: U rows, t rows and S must align")

    plans_b = stack_plans(models[0].branch)
    plans_t = stack_plans(models[0].trunk)
    ang_b, gn_b, bi_b, wb, bb = _stack_net_params([m.branch for m in models])
    ang_t, gn_t, bi_t, wt, bt = _stack_net_params([m.trunk for m in models])

    f32 = config.contraction_dtype == "float32"
    act_dt = np.float32 if f32 else np.float64
    h0_b_full = np.broadcast_to(
        models[0].branch.norm.apply(U).astype(act_dt),
        (n_members, n_funcs, models[0].branch.norm.n_aug),
    )
    h0_t = np.ascontiguousarray(
        np.broadcast_to(
            models[0].trunk.norm.apply(t_in).astype(act_dt),
            (n_members, n_queries, models[0].trunk.norm.n_aug),
        )
    )
    ss_full = float(np.sum(S.astype(np.float64) ** 2))
    S_c = S.astype(act_dt)
    S_cT = np.ascontiguousarray(S_c.T)

    params = ang_b + gn_b + bi_b + [wb, bb] + ang_t + gn_t + bi_t + [wt, bt]
    adam = _Adam([p.shape for p in params], config.lr)
    rng = np.random.default_rng(config.seed)
    alive = np.ones(n_members, dtype=bool)
    trace, trace_iters = [], []
    last_loss = np.full(n_members, np.nan)
    t0 = time.perf_counter()

    for it in range(config.iters):
        lr = max(config.lr * config.gamma**it, config.min_lr)
        if config.batch_functions is not None and config.batch_functions < n_funcs:
            idx = rng.choice(n_funcs, size=config.batch_functions, replace=False)
            h0_b = np.ascontiguousarray(h0_b_full[:, idx])
            s_batch, s_t, ss = S_c[idx], None, None
        else:
            h0_b, s_batch, s_t, ss = h0_b_full, S_c, S_cT, ss_full

        b_out, cache_b = stack_forward(plans_b, ang_b, gn_b, bi_b, wb, bb, h0_b,
                                       want_cache=True)
        t_out, cache_t = stack_forward(plans_t, ang_t, gn_t, bi_t, wt, bt, h0_t,
                                       want_cache=True)
        losses, db, dt = shared_query_mse(b_out, t_out, s_batch, ss=ss, cast32=f32,
                                          s_t=s_t)

        bad = ~np.isfinite(losses)
        if np.any(bad & alive):
            alive &= ~bad
        last_loss = np.where(alive, losses, last_loss)
        if it % config.log_every == 0 or it == config.iters - 1:
            trace.append(losses.copy())
            trace_iters.append(it)
        if not alive.any():
            break

        if not alive.all():
            gate = alive.astype(db.dtype)[:, None, None]
            db *= gate
            dt *= gate

        dang_b, dgn_b, dbi_b, dwb, dbb = stack_backward(
            plans_b, ang_b, gn_b, bi_b, wb, db, cache_b)
        dang_t, dgn_t, dbi_t, dwt, dbt = stack_backward(
            plans_t, ang_t, gn_t, bi_t, wt, dt, cache_t)
        adam.step(
            params,
            dang_b + dgn_b + dbi_b + [dwb, dbb] + dang_t + dgn_t + dbi_t + [dwt, dbt],
            lr,
        )

    wall = time.perf_counter() - t0
    _write_back([m.branch for m in models], ang_b, gn_b, bi_b, wb, bb)
    _write_back([m.trunk for m in models], ang_t, gn_t, bi_t, wt, bt)
    return TrainResult(
        loss_trace=np.array(trace),
        trace_iters=np.array(trace_iters, dtype=int),
        final_loss=last_loss,
        diverged=~alive,
        wall_time=wall,
    )
