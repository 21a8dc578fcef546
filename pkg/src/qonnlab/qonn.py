"""Angle-parameterized orthogonal networks trained classically, executable as circuits.

Layers hold pyramid angles; the realized weight is the orthogonal block of the
corresponding Givens product, so the exact forward pass and the circuit path
agree by construction. Inputs are min-max normalized with a slack component to
land on the unit sphere, and hidden activations are rescaled by 1/sqrt(n)
between layers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .circuits import PyramidLayout, pyramid_layout
from .givens import angle_grad_stack, assemble_stack

__all__ = [
    "NormalizationSpec",
    "QuantumLayer",
    "QOrthoNN",
    "qonn_init",
    "normalize_input",
    "silu",
    "layer_forward",
    "qonn_forward",
    "qonn_backward",
    "save_checkpoint",
    "load_checkpoint",
    "CHECKPOINT_VERSION",
]

CHECKPOINT_VERSION = 1


def silu(z: np.ndarray) -> np.ndarray:
    return z * expit(z)


@dataclass
class NormalizationSpec:
    """Per-feature min-max bounds plus the slack augmentation.

    A raw vector x of dimension n-1 maps to
        ( z_1/sqrt(n), ..., z_{n-1}/sqrt(n), sqrt(1 - sum_i (z_i/sqrt(n))^2) )
    with z_i the [-1, 1] rescaling of x_i, which always has unit norm.
    Out-of-bound features are clamped; excursions beyond ``tol`` are counted.
    """

    lo: np.ndarray
    hi: np.ndarray
    tol: float = 1e-9
    clamp_count: int = field(default=0, compare=False)

    @classmethod
    def fit(cls, X: np.ndarray, tol: float = 1e-9) -> "NormalizationSpec":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return cls(lo=X.min(axis=0).copy(), hi=X.max(axis=0).copy(), tol=tol)

    @property
    def in_dim(self) -> int:
        return self.lo.size

    @property
    def n_aug(self) -> int:
        return self.lo.size + 1

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[-1] != self.in_dim:
            raise ValueError(f"expected {self.in_dim} features, got {X.shape[-1]}")
        span = self.hi - self.lo
        mid = 0.5 * (self.hi + self.lo)
        with np.errstate(invalid="ignore", divide="ignore"):
            z = np.where(span > 0.0, (2.0 * X - 2.0 * mid) / np.where(span > 0, span, 1.0), 0.0)
        over = (z > 1.0 + self.tol) | (z < -1.0 - self.tol)
        if over.any():
            self.clamp_count += int(over.sum())
        z = np.clip(z, -1.0, 1.0)
        n = self.n_aug
        z = z / math.sqrt(n)
        slack = np.sqrt(np.maximum(0.0, 1.0 - np.sum(z * z, axis=-1, keepdims=True)))
        out = np.concatenate([z, slack], axis=-1)
        return out[0] if single else out

    def to_dict(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist(), "tol": self.tol}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationSpec":
        return cls(lo=np.array(d["lo"], dtype=float), hi=np.array(d["hi"], dtype=float),
                   tol=float(d.get("tol", 1e-9)))


def normalize_input(spec: NormalizationSpec, x: np.ndarray) -> np.ndarray:
    return spec.apply(x)


@dataclass
class QuantumLayer:
    """One orthogonal layer: a pyramid layout and its rotation angles.

    Besides the circuit angles, each output unit carries a classical affine
    recalibration (gain, bias) applied to the tomography estimates before the
    activation. Those estimates are classical numbers between layers, so the
    affine step costs nothing on hardware; it defaults to the identity.
    """

    layout: PyramidLayout
    angles: np.ndarray
    residual: bool = False
    gain: np.ndarray | None = None
    bias: np.ndarray | None = None

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=float)
        if self.angles.shape != (self.layout.n_angles,):
            raise ValueError(
                f"layer expects {self.layout.n_angles} angles, got {self.angles.shape}"
            )
        m = self.layout.m
        self.gain = np.ones(m) if self.gain is None else np.asarray(self.gain, dtype=float)
        self.bias = np.zeros(m) if self.bias is None else np.asarray(self.bias, dtype=float)
        if self.gain.shape != (m,) or self.bias.shape != (m,):
            raise ValueError(f"layer affine terms must both have shape ({m},)")

    @property
    def rows(self) -> np.ndarray:
        return np.array([k for _, k in self.layout.slots], dtype=np.int64)

    def matrix(self) -> np.ndarray:
        mats = assemble_stack(self.angles[None, :], self.rows, self.layout.q)
        rows = self.layout.out_wires or tuple(range(self.layout.q))
        return mats[0][np.ix_(rows, self.layout.in_wires)]


def layer_forward(layer: QuantumLayer, x_scaled: np.ndarray) -> np.ndarray:
    """Exact layer action y = silu(gain * (W x_scaled) + bias) (+ x_scaled if residual)."""
    w = layer.matrix()
    y = silu((x_scaled @ w.T) * layer.gain + layer.bias)
    if layer.residual and w.shape[0] == w.shape[1]:
        y = y + x_scaled
    return y


@dataclass
class QOrthoNN:
    norm: NormalizationSpec | None
    layers: list[QuantumLayer]
    head_w: np.ndarray
    head_b: np.ndarray

    @property
    def width(self) -> int:
        return self.layers[0].layout.m

    @property
    def latent_dim(self) -> int:
        return self.head_w.shape[0]

    @property
    def in_dim(self) -> int:
        return self.layers[0].layout.n - 1

    def num_qubits(self) -> int:
        """Qubit count of the widest layer circuit including the ancilla."""
        return max(layer.layout.q for layer in self.layers) + 1

    def angle_count(self) -> int:
        return sum(layer.layout.n_angles for layer in self.layers)


def qonn_init(
    in_dim: int,
    width: int,
    n_layers: int,
    latent_dim: int | None = None,
    residual: bool = False,
    seed: int | np.random.SeedSequence = 0,
    norm: NormalizationSpec | None = None,
) -> QOrthoNN:
    """Build a network of ``n_layers`` orthogonal layers of nominal width ``width``.

    The working dimension is width+1 (slack included); angles start uniform in
    [-pi/2, pi/2) and the final unconstrained head is a dense map to
    ``latent_dim`` outputs (default: ``width``). Every layer's gain starts at
    the square root of its input dimension, undoing the loading normalization
    (the preprocessing 1/sqrt(n) for the first layer, the inter-layer rescale
    otherwise) so each layer initially acts as a plain orthogonal map on O(1)
    activations. Layers that carry a residual skip instead start with gain 1,
    keeping the activation branch small so each block begins near the identity.
    Biases start at zero.
    """
    if n_layers < 1:
        raise ValueError("need at least one layer")
    rng = np.random.default_rng(seed)
    w_aug = width + 1
    n0 = in_dim + 1
    latent = width if latent_dim is None else latent_dim
    layers = []
    for i in range(n_layers):
        layout = pyramid_layout(w_aug, n0 if i == 0 else w_aug)
        angles = rng.uniform(-math.pi / 2, math.pi / 2, layout.n_angles)
        skip = residual and layout.m == layout.n
        gain = np.full(w_aug, 1.0 if skip else math.sqrt(layout.n))
        layers.append(QuantumLayer(layout, angles, residual=residual, gain=gain))
    bound = 1.0 / math.sqrt(w_aug)
    head_w = rng.uniform(-bound, bound, (latent, w_aug))
    head_b = rng.uniform(-bound, bound, latent)
    return QOrthoNN(norm=norm, layers=layers, head_w=head_w, head_b=head_b)


# --------------------------------------------------------------- stack engine
#
# Training and ensemble execution run on parameter stacks: every array gains a
# leading member axis, and the member networks stay mathematically independent.


class LayerPlan:
    """Static per-layer data shared by every member of a stack."""

    def __init__(self, layout: PyramidLayout, residual: bool):
        self.layout = layout
        self.rows = np.array([k for _, k in layout.slots], dtype=np.int64)
        self.q = layout.q
        out = layout.out_wires or tuple(range(layout.q))
        self.out_rows = np.array(out, dtype=np.intp)
        self.in_cols = np.array(layout.in_wires, dtype=np.intp)
        self.m = len(out)
        self.n = len(layout.in_wires)
        self.residual = residual and self.m == self.n


def stack_plans(net: QOrthoNN) -> list[LayerPlan]:
    return [LayerPlan(l.layout, l.residual) for l in net.layers]


def stack_forward(plans, angle_stacks, gain_stacks, bias_stacks, head_w, head_b, h0,
                  want_cache: bool = False):
    """Forward an input batch through a stack of networks.

    h0: (L, B, n0) normalized inputs. Returns (out, cache); out is (L, B, p).
    The whole pass runs in h0's dtype, so callers can trade precision for
    bandwidth by handing in float32 activations.
    """
    h = h0
    dt = h0.dtype
    cache = []
    for i, plan in enumerate(plans):
        scale = 1.0 if i == 0 else 1.0 / math.sqrt(h.shape[-1])
        mats = assemble_stack(angle_stacks[i], plan.rows, plan.q)
        # fold the gain into the weight so the affine scale rides the matmul
        w_eff = mats[:, plan.out_rows][:, :, plan.in_cols]
        w_eff *= np.asarray(gain_stacks[i])[:, :, None]
        wt = np.ascontiguousarray(np.swapaxes(w_eff, 1, 2), dtype=dt)
        u = h if scale == 1.0 else h * dt.type(scale)
        z = np.matmul(u, wt)
        z += np.asarray(bias_stacks[i], dtype=dt)[:, None, :]
        sig = _sigmoid(z)
        h_next = z * sig
        if plan.residual:
            h_next += h
        if want_cache:
            cache.append((u, z, sig, mats, wt, scale))
        h = h_next
    out = np.matmul(h, np.swapaxes(np.asarray(head_w, dtype=dt), 1, 2))
    out += np.asarray(head_b, dtype=dt)[:, None, :]
    if want_cache:
        cache.append(h)
    return out, cache


def _sigmoid(z: np.ndarray) -> np.ndarray:
    """Logistic function via numpy primitives (SIMD exp; scipy's ufunc is slower)."""
    out = np.negative(z)
    np.exp(out, out=out)
    out += out.dtype.type(1.0)
    np.reciprocal(out, out=out)
    return out


def stack_backward(plans, angle_stacks, gain_stacks, bias_stacks, head_w, dout, cache):
    """Gradients of a scalar loss given dL/dout.

    Returns (dangles, dgains, dbiases, dhead_w, dhead_b). Runs in dout's
    dtype except for the angle chain, which always accumulates in float64.
    """
    h_last = cache[-1]
    dt = dout.dtype
    dhead_w = np.matmul(np.swapaxes(dout, 1, 2), h_last)
    dhead_b = dout.sum(axis=1)
    dh = np.matmul(dout, np.asarray(head_w, dtype=dt))
    dangles = [None] * len(plans)
    dgains = [None] * len(plans)
    dbiases = [None] * len(plans)
    for i in range(len(plans) - 1, -1, -1):
        u, z, sig, mats, wt, scale = cache[i]
        # in-place silu'(z) = sig * (1 + z * (1 - sig)), then fold in dh
        dz = dt.type(1.0) - sig
        dz *= z
        dz += dt.type(1.0)
        dz *= sig
        dz *= dh
        db = dz.sum(axis=1)
        dbiases[i] = db
        # recover sum(dz * y) from cached z via y = (z - bias) / gain,
        # accumulated in float64 so the bias cancellation stays exact
        num = np.einsum("lbm,lbm->lm", dz, z, dtype=np.float64)
        num -= np.asarray(bias_stacks[i], dtype=np.float64) * db
        g64 = np.asarray(gain_stacks[i], dtype=np.float64)
        dgains[i] = num / np.where(g64 == 0.0, 1.0, g64)
        if i > 0:
            du = np.matmul(dz, np.swapaxes(wt, 1, 2))
            dh_prev = du if scale == 1.0 else du * dt.type(scale)
            if plans[i].residual:
                dh_prev += dh
        else:
            dh_prev = None
        dz *= np.asarray(gain_stacks[i], dtype=dt)[:, None, :]
        dw = np.matmul(np.swapaxes(dz, 1, 2), u)
        plan = plans[i]
        dmats = np.zeros_like(mats)
        dmats[:, plan.out_rows[:, None], plan.in_cols[None, :]] = dw
        dangles[i] = angle_grad_stack(angle_stacks[i], plan.rows, plan.q, mats, dmats)
        dh = dh_prev
    return dangles, dgains, dbiases, dhead_w, dhead_b


def qonn_forward(net: QOrthoNN, x: np.ndarray, mode: str = "exact", **noisy_kw) -> np.ndarray:
    """Run the network on raw inputs; mode 'noisy' goes through the circuit path."""
    if net.norm is None:
        raise ValueError("network has no normalization spec attached")
    if mode == "noisy":
        from .noise import noisy_qonn_forward

        return noisy_qonn_forward(net, x, **noisy_kw)
    if mode != "exact":
        raise ValueError(f"unknown mode {mode!r}")
    single = np.asarray(x).ndim == 1
    h0 = np.atleast_2d(net.norm.apply(x))[None, :, :]
    plans = stack_plans(net)
    angles, gains, biases = _single_stacks(net)
    out, _ = stack_forward(plans, angles, gains, biases,
                           net.head_w[None], net.head_b[None], h0)
    return out[0, 0] if single else out[0]


def _single_stacks(net: QOrthoNN):
    angles = [l.angles[None, :] for l in net.layers]
    gains = [l.gain[None, :] for l in net.layers]
    biases = [l.bias[None, :] for l in net.layers]
    return angles, gains, biases


def qonn_backward(net: QOrthoNN, x: np.ndarray, grad_out: np.ndarray):
    """Parameter gradients of sum(grad_out * output) for a raw input batch.

    Returns (dangles, dgains, dbiases, dhead_w, dhead_b).
    """
    if net.norm is None:
        raise ValueError("network has no normalization spec attached")
    h0 = np.atleast_2d(net.norm.apply(x))[None, :, :]
    plans = stack_plans(net)
    angles, gains, biases = _single_stacks(net)
    _, cache = stack_forward(
        plans, angles, gains, biases, net.head_w[None], net.head_b[None], h0,
        want_cache=True,
    )
    dout = np.atleast_2d(np.asarray(grad_out, dtype=float))[None, :, :]
    dangles, dgains, dbiases, dhw, dhb = stack_backward(
        plans, angles, gains, biases, net.head_w[None], dout, cache
    )
    return (
        [d[0] for d in dangles],
        [d[0] for d in dgains],
        [d[0] for d in dbiases],
        dhw[0],
        dhb[0],
    )


# --------------------------------------------------------------- checkpoints


def net_to_dict(net: QOrthoNN) -> dict:
    return {
        "version": CHECKPOINT_VERSION,
        "norm": None if net.norm is None else net.norm.to_dict(),
        "layers": [
            {
                "m": l.layout.m,
                "n": l.layout.n,
                "residual": l.residual,
                "angles": l.angles.tolist(),
                "gain": l.gain.tolist(),
                "bias": l.bias.tolist(),
            }
            for l in net.layers
        ],
        "head_w": net.head_w.tolist(),
        "head_b": net.head_b.tolist(),
    }


def net_from_dict(d: dict) -> QOrthoNN:
    if d.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {d.get('version')!r}")
    layers = []
    for spec in d["layers"]:
        layout = pyramid_layout(int(spec["m"]), int(spec["n"]))
        angles = np.array(spec["angles"], dtype=float)
        if angles.shape != (layout.n_angles,):
            raise ValueError(
                f"checkpoint layer {spec['m']}x{spec['n']} expects "
                f"{layout.n_angles} angles, found {angles.size}"
            )
        gain = None if spec.get("gain") is None else np.array(spec["gain"], dtype=float)
        bias = None if spec.get("bias") is None else np.array(spec["bias"], dtype=float)
        layers.append(
            QuantumLayer(layout, angles, residual=bool(spec["residual"]),
                         gain=gain, bias=bias)
        )
    head_w = np.array(d["head_w"], dtype=float)
    head_b = np.array(d["head_b"], dtype=float)
    if head_w.ndim != 2 or head_w.shape[0] != head_b.size:
        raise ValueError("checkpoint head shapes are inconsistent")
    if head_w.shape[1] != layers[-1].layout.m:
        raise ValueError("checkpoint head width does not match final layer")
    norm = None if d.get("norm") is None else NormalizationSpec.from_dict(d["norm"])
    return QOrthoNN(norm=norm, layers=layers, head_w=head_w, head_b=head_b)


def save_checkpoint(net: QOrthoNN, path) -> None:
    with open(path, "w") as fh:
        json.dump(net_to_dict(net), fh)


def load_checkpoint(path) -> QOrthoNN:
    with open(path) as fh:
        return net_from_dict(json.load(fh))
