"""Ensembles of operator networks: training, noisy execution, shared circuits.

Members train independently from different seeds and their predictions are
aggregated into a mean and a population spread. Execution backends:

* exact: classical forward passes;
* independent noisy: every member runs its own circuits;
* hybrid: one sub-network (branch or trunk) evaluated classically;
* superposed: one circuit per layer evaluates every member at once, an
  address register in uniform superposition selecting the member, member
  loaders and rotations conditioned on the address value.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .circuits import (
    AuxGate,
    PyramidLayout,
    RBSCircuit,
    loader_angles,
    loader_gates,
    pyramid_gates,
    tomography_circuit,
    uniform_probe,
)
from .noise import (
    GateTally,
    NoiseProfile,
    _apply_readout_probs,
    _estimate_from_tables,
    basis_gate_tally,
    evolve_density_batch,
    outcome_tables,
)
from .operator_net import DeepONetModel, TrainConfig, TrainResult, deeponet_init, train_deeponet
from .qonn import silu
from .simulate import EstimationError, UnaryState, apply_gate, apply_rbs

__all__ = [
    "Ensemble",
    "aggregate",
    "train_ensemble",
    "ensemble_predict",
    "ensemble_predict_noisy",
    "hybrid_cost",
    "spqc_layer_circuit",
    "spqc_layer_batch",
    "spqc_qonn_forward",
    "spqc_predict",
    "SpqcReport",
    "spqc_resource_report",
    "save_ensemble",
    "load_ensemble",
]


# ------------------------------------------------------------------ ensemble


@dataclass
class Ensemble:
    members: list[DeepONetModel]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.members:
            raise ValueError("an ensemble needs at least one member")

    @property
    def size(self) -> int:
        return len(self.members)


def aggregate(preds: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Member-axis mean and population spread of stacked predictions (L, ...)."""
    preds = np.asarray(preds, dtype=float)
    return preds.mean(axis=0), preds.std(axis=0, ddof=0)


def train_ensemble(
    U: np.ndarray,
    t: np.ndarray,
    S: np.ndarray,
    n_members: int,
    width: int,
    depth: int,
    config: TrainConfig,
    base_seed: int = 0,
    retries: int = 3,
    **init_kw,
) -> tuple[Ensemble, TrainResult]:
    """Train n_members models jointly; diverged members retrain from new seeds."""
    models = [
        deeponet_init(U, t, width=width, depth=depth, seed=base_seed + i, **init_kw)
        for i in range(n_members)
    ]
    result = train_deeponet(models, U, t, S, config)
    for round_ in range(1, retries + 1):
        bad = np.nonzero(result.diverged)[0]
        if bad.size == 0:
            break
        for idx in bad:
            reseed = base_seed + 1000 * round_ + int(idx)
            models[idx] = deeponet_init(U, t, width=width, depth=depth, seed=reseed, **init_kw)
            solo = train_deeponet(models[idx], U, t, S, config)
            result.diverged[idx] = bool(solo.diverged[0])
            result.final_loss[idx] = solo.final_loss[0]
    if result.diverged.any():
        raise RuntimeError(
            f"members {np.nonzero(result.diverged)[0].tolist()} kept diverging "
            f"after {retries} reseeding rounds"
        )
    ens = Ensemble(members=models, meta={"base_seed": base_seed, "width": width, "depth": depth})
    return ens, result


def ensemble_predict(ens: Ensemble, U: np.ndarray, t: np.ndarray):
    """Exact predictions; returns (mu, sigma, stacked member predictions)."""
    preds = np.stack([m.predict(U, t) for m in ens.members])
    mu, sigma = aggregate(preds)
    return mu, sigma, preds


def ensemble_predict_noisy(
    ens: Ensemble,
    U: np.ndarray,
    t: np.ndarray,
    profile: NoiseProfile,
    rng: np.random.Generator | int | None = None,
    hybrid: str = "quantum",
    return_info: bool = False,
):
    """Member-by-member noisy predictions; one branch pass covers all queries."""
    if isinstance(rng, (int, np.integer)) or rng is None:
        rng = np.random.default_rng(rng)
    preds, retained = [], []
    for m in ens.members:
        p, info = m.predict_noisy(U, t, profile, rng, hybrid=hybrid, return_info=True)
        preds.append(p)
        retained.append(info["retained"])
    preds = np.stack(preds)
    mu, sigma = aggregate(preds)
    if return_info:
        return mu, sigma, preds, {"retained": float(np.mean(retained))}
    return mu, sigma, preds


def hybrid_cost(n_funcs: int, n_queries: int, n: int) -> dict:
    """Classical multiply counts: full dense evaluation vs branch-recycled hybrid.

    The fully classical baseline pays n^2 per layer for every (function, query)
    pair; recycling one branch pass per function leaves a per-pair cost that
    scales like n log2 n for the latent reduction.
    """
    baseline = n_funcs * n_queries * n * n
    hybrid = n_funcs * n * n + n_funcs * n_queries * n * max(1.0, math.log2(n))
    return {"baseline": float(baseline), "hybrid": float(hybrid),
            "ratio": float(hybrid / baseline)}


# ------------------------------------------------------------- superposition


def spqc_layer_circuit(
    layout: PyramidLayout, angle_stack: np.ndarray, x_stack: np.ndarray
) -> RBSCircuit:
    """One tomography circuit evaluating every member's layer at once.

    angle_stack is (L, n_angles), x_stack (L, n) of unit-norm member inputs.
    An address register of ceil(log2 L) qubits is prepared uniformly over the
    first L values; member loaders and rotations carry that address value as
    control, while the probe ladder and ancilla bookkeeping stay shared.
    """
    angle_stack = np.atleast_2d(np.asarray(angle_stack, dtype=float))
    x_stack = np.atleast_2d(np.asarray(x_stack, dtype=float))
    n_members = angle_stack.shape[0]
    if x_stack.shape[0] != n_members:
        raise ValueError("angle and input stacks disagree on member count")
    n_addr = max(1, math.ceil(math.log2(n_members))) if n_members > 1 else 1
    q = layout.q
    circ = RBSCircuit(num_data=q, has_ancilla=True, num_address=n_addr)
    anc = circ.ancilla
    in_wires = layout.in_wires

    circ.add(AuxGate("addrprep", (), param=n_members))
    circ.add(AuxGate("h", (anc,)))
    circ.add(AuxGate("cnot", (anc, in_wires[0])))
    for v in range(n_members):
        if layout.n >= 2:
            circ.extend(loader_gates(in_wires, loader_angles(x_stack[v]), control=v))
    for v in range(n_members):
        circ.extend(pyramid_gates(layout, angle_stack[v], control=v))

    probe = loader_gates(range(q), loader_angles(uniform_probe(q)))
    circ.extend(g.dagger() for g in reversed(probe))
    circ.add(AuxGate("x", (anc,)))
    circ.add(AuxGate("cnot", (anc, 0)))
    circ.extend(probe)
    circ.add(AuxGate("h", (anc,)))
    return circ


def _spqc_reduced_tables(circ: RBSCircuit, n_members: int) -> np.ndarray:
    """Noiseless outcome tables (n_addr_values, 2, q+1) via per-address blocks.

    The circuit is block diagonal over address values: controlled gates act
    only in their member's block, everything else acts in every block. Each
    block evolves as a plain two-branch unary state weighted by the address
    preparation amplitude.
    """
    q = circ.num_data
    n_vals = 1 << circ.num_address
    weight = np.zeros(n_vals)
    weight[:n_members] = 1.0 / n_members
    tables = np.zeros((n_vals, 2, q + 1))
    for v in range(n_members):
        state = UnaryState.ground(q, True)
        for gate in circ.gates:
            if isinstance(gate, AuxGate) and gate.kind == "addrprep":
                continue
            ctrl = getattr(gate, "control", None)
            if ctrl is not None and ctrl != v:
                continue
            if hasattr(gate, "theta"):
                apply_rbs(state, gate)
            else:
                apply_gate(state, gate)
        probs = state.amps**2
        tables[v, :, :q] = probs[:, 1:]
        tables[v, :, q] = probs[:, 0]
        tables[v] *= weight[v]
    return tables


def spqc_layer_batch(
    layout: PyramidLayout,
    angle_stack: np.ndarray,
    x_stack: np.ndarray,
    profile: NoiseProfile | None,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Run one shared-circuit layer for all members over an input batch.

    x_stack is (L, B, n) raw member inputs. Returns (Y (L, B, m), retained
    (L, B)). profile None means exact noiseless, infinite-shot execution.
    """
    angle_stack = np.atleast_2d(np.asarray(angle_stack, dtype=float))
    x_stack = np.asarray(x_stack, dtype=float)
    if x_stack.ndim == 2:
        x_stack = x_stack[:, None, :]
    n_members, batch, _ = x_stack.shape
    norms = np.linalg.norm(x_stack, axis=2)
    safe = np.where(norms > 1e-12, norms, 1.0)
    units = x_stack / safe[:, :, None]
    # zero member inputs load a placeholder direction; their output is zeroed
    units = np.where(norms[:, :, None] > 1e-12, units,
                     np.eye(x_stack.shape[2])[0])
    circs = [
        spqc_layer_circuit(layout, angle_stack, units[:, b, :]) for b in range(batch)
    ]
    q = layout.q
    if profile is None or (profile.lam == 0.0 and profile.readout_flip == 0.0
                           and profile.shots is None):
        tables = np.stack([_spqc_reduced_tables(c, n_members) for c in circs])
    else:
        rng = np.random.default_rng(0) if rng is None else rng
        rho = evolve_density_batch(circs, profile or NoiseProfile())
        diags = np.clip(np.einsum("bii->bi", rho), 0.0, None)
        diags = _apply_readout_probs(diags.copy(), profile.readout_flip,
                                     circs[0].num_qubits)
        tables = outcome_tables(diags, circs[0])
        if profile.shots is not None:
            sampled = np.zeros_like(tables)
            for b in range(batch):
                flat = tables[b].reshape(-1)
                sampled[b] = rng.multinomial(
                    profile.shots, np.clip(flat, 0, None) / flat.sum()
                ).reshape(tables[b].shape).astype(float)
            tables = sampled
    y = np.zeros((n_members, batch, layout.m))
    frac = np.zeros((n_members, batch))
    for v in range(n_members):
        member_tables = tables[:, v][:, None, :, :]
        yv, fv = _estimate_from_tables(member_tables, q, layout.m)
        y[v] = yv * np.where(norms[v] > 1e-12, norms[v], 0.0)[:, None]
        frac[v] = fv
    return y, frac


def spqc_qonn_forward(
    nets: list,
    X: np.ndarray,
    profile: NoiseProfile | None = None,
    rng: np.random.Generator | int | None = None,
) -> np.ndarray:
    """Forward a stack of same-architecture networks through shared circuits.

    Activations, rescaling, residuals and heads run classically per member;
    every quantum layer of the stack executes as one superposed circuit per
    input. Returns (L, B, p).
    """
    if isinstance(rng, (int, np.integer)) or rng is None:
        rng = np.random.default_rng(rng)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n_members = len(nets)
    h = np.stack([net.norm.apply(X) for net in nets])
    for li in range(len(nets[0].layers)):
        layers = [net.layers[li] for net in nets]
        layout = layers[0].layout
        angle_stack = np.stack([l.angles for l in layers])
        scale = 1.0 if li == 0 else 1.0 / math.sqrt(h.shape[-1])
        u = h * scale
        z, _ = spqc_layer_batch(layout, angle_stack, u, profile, rng)
        gain = np.stack([l.gain for l in layers])[:, None, :]
        bias = np.stack([l.bias for l in layers])[:, None, :]
        z = z * gain + bias
        a = silu(z)
        h = a + h if (layers[0].residual and z.shape[-1] == h.shape[-1]) else a
    head_w = np.stack([net.head_w for net in nets])
    head_b = np.stack([net.head_b for net in nets])
    return np.matmul(h, np.swapaxes(head_w, 1, 2)) + head_b[:, None, :]


def spqc_predict(
    ens: Ensemble,
    U: np.ndarray,
    t: np.ndarray,
    profile: NoiseProfile | None = None,
    rng: np.random.Generator | int | None = None,
):
    """Ensemble prediction with both sub-networks on shared member circuits."""
    if isinstance(rng, (int, np.integer)) or rng is None:
        rng = np.random.default_rng(rng)
    b = spqc_qonn_forward([m.branch for m in ens.members], np.atleast_2d(U),
                          profile, rng)
    t_in = ens.members[0].trunk_inputs(t)
    tr = spqc_qonn_forward([m.trunk for m in ens.members], t_in, profile, rng)
    preds = np.matmul(b, np.swapaxes(tr, 1, 2))
    mu, sigma = aggregate(preds)
    return mu, sigma, preds


@dataclass(frozen=True)
class SpqcReport:
    """Shared-circuit resources next to the L-independent-circuit baseline."""

    n_members: int
    num_qubits: int
    tally: GateTally
    independent_qubits: int
    independent_tally: GateTally

    @property
    def depth_ratio(self) -> float:
        return self.tally.depth_estimate / (
            self.n_members * self.independent_tally.depth_estimate
        )


def spqc_resource_report(layout: PyramidLayout, n_members: int) -> SpqcReport:
    """Compare one superposed circuit against L independent tomography runs."""
    x = uniform_probe(layout.n)
    angles = np.zeros(layout.n_angles)
    single = tomography_circuit(x, layout, angles)
    single_tally = basis_gate_tally(single)
    shared = spqc_layer_circuit(
        layout, np.tile(angles, (n_members, 1)), np.tile(x, (n_members, 1))
    )
    return SpqcReport(
        n_members=n_members,
        num_qubits=shared.num_qubits,
        tally=basis_gate_tally(shared),
        independent_qubits=single.num_qubits,
        independent_tally=single_tally,
    )


# ---------------------------------------------------------------- persistence


def save_ensemble(ens: Ensemble, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "version": 1,
        "meta": ens.meta,
        "members": [m.to_dict() for m in ens.members],
    }
    path.write_text(json.dumps(payload))
    return path


def load_ensemble(path: str | Path) -> Ensemble:
    payload = json.loads(Path(path).read_text())
    if payload.get("version") != 1:
        raise ValueError(f"unsupported ensemble checkpoint version {payload.get('version')!r}")
    return Ensemble(
        members=[DeepONetModel.from_dict(d) for d in payload["members"]],
        meta=payload.get("meta", {}),
    )
