"""Brute-force statevector simulation over the full 2^n Hilbert space.

Used as the independent cross-check for the reduced unary-subspace path and by
the CLI oracle mode. Wire w is bit w of the basis index (little endian).
"""

from __future__ import annotations

import math

import numpy as np

from .circuits import AuxGate, RBSCircuit, RBSGate
from .simulate import INVALID

__all__ = [
    "gate_unitary",
    "addrprep_unitary",
    "apply_unitary_state",
    "simulate_dense",
    "dense_probabilities",
    "classify_probabilities",
    "oracle_layer_outputs",
    "oracle_qonn_forward",
]

_H = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)
_X = np.array([[0.0, 1.0], [1.0, 0.0]])
_CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=float
)


def rbs_unitary(theta: float) -> np.ndarray:
    """4x4 RBS matrix on basis |b_a b_b> in {00, 01, 10, 11} with wire_a the high bit."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array(
        [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, c, -s, 0.0],
            [0.0, s, c, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def addrprep_unitary(n_addr: int, count: int) -> np.ndarray:
    """Orthogonal matrix sending |0..0> to the uniform superposition over the first count values."""
    dim = 1 << n_addr
    if not 1 <= count <= dim:
        raise ValueError(f"cannot prepare {count} addresses on {n_addr} qubits")
    first = np.zeros(dim)
    first[:count] = 1.0 / math.sqrt(count)
    basis = np.eye(dim)
    basis[:, 0] = first
    qmat, _ = np.linalg.qr(basis)
    if qmat[:count, 0].sum() < 0.0:
        qmat = -qmat
    return qmat


def gate_unitary(gate, circ: RBSCircuit):
    """Return (U, wires) for the uncontrolled part of a gate.

    The first wire in ``wires`` is the most significant bit of U's index.
    """
    if isinstance(gate, RBSGate):
        return rbs_unitary(gate.theta), (gate.wire_a, gate.wire_b)
    if gate.kind == "x":
        return _X, gate.wires
    if gate.kind == "h":
        return _H, gate.wires
    if gate.kind == "cnot":
        return _CNOT, gate.wires
    if gate.kind == "addrprep":
        # Reversed so the matrix index equals the little-endian address value.
        return addrprep_unitary(circ.num_address, gate.param), tuple(
            reversed(circ.address_wires)
        )
    raise ValueError(f"unknown gate {gate!r}")


def apply_unitary_state(
    state: np.ndarray,
    u: np.ndarray,
    wires,
    num_qubits: int,
    control_value: int | None = None,
    address_wires=(),
) -> np.ndarray:
    """Apply a k-wire unitary (optionally conditioned on the address register value)."""
    wires = list(wires)
    k = len(wires)
    axes = [num_qubits - 1 - w for w in wires]
    tensor = state.reshape((2,) * num_qubits)
    if control_value is None:
        moved = np.moveaxis(tensor, axes, range(k))
        block = moved.reshape(1 << k, -1)
        out = (u @ block).reshape(moved.shape)
        return np.moveaxis(out, range(k), axes).reshape(-1).copy()

    # Reversed wire order makes the block index the little-endian address value.
    addr_axes = [num_qubits - 1 - w for w in reversed(list(address_wires))]
    n_addr = len(addr_axes)
    moved = np.moveaxis(tensor, addr_axes + axes, range(n_addr + k))
    shape = moved.shape
    block = moved.reshape(1 << n_addr, 1 << k, -1).copy()
    block[control_value] = u @ block[control_value]
    out = block.reshape(shape)
    return np.moveaxis(out, range(n_addr + k), addr_axes + axes).reshape(-1).copy()


def simulate_dense(circ: RBSCircuit, state: np.ndarray | None = None) -> np.ndarray:
    n = circ.num_qubits
    if state is None:
        state = np.zeros(1 << n)
        state[0] = 1.0
    else:
        state = np.asarray(state, dtype=float).copy()
        if state.size != 1 << n:
            raise ValueError("initial state has wrong dimension")
    addr = circ.address_wires
    for gate in circ.gates:
        u, wires = gate_unitary(gate, circ)
        ctrl = getattr(gate, "control", None)
        state = apply_unitary_state(state, u, wires, n, ctrl, addr)
    return state


def dense_probabilities(state: np.ndarray) -> np.ndarray:
    return np.abs(state) ** 2


def classify_probabilities(
    probs: np.ndarray, circ: RBSCircuit, tol: float = 0.0
) -> dict:
    """Aggregate a full distribution into (ancilla bit, hot wire | INVALID) keys.

    Circuits with an address register get (address value, ancilla bit, slot)
    keys instead. Mass below ``tol`` is dropped.
    """
    n = circ.num_qubits
    q = circ.num_data
    idx = np.arange(probs.size)
    data_bits = np.stack([(idx >> w) & 1 for w in range(q)], axis=0)
    weight = data_bits.sum(axis=0)
    hot = (data_bits * np.arange(q)[:, None]).sum(axis=0)
    slot = np.where(weight == 1, hot, INVALID)
    anc = ((idx >> circ.ancilla) & 1) if circ.has_ancilla else np.zeros_like(idx)
    out: dict = {}
    if circ.num_address:
        addr = np.zeros_like(idx)
        for pos, w in enumerate(circ.address_wires):
            addr |= ((idx >> w) & 1) << pos
        for i in range(probs.size):
            if probs[i] > tol:
                key = (int(addr[i]), int(anc[i]), int(slot[i]))
                out[key] = out.get(key, 0.0) + float(probs[i])
    else:
        for i in range(probs.size):
            if probs[i] > tol:
                key = (int(anc[i]), int(slot[i]))
                out[key] = out.get(key, 0.0) + float(probs[i])
    return out


def oracle_layer_outputs(layout, angles, x: np.ndarray) -> np.ndarray:
    """One quantum layer on one input row via dense tomography statistics."""
    from .circuits import tomography_circuit

    x = np.asarray(x, dtype=float).reshape(-1)
    norm = float(np.linalg.norm(x))
    if norm == 0.0:
        return np.zeros(layout.m)
    circ = tomography_circuit(x / norm, layout, angles)
    counts = classify_probabilities(dense_probabilities(simulate_dense(circ)), circ)
    from .simulate import estimate_outputs

    return estimate_outputs(counts, layout.q, layout.m) * norm


def oracle_qonn_forward(net, X: np.ndarray) -> np.ndarray:
    """Network forward where every quantum layer runs through the dense simulator.

    Slow and memory-hungry (2^(q+1) amplitudes per row); meant for small-width
    cross-checks of the fast unary-subspace path, not production evaluation.
    """
    from .qonn import silu  # local import to avoid a module cycle

    X = np.atleast_2d(np.asarray(X, dtype=float))
    h = net.norm.apply(X)
    for i, layer in enumerate(net.layers):
        scale = 1.0 if i == 0 else 1.0 / math.sqrt(h.shape[-1])
        u = h * scale
        z = np.stack([oracle_layer_outputs(layer.layout, layer.angles, row) for row in u])
        z = z * layer.gain + layer.bias
        a = silu(z)
        h = a + h if (layer.residual and z.shape[-1] == h.shape[-1]) else a
    return h @ net.head_w.T + net.head_b
