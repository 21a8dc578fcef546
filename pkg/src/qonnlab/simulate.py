"""Exact noiseless simulation restricted to the unary subspace.

A circuit state is stored as one ground amplitude plus q unary amplitudes per
ancilla branch, all real. Auxiliary X/CNOT/H gates are applied through their
exact action on that representation and raise if the state would leave it,
which never happens in the supported tomography sequences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circuits import AuxGate, RBSCircuit, RBSGate

__all__ = [
    "INVALID",
    "EstimationError",
    "UnaryState",
    "apply_rbs",
    "apply_gate",
    "simulate_unary",
    "state_probabilities",
    "estimate_outputs",
]

# Outcome key for shots whose data register is not a weight-one string.
INVALID = -1

_LEAVE_TOL = 1e-9


class EstimationError(RuntimeError):
    """Raised when measurement statistics cannot produce an output estimate."""


@dataclass
class UnaryState:
    """Amplitudes over {ground, e_0..e_{q-1}} x ancilla branches.

    ``amps`` has shape (2, q+1) with an ancilla and (1, q+1) without; column 0
    is the ground (all zeros) component of the data register and column 1+w is
    the unary basis state with wire w excited.
    """

    q: int
    has_ancilla: bool
    amps: np.ndarray

    @classmethod
    def ground(cls, q: int, has_ancilla: bool = False) -> "UnaryState":
        amps = np.zeros((2 if has_ancilla else 1, q + 1))
        amps[0, 0] = 1.0
        return cls(q, has_ancilla, amps)

    @classmethod
    def from_unary(cls, x: np.ndarray, wires=None, has_ancilla: bool = False,
                   q: int | None = None) -> "UnaryState":
        """State with data amplitudes x placed on the given wires, ancilla in branch 0."""
        x = np.asarray(x, dtype=float)
        if q is None:
            q = x.size if wires is None else max(wires) + 1
        wires = range(x.size) if wires is None else list(wires)
        amps = np.zeros((2 if has_ancilla else 1, q + 1))
        for w, v in zip(wires, x):
            amps[0, 1 + w] = v
        return cls(q, has_ancilla, amps)

    def copy(self) -> "UnaryState":
        return UnaryState(self.q, self.has_ancilla, self.amps.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def unary_vector(self, branch: int = 0) -> np.ndarray:
        return self.amps[branch, 1:].copy()


def apply_rbs(state: UnaryState, gate: RBSGate) -> UnaryState:
    """Rotate the (wire_a, wire_b) unary amplitudes in place and return the state."""
    a, b = gate.wire_a, gate.wire_b
    if not (0 <= a < state.q and 0 <= b < state.q):
        raise ValueError(f"RBS wires {(a, b)} outside data register of size {state.q}")
    c, s = math.cos(gate.theta), math.sin(gate.theta)
    va = state.amps[:, 1 + a].copy()
    vb = state.amps[:, 1 + b]
    state.amps[:, 1 + a] = c * va + s * vb
    state.amps[:, 1 + b] = -s * va + c * vb
    return state


def _flip_data_wire(amps_row: np.ndarray, t: int, tol: float) -> None:
    # X on data wire t maps ground <-> e_t; any other occupied slot would leave
    # the unary representation.
    other = np.delete(amps_row[1:], t)
    if other.size and float(np.max(np.abs(other))) > tol:
        raise ValueError(
            "bit flip on an occupied multi-wire state leaves the unary subspace"
        )
    amps_row[0], amps_row[1 + t] = amps_row[1 + t], amps_row[0]


def apply_gate(state: UnaryState, gate, tol: float = _LEAVE_TOL) -> UnaryState:
    if isinstance(gate, RBSGate):
        return apply_rbs(state, gate)
    if not isinstance(gate, AuxGate):
        raise TypeError(f"unsupported gate {gate!r}")

    anc = state.q if state.has_ancilla else None
    if gate.kind == "x":
        (w,) = gate.wires
        if w == anc:
            state.amps = state.amps[::-1].copy()
        else:
            for row in state.amps:
                _flip_data_wire(row, w, tol)
    elif gate.kind == "h":
        (w,) = gate.wires
        inv = 1.0 / math.sqrt(2.0)
        if w == anc:
            b0 = state.amps[0].copy()
            state.amps[0] = inv * (b0 + state.amps[1])
            state.amps[1] = inv * (b0 - state.amps[1])
        else:
            # Valid only when the data register is supported on {ground, e_w}.
            for row in state.amps:
                other = np.delete(row[1:], w)
                if other.size and float(np.max(np.abs(other))) > tol:
                    raise ValueError(
                        "Hadamard on a data wire of a spread state leaves the unary subspace"
                    )
                g, e = row[0], row[1 + w]
                row[0], row[1 + w] = inv * (g + e), inv * (g - e)
    elif gate.kind == "cnot":
        ctrl, tgt = gate.wires
        if ctrl != anc:
            raise ValueError("unary simulation supports CNOT controlled by the ancilla only")
        _flip_data_wire(state.amps[1], tgt, tol)
    else:
        raise ValueError(f"gate kind {gate.kind!r} not supported on the unary path")
    return state


def simulate_unary(
    circ: RBSCircuit, state: UnaryState | None = None, tol: float = _LEAVE_TOL
) -> UnaryState:
    """Run the circuit on the reduced representation (noiseless, real amplitudes)."""
    if circ.num_address:
        raise ValueError("address registers need the addressed simulator")
    if state is None:
        state = UnaryState.ground(circ.num_data, circ.has_ancilla)
    elif state.q != circ.num_data or state.has_ancilla != circ.has_ancilla:
        raise ValueError("state does not match circuit registers")
    for gate in circ.gates:
        apply_gate(state, gate, tol=tol)
    return state


def state_probabilities(state: UnaryState) -> dict:
    """Exact outcome probabilities keyed (ancilla bit, hot wire) with INVALID for ground."""
    probs: dict = {}
    for branch in range(state.amps.shape[0]):
        key_bit = branch if state.has_ancilla else 0
        g = state.amps[branch, 0] ** 2
        if g > 0.0:
            probs[(key_bit, INVALID)] = probs.get((key_bit, INVALID), 0.0) + float(g)
        for w in range(state.q):
            p = state.amps[branch, 1 + w] ** 2
            if p > 0.0:
                probs[(key_bit, w)] = probs.get((key_bit, w), 0.0) + float(p)
    return probs


def estimate_outputs(counts: dict, q: int, m: int) -> np.ndarray:
    """Recover y from tomography statistics: y_j = sqrt(q) (n[0,e_j] - n[1,e_j]) / retained.

    ``counts`` maps (ancilla bit, wire | INVALID) to shot counts or probability
    mass; the denominator is the total retained (unary) mass, so the same code
    serves finite-shot and exact-probability estimation.
    """
    retained = sum(v for (b, w), v in counts.items() if w != INVALID)
    if retained <= 0.0:
        raise EstimationError("no retained shots: every outcome left the unary subspace")
    y = np.zeros(m)
    root_q = math.sqrt(q)
    for j in range(m):
        w = q - m + j
        y[j] = root_q * (counts.get((0, w), 0.0) - counts.get((1, w), 0.0)) / retained
    return y
