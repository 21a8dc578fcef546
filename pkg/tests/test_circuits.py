"""Unary-subspace circuit core: frozen values and brute-force cross-checks."""

import math

import numpy as np
import pytest

from qonnlab.circuits import (
    AuxGate,
    PyramidLayout,
    RBSCircuit,
    RBSGate,
    circuit_depth,
    circuit_from_text,
    circuit_to_matrix,
    circuit_to_text,
    loader_angles,
    loader_gates,
    pyramid_gates,
    pyramid_layout,
    tomography_circuit,
    uniform_probe,
)
from qonnlab.fullsim import classify_probabilities, dense_probabilities, simulate_dense
from qonnlab.simulate import (
    INVALID,
    EstimationError,
    UnaryState,
    apply_rbs,
    estimate_outputs,
    simulate_unary,
    state_probabilities,
)


def random_unit(rng, n):
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


# ---------------------------------------------------------------- RBS action


def test_rbs_quarter_turn_frozen():
    # theta = pi/2 sends amplitude (1, 0) on (wire_a, wire_b) to (0, -1).
    state = UnaryState.from_unary([1.0, 0.0])
    apply_rbs(state, RBSGate(0, 1, math.pi / 2))
    assert abs(state.amps[0, 1] - 0.0) < 1e-15
    assert abs(state.amps[0, 2] - (-1.0)) < 1e-15


def test_rbs_preserves_other_sectors():
    state = UnaryState.from_unary([0.3, 0.4, 0.5], q=4)
    state.amps[0, 0] = 0.6  # ground component must be untouched
    before = state.amps.copy()
    apply_rbs(state, RBSGate(1, 2, 0.7))
    assert state.amps[0, 0] == before[0, 0]
    assert state.amps[0, 4] == before[0, 4]
    assert abs(np.linalg.norm(state.amps) - np.linalg.norm(before)) < 1e-14


@pytest.mark.parametrize("seed", range(10))
def test_rbs_matches_dense_two_qubits(seed):
    rng = np.random.default_rng(seed)
    theta = rng.uniform(-math.pi, math.pi)
    x = random_unit(rng, 2)
    circ = RBSCircuit(num_data=2)
    circ.add(RBSGate(0, 1, theta))
    fast = simulate_unary(circ, UnaryState.from_unary(x))
    dense = simulate_dense(circ, _embed_unary(x, 2))
    np.testing.assert_allclose(fast.unary_vector(), _extract_unary(dense, 2), atol=1e-14)


def _embed_unary(x, q, n_qubits=None):
    n_qubits = q if n_qubits is None else n_qubits
    state = np.zeros(1 << n_qubits)
    for w, v in enumerate(x):
        state[1 << w] = v
    return state


def _extract_unary(state, q):
    return np.array([state[1 << w] for w in range(q)])


# ---------------------------------------------------------------- loader


def test_loader_two_dim_analytic():
    # Solving the 2-dim loader by hand gives a single angle pi/4 for the
    # balanced vector: cos(t) = sin(t) = 1/sqrt(2).
    angles = loader_angles(np.array([1.0, 1.0]) / math.sqrt(2.0))
    assert angles.shape == (1,)
    assert abs(angles[0] - math.pi / 4) < 1e-12


def test_loader_negative_components_analytic():
    angles = loader_angles(np.array([-1.0, 0.0]))
    assert abs(angles[0] - math.pi) < 1e-12
    angles = loader_angles(np.array([0.0, -1.0]))
    assert abs(angles[0] + math.pi / 2) < 1e-12


@pytest.mark.parametrize("seed", range(25))
def test_loader_roundtrip_dim8(seed):
    rng = np.random.default_rng(100 + seed)
    x = random_unit(rng, 8)
    gates = loader_gates(range(8), loader_angles(x))
    state = UnaryState.from_unary([1.0] + [0.0] * 7)
    for g in gates:
        apply_rbs(state, g)
    np.testing.assert_allclose(state.unary_vector(), x, atol=1e-10)


def test_loader_zero_tail():
    x = np.array([1.0, 0.0, 0.0])
    gates = loader_gates(range(3), loader_angles(x))
    state = UnaryState.from_unary([1.0, 0.0, 0.0])
    for g in gates:
        apply_rbs(state, g)
    np.testing.assert_allclose(state.unary_vector(), x, atol=1e-14)


def test_loader_interior_zero():
    x = np.array([0.6, 0.0, -0.8])
    gates = loader_gates(range(3), loader_angles(x))
    state = UnaryState.from_unary([1.0, 0.0, 0.0])
    for g in gates:
        apply_rbs(state, g)
    np.testing.assert_allclose(state.unary_vector(), x, atol=1e-12)


def test_loader_rejects_non_unit():
    with pytest.raises(ValueError, match="unit norm"):
        loader_angles(np.array([1.0, 1.0]))


# ---------------------------------------------------------------- pyramid


def test_pyramid_5_frozen_schedule():
    # Hand enumeration of the 5-wire triangle: row k occupies columns
    # k, k+2, ..., 6-k. Ten gates over seven columns.
    layout = pyramid_layout(5, 5)
    assert layout.slots == (
        (0, 0),
        (1, 1),
        (2, 0),
        (2, 2),
        (3, 1),
        (3, 3),
        (4, 0),
        (4, 2),
        (5, 1),
        (6, 0),
    )
    assert layout.n_angles == 10
    circ = RBSCircuit(num_data=5, gates=pyramid_gates(layout, np.ones(10)))
    assert circuit_depth(circ) == 7


@pytest.mark.parametrize("n", list(range(2, 65)))
def test_pyramid_square_counts_and_depth(n):
    layout = pyramid_layout(n, n)
    assert layout.n_angles == n * (n - 1) // 2
    circ = RBSCircuit(num_data=n, gates=pyramid_gates(layout, np.zeros(layout.n_angles)))
    assert circuit_depth(circ) == 2 * n - 3


@pytest.mark.parametrize("m,n", [(6, 2), (2, 6), (11, 2), (3, 7), (9, 4)])
def test_pyramid_rectangular_depth_bound(m, n):
    layout = pyramid_layout(m, n)
    q = max(m, n)
    circ = RBSCircuit(num_data=q, gates=pyramid_gates(layout, np.zeros(layout.n_angles)))
    assert circuit_depth(circ) <= 2 * q - 3
    # every slot is inside the wire range and on nearest neighbours
    for _, k in layout.slots:
        assert 0 <= k < q - 1


def test_loader_depth_formula():
    for n in range(2, 65):
        gates = loader_gates(range(n), np.zeros(n - 1))
        circ = RBSCircuit(num_data=n, gates=gates)
        assert circuit_depth(circ) == n - 1


def test_depth_greedy_pipelining():
    circ = RBSCircuit(num_data=4)
    circ.add(RBSGate(0, 1, 0.1))
    circ.add(RBSGate(2, 3, 0.2))  # disjoint wires, same slice
    circ.add(RBSGate(1, 2, 0.3))
    assert circuit_depth(circ) == 2


# ------------------------------------------------------- matrix assembly


def test_two_wide_pyramid_matrix_frozen():
    layout = pyramid_layout(2, 2)
    theta = 0.37
    w = circuit_to_matrix(layout, [theta])
    c, s = math.cos(theta), math.sin(theta)
    np.testing.assert_allclose(w, [[c, s], [-s, c]], atol=1e-15)


@pytest.mark.parametrize("n", [2, 3, 5, 11, 21])
def test_square_orthogonality(n):
    rng = np.random.default_rng(n)
    layout = pyramid_layout(n, n)
    w = circuit_to_matrix(layout, rng.uniform(-math.pi, math.pi, layout.n_angles))
    np.testing.assert_allclose(w.T @ w, np.eye(n), atol=1e-12)


@pytest.mark.parametrize("m,n", [(4, 4), (6, 2), (2, 6), (7, 3)])
def test_matrix_matches_column_simulation(m, n):
    # Independent oracle: push each input basis vector through the gate list
    # with the unary simulator and read off the output block column.
    rng = np.random.default_rng(10 * m + n)
    layout = pyramid_layout(m, n)
    angles = rng.uniform(-math.pi, math.pi, layout.n_angles)
    w = circuit_to_matrix(layout, angles)
    assert w.shape == (m, n)
    gates = pyramid_gates(layout, angles)
    for col, win in enumerate(layout.in_wires):
        state = UnaryState.from_unary([1.0], wires=[win], q=layout.q)
        for g in gates:
            apply_rbs(state, g)
        vec = state.unary_vector()
        np.testing.assert_allclose(
            vec[list(layout.out_wires or range(layout.q))], w[:, col], atol=1e-12
        )


def test_rectangular_columns_orthonormal():
    rng = np.random.default_rng(7)
    layout = pyramid_layout(11, 2)
    w = circuit_to_matrix(layout, rng.uniform(-1, 1, layout.n_angles))
    np.testing.assert_allclose(w.T @ w, np.eye(2), atol=1e-12)


# ------------------------------------------------------- tomography


@pytest.mark.parametrize("seed", range(8))
def test_tomography_closed_form_amplitudes(seed):
    # The pre-measurement state has branch amplitudes (v_k +/- 1/sqrt(q))/2
    # where v is the full rotated vector.
    rng = np.random.default_rng(200 + seed)
    q = 4
    layout = pyramid_layout(q, q)
    angles = rng.uniform(-math.pi, math.pi, layout.n_angles)
    x = random_unit(rng, q)
    circ = tomography_circuit(x, layout, angles)
    state = simulate_unary(circ)

    full = circuit_to_matrix(layout, angles) @ x
    r = 1.0 / math.sqrt(q)
    np.testing.assert_allclose(state.amps[0, 1:], (full + r) / 2.0, atol=1e-12)
    np.testing.assert_allclose(state.amps[1, 1:], (full - r) / 2.0, atol=1e-12)
    assert abs(state.amps[0, 0]) < 1e-12 and abs(state.amps[1, 0]) < 1e-12


@pytest.mark.parametrize("m,n,seed", [(4, 4, 0), (6, 2, 1), (2, 6, 2), (5, 5, 3), (3, 7, 4)])
def test_tomography_estimates_equal_wx(m, n, seed):
    rng = np.random.default_rng(300 + seed)
    layout = pyramid_layout(m, n)
    angles = rng.uniform(-math.pi, math.pi, layout.n_angles)
    x = random_unit(rng, n)
    circ = tomography_circuit(x, layout, angles)
    probs = state_probabilities(simulate_unary(circ))
    y = estimate_outputs(probs, layout.q, m)
    np.testing.assert_allclose(y, circuit_to_matrix(layout, angles) @ x, atol=1e-10)


@pytest.mark.parametrize("m,n,seed", [(4, 4, 0), (6, 2, 1), (2, 6, 2)])
def test_tomography_unary_vs_dense_oracle(m, n, seed):
    # Dual-route check: the reduced simulation must agree with the full
    # 2^(q+1) statevector simulation outcome by outcome.
    rng = np.random.default_rng(400 + seed)
    layout = pyramid_layout(m, n)
    angles = rng.uniform(-math.pi, math.pi, layout.n_angles)
    x = random_unit(rng, n)
    circ = tomography_circuit(x, layout, angles)

    fast = state_probabilities(simulate_unary(circ))
    dense = classify_probabilities(
        dense_probabilities(simulate_dense(circ)), circ, tol=1e-16
    )
    keys = set(fast) | set(dense)
    for key in keys:
        assert abs(fast.get(key, 0.0) - dense.get(key, 0.0)) < 1e-12


def test_tomography_retention_is_one_noiseless():
    rng = np.random.default_rng(5)
    layout = pyramid_layout(5, 5)
    x = random_unit(rng, 5)
    circ = tomography_circuit(x, layout, rng.uniform(-1, 1, layout.n_angles))
    probs = state_probabilities(simulate_unary(circ))
    retained = sum(v for (b, w), v in probs.items() if w != INVALID)
    assert abs(retained - 1.0) < 1e-12


# ------------------------------------------------------- estimation


def test_estimate_frozen_example():
    # q=4: probability 0.25 on (0, e_j) and 0 on (1, e_j) gives y_j = 0.5.
    counts = {(0, 3): 0.25, (0, 0): 0.25, (0, 1): 0.25, (1, 2): 0.25}
    y = estimate_outputs(counts, q=4, m=1)
    assert abs(y[0] - 0.5) < 1e-15


def test_estimate_identity_from_exact_probs():
    # ((v + r)^2 - (v - r)^2) * sqrt(q) / 4 = v for each slot.
    rng = np.random.default_rng(9)
    q, m = 7, 3
    v = random_unit(rng, q)
    r = 1.0 / math.sqrt(q)
    counts = {}
    for w in range(q):
        counts[(0, w)] = (v[w] + r) ** 2 / 4.0
        counts[(1, w)] = (v[w] - r) ** 2 / 4.0
    y = estimate_outputs(counts, q, m)
    np.testing.assert_allclose(y, v[q - m :], atol=1e-12)


def test_estimate_empty_retention_raises():
    with pytest.raises(EstimationError):
        estimate_outputs({(0, INVALID): 100}, q=4, m=2)


def test_estimate_with_integer_counts():
    counts = {(0, 1): 600, (1, 1): 200, (0, 0): 100, (1, 0): 100, (0, INVALID): 50}
    y = estimate_outputs(counts, q=2, m=2)
    # retained = 1000 shots, slot 1: sqrt(2) * 400/1000
    assert abs(y[1] - math.sqrt(2) * 0.4) < 1e-12
    assert abs(y[0] - 0.0) < 1e-12


# ------------------------------------------------------- aux-gate semantics


def test_cnot_requires_ancilla_control():
    circ = RBSCircuit(num_data=2, has_ancilla=True)
    circ.add(AuxGate("cnot", (0, 1)))
    with pytest.raises(ValueError, match="ancilla"):
        simulate_unary(circ)


def test_cnot_guard_on_spread_state():
    # Flipping wire 0 while wire 1 is occupied in the ancilla-1 branch would
    # leave the unary subspace.
    circ = RBSCircuit(num_data=2, has_ancilla=True)
    circ.add(AuxGate("h", (2,)))
    circ.add(AuxGate("cnot", (2, 0)))
    circ.add(RBSGate(0, 1, 0.4))
    circ.add(AuxGate("cnot", (2, 1)))
    with pytest.raises(ValueError, match="unary"):
        simulate_unary(circ)


def test_ancilla_h_then_x_roundtrip():
    circ = RBSCircuit(num_data=1, has_ancilla=True)
    circ.add(AuxGate("h", (1,)))
    circ.add(AuxGate("x", (1,)))
    circ.add(AuxGate("h", (1,)))
    state = simulate_unary(circ)
    # HXH = Z on the ancilla: ground state is unchanged up to sign structure
    assert abs(state.amps[0, 0] - 1.0) < 1e-14
    assert abs(state.amps[1, 0]) < 1e-14


def test_unary_norm_preserved_through_tomography():
    rng = np.random.default_rng(11)
    layout = pyramid_layout(6, 6)
    x = random_unit(rng, 6)
    circ = tomography_circuit(x, layout, rng.uniform(-1, 1, layout.n_angles))
    state = simulate_unary(circ)
    assert abs(state.norm() - 1.0) < 1e-12


# ------------------------------------------------------- serialization


def test_text_roundtrip():
    rng = np.random.default_rng(21)
    layout = pyramid_layout(4, 4)
    x = random_unit(rng, 4)
    circ = tomography_circuit(x, layout, rng.uniform(-1, 1, layout.n_angles))
    text = circuit_to_text(circ)
    back = circuit_from_text(text)
    assert back.num_data == circ.num_data
    assert back.has_ancilla == circ.has_ancilla
    assert len(back.gates) == len(circ.gates)
    for g1, g2 in zip(circ.gates, back.gates):
        if isinstance(g1, RBSGate):
            assert isinstance(g2, RBSGate)
            assert g1.wires == g2.wires and g1.theta == g2.theta
        else:
            assert g1.kind == g2.kind and g1.wires == g2.wires
    # byte-identical after a second pass
    assert circuit_to_text(back) == text


def test_text_header_and_gate_lines():
    circ = RBSCircuit(num_data=3, has_ancilla=True)
    circ.add(RBSGate(1, 0, 0.5))
    text = circuit_to_text(circ)
    assert text.splitlines()[0] == "qubits 3 ancilla 1"
    assert text.splitlines()[1] == "RBS 1 0 0.5"


@pytest.mark.parametrize(
    "bad",
    [
        "",
        "qubits x ancilla 0",
        "qubits 3 ancilla 2",
        "qubits 3 ancilla 0\nRBS 0 1",
        "qubits 3 ancilla 0\nRBS 0 7 0.5",
        "qubits 3 ancilla 0\nFOO 1",
    ],
)
def test_text_malformed_raises(bad):
    with pytest.raises(ValueError):
        circuit_from_text(bad)


def test_probe_vector():
    np.testing.assert_allclose(uniform_probe(4), [0.5, 0.5, 0.5, 0.5], atol=1e-15)
