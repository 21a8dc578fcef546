"""Noise engine tests: density evolution, readout, sampling paths, gate tally."""

import math

import numpy as np
import pytest

from qonnlab.circuits import (
    AuxGate,
    RBSCircuit,
    RBSGate,
    loader_angles,
    loader_gates,
    pyramid_gates,
    pyramid_layout,
    tomography_circuit,
)
from qonnlab.fullsim import dense_probabilities, classify_probabilities, simulate_dense
from qonnlab.noise import (
    DensityState,
    GateTally,
    NoiseProfile,
    basis_gate_tally,
    evolve_density,
    measure_probs,
    multinomial_sample,
    noisy_layer_batch,
    noisy_layer_forward,
    noisy_qonn_forward,
    postselect_unary,
    trajectory_sample,
    _estimate_from_tables,
)
from qonnlab.qonn import NormalizationSpec, qonn_forward, qonn_init


def _unit_box_net(in_dim, width, n_layers, **kw):
    norm = NormalizationSpec(lo=-np.ones(in_dim), hi=np.ones(in_dim))
    return qonn_init(in_dim=in_dim, width=width, n_layers=n_layers, norm=norm, **kw)
from qonnlab.simulate import INVALID, EstimationError, UnaryState, simulate_unary, state_probabilities


# ---------------------------------------------------------------- reference
# Independent channel implementation: explicit Pauli twirl and loop-based
# unitary embedding, sharing no plumbing with the module under test.

_P1 = [
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
]


def ref_embed(u_small, wires, n):
    """Embed a 2^k unitary (wires[0] = most significant sub-index bit)."""
    k = len(wires)
    d = 1 << n
    out = np.zeros((d, d), dtype=complex)
    mask = 0
    for w in wires:
        mask |= 1 << w
    for i in range(d):
        sub = 0
        for pos, w in enumerate(wires):
            sub |= ((i >> w) & 1) << (k - 1 - pos)
        for sub2 in range(1 << k):
            amp = u_small[sub2, sub]
            if amp == 0:
                continue
            j = i & ~mask
            for pos, w in enumerate(wires):
                j |= ((sub2 >> (k - 1 - pos)) & 1) << w
            out[j, i] += amp
    return out


def ref_depolarize(rho, lam, support, n):
    if lam == 0.0:
        return rho
    k = len(support)
    acc = np.zeros_like(rho)
    for code in range(4**k):
        p_full = np.eye(1 << n, dtype=complex)
        for pos, w in enumerate(support):
            digit = (code // 4**pos) % 4
            p_full = ref_embed(_P1[digit], [w], n) @ p_full
        acc += p_full @ rho @ p_full.conj().T
    return (1.0 - lam) * rho + (lam / 4**k) * acc


def ref_evolve(circ, profile):
    from qonnlab.fullsim import gate_unitary

    n = circ.num_qubits
    d = 1 << n
    rho = np.zeros((d, d), dtype=complex)
    rho[0, 0] = 1.0
    for gate in circ.gates:
        u, wires = gate_unitary(gate, circ)
        if getattr(gate, "control", None) is not None:
            raise NotImplementedError
        full = ref_embed(u.astype(complex), list(wires), n)
        rho = full @ rho @ full.conj().T
        if profile.lam > 0.0:
            support = list(wires)
            rho = ref_depolarize(rho, profile.strength(len(support)), support, n)
    return rho


# ---------------------------------------------------------------- profiles


def test_profile_strengths_frozen():
    p = NoiseProfile(lam=0.01)
    assert p.lambda_1q == pytest.approx(0.01)
    assert p.lambda_2q == pytest.approx(0.008)
    assert p.strength(1) == pytest.approx(0.01)
    assert p.strength(2) == pytest.approx(0.008)
    assert p.strength(4) == pytest.approx(0.008)


@pytest.mark.parametrize(
    "kwargs",
    [dict(lam=-0.1), dict(readout_flip=0.6), dict(readout_flip=-0.01), dict(method="qasm")],
)
def test_profile_validation(kwargs):
    with pytest.raises(ValueError):
        NoiseProfile(**kwargs)


# ---------------------------------------------------------------- channels


def test_depolarize_single_qubit_frozen():
    circ = RBSCircuit(num_data=1, has_ancilla=False, num_address=0,
                      gates=(AuxGate("x", (0,)),))
    rho = evolve_density(circ, NoiseProfile(lam=0.01))
    assert rho.matrix[1, 1] == pytest.approx(0.995, abs=1e-14)
    assert rho.matrix[0, 0] == pytest.approx(0.005, abs=1e-14)


def test_depolarize_two_qubit_frozen():
    circ = RBSCircuit(num_data=2, has_ancilla=False, num_address=0,
                      gates=(RBSGate(0, 1, 0.0),))
    rho = evolve_density(circ, NoiseProfile(lam=0.01, two_qubit_scale=0.8))
    diag = np.diag(rho.matrix)
    assert diag[0] == pytest.approx(1 - 0.75 * 0.008, abs=1e-14)
    assert diag[1:] == pytest.approx([0.002, 0.002, 0.002], abs=1e-14)


@pytest.mark.parametrize("lam", [0.0, 0.02, 0.3])
def test_density_matches_pauli_twirl_reference(lam):
    rng = np.random.default_rng(7)
    x = rng.normal(size=2)
    x /= np.linalg.norm(x)
    layout = pyramid_layout(2, 2)
    circ = tomography_circuit(x, layout, rng.uniform(-1, 1, layout.n_angles))
    profile = NoiseProfile(lam=lam)
    got = evolve_density(circ, profile).matrix
    want = ref_evolve(circ, profile)
    assert np.max(np.abs(want.imag)) < 1e-12
    assert np.max(np.abs(got - want.real)) < 1e-12


def test_density_state_valid_after_noisy_evolution():
    rng = np.random.default_rng(3)
    x = rng.normal(size=4)
    x /= np.linalg.norm(x)
    layout = pyramid_layout(4, 4)
    circ = tomography_circuit(x, layout, rng.uniform(-1, 1, layout.n_angles))
    state = evolve_density(circ, NoiseProfile(lam=0.05))
    state.validate()
    assert state.trace() == pytest.approx(1.0, abs=1e-12)


def test_density_qubit_cap():
    circ = RBSCircuit(num_data=13, has_ancilla=False, num_address=0, gates=())
    with pytest.raises(ValueError, match="cap"):
        evolve_density(circ, NoiseProfile())


def test_controlled_gate_density_frozen_and_dense_route():
    gates = (
        AuxGate("addrprep", (), param=2),
        AuxGate("x", (0,)),
        RBSGate(0, 1, math.pi / 2, control=1),
    )
    circ = RBSCircuit(num_data=2, has_ancilla=False, num_address=1, gates=gates)
    probs = measure_probs(evolve_density(circ, NoiseProfile()), circ)
    assert probs[(0, 0, 0)] == pytest.approx(0.5, abs=1e-12)
    assert probs[(1, 0, 1)] == pytest.approx(0.5, abs=1e-12)
    assert len(probs) == 2
    dense = classify_probabilities(dense_probabilities(simulate_dense(circ)), circ)
    for key, val in dense.items():
        assert probs.get(key, 0.0) == pytest.approx(val, abs=1e-12)
    noisy = evolve_density(circ, NoiseProfile(lam=0.01))
    noisy.validate()


# ---------------------------------------------------------------- readout


def test_readout_confusion_frozen():
    circ = RBSCircuit(num_data=2, has_ancilla=False, num_address=0, gates=())
    state = evolve_density(circ, NoiseProfile())
    probs = measure_probs(state, circ, readout_flip=0.01)
    assert probs[(0, INVALID)] == pytest.approx(0.9801 + 0.0001, abs=1e-12)
    assert probs[(0, 0)] == pytest.approx(0.0099, abs=1e-12)
    assert probs[(0, 1)] == pytest.approx(0.0099, abs=1e-12)


def test_measure_probs_matches_unary_route_noiseless():
    rng = np.random.default_rng(11)
    x = rng.normal(size=5)
    x /= np.linalg.norm(x)
    layout = pyramid_layout(5, 5)
    circ = tomography_circuit(x, layout, rng.uniform(-1, 1, layout.n_angles))
    got = measure_probs(evolve_density(circ, NoiseProfile()), circ)
    state = simulate_unary(circ, UnaryState.ground(circ.num_data, True))
    want = state_probabilities(state)
    keys = set(got) | set(want)
    for key in keys:
        assert got.get(key, 0.0) == pytest.approx(want.get(key, 0.0), abs=1e-12)


# ---------------------------------------------------------------- sampling


def test_multinomial_deterministic_and_total():
    probs = {(0, 0): 0.25, (0, 1): 0.5, (1, INVALID): 0.25}
    a = multinomial_sample(probs, 1000, np.random.default_rng(5))
    b = multinomial_sample(probs, 1000, np.random.default_rng(5))
    assert a == b
    assert sum(a.values()) == 1000
    assert abs(a[(0, 1)] - 500) < 4 * math.sqrt(1000 * 0.5 * 0.5)


def test_postselect_frozen():
    counts = {(0, 1): 40, (1, 2): 10, (0, INVALID): 45, (1, INVALID): 5}
    kept, frac = postselect_unary(counts)
    assert kept == {(0, 1): 40, (1, 2): 10}
    assert frac == pytest.approx(0.5)


def test_estimation_error_on_empty_tables():
    with pytest.raises(EstimationError):
        _estimate_from_tables(np.zeros((1, 1, 2, 4)), 3, 3)


def _table_probs(counts, q):
    """Aggregate counts dict to (2, q+1) relative frequencies."""
    table = np.zeros((2, q + 1))
    total = sum(counts.values())
    for (bit, slot), v in counts.items():
        table[bit, q if slot == INVALID else slot] += v
    return table / total, total


@pytest.mark.parametrize("lam,flip", [(0.0, 0.0), (0.02, 0.01), (0.3, 0.02)])
def test_trajectory_matches_density_distribution(lam, flip):
    rng = np.random.default_rng(17)
    x = np.array([0.8, -0.6])
    layout = pyramid_layout(2, 2)
    circ = tomography_circuit(x, layout, np.array([0.7]))
    profile = NoiseProfile(lam=lam, readout_flip=flip)
    want = measure_probs(evolve_density(circ, profile), circ, flip)
    shots = 40000
    counts = trajectory_sample(circ, profile, shots, rng)
    freq, total = _table_probs(counts, circ.num_data)
    assert total == shots
    for (bit, slot), p in want.items():
        col = circ.num_data if slot == INVALID else slot
        sigma = math.sqrt(max(p * (1 - p), 1e-12) / shots)
        assert abs(freq[bit, col] - p) < 5 * sigma + 1e-3


def test_trajectory_full_strength_single_gate():
    # One bit flip at lam = 1: the twirl leaves identity with weight 1/4, so
    # the excited population is exactly 1/2.
    circ = RBSCircuit(num_data=1, has_ancilla=False, num_address=0,
                      gates=(AuxGate("x", (0,)),))
    counts = trajectory_sample(circ, NoiseProfile(lam=1.0), 40000, np.random.default_rng(2))
    p_hot = counts.get((0, 0), 0) / 40000
    assert abs(p_hot - 0.5) < 5 * math.sqrt(0.25 / 40000)


# ---------------------------------------------------------------- layers


@pytest.mark.parametrize("m,n", [(4, 4), (5, 3), (3, 5)])
def test_noisy_layer_exact_limit_equals_matrix(m, n):
    rng = np.random.default_rng(m * 10 + n)
    layout = pyramid_layout(m, n)
    angles = rng.uniform(-math.pi / 2, math.pi / 2, layout.n_angles)
    from qonnlab.circuits import circuit_to_matrix

    w = circuit_to_matrix(layout, angles)
    X = rng.normal(size=(3, n)) * 2.0
    y, frac = noisy_layer_batch(layout, angles, X, NoiseProfile(), np.random.default_rng(0))
    assert np.max(np.abs(y - X @ w.T)) < 1e-10
    assert frac == pytest.approx(np.ones(3), abs=1e-12)


def test_noisy_layer_zero_input_maps_to_zero():
    layout = pyramid_layout(3, 3)
    angles = np.zeros(layout.n_angles)
    y, frac = noisy_layer_forward(layout, angles, np.zeros(3), NoiseProfile())
    assert np.all(y == 0.0)


def test_noisy_layer_finite_shots_unbiased():
    rng = np.random.default_rng(23)
    layout = pyramid_layout(3, 3)
    angles = rng.uniform(-1, 1, layout.n_angles)
    from qonnlab.circuits import circuit_to_matrix

    w = circuit_to_matrix(layout, angles)
    x = np.array([1.0, 2.0, -1.0])
    profile = NoiseProfile(shots=4000)
    reps = np.stack([
        noisy_layer_forward(layout, angles, x, profile, np.random.default_rng(100 + r))[0]
        for r in range(50)
    ])
    err = np.abs(reps.mean(axis=0) - w @ x)
    se = reps.std(axis=0, ddof=1) / math.sqrt(50)
    assert np.all(err < 5 * se + 1e-3)


def test_shot_noise_shrinks_with_budget():
    rng = np.random.default_rng(29)
    layout = pyramid_layout(4, 4)
    angles = rng.uniform(-1, 1, layout.n_angles)
    x = np.array([0.5, -1.0, 2.0, 0.25])

    def spread(shots):
        reps = np.stack([
            noisy_layer_forward(layout, angles, x, NoiseProfile(shots=shots),
                                np.random.default_rng(1000 + r))[0]
            for r in range(40)
        ])
        return reps.std(axis=0).mean()

    assert spread(20000) < spread(500)


def test_trajectory_layer_path_runs():
    layout = pyramid_layout(3, 3)
    angles = np.array([0.3, -0.4, 0.2])
    profile = NoiseProfile(lam=1e-3, shots=2000, method="trajectory")
    y, frac = noisy_layer_forward(layout, angles, np.array([1.0, 1.0, 1.0]), profile,
                                  np.random.default_rng(0))
    assert y.shape == (3,)
    assert 0.9 < frac <= 1.0


# ---------------------------------------------------------------- networks


def test_noisy_qonn_forward_exact_limit_matches_classical():
    net = _unit_box_net(3, 4, 2, residual=True, seed=5)
    X = np.random.default_rng(6).uniform(-1, 1, size=(4, 3))
    want = qonn_forward(net, X)
    got = noisy_qonn_forward(net, X, NoiseProfile(), rng=0)
    assert np.max(np.abs(got - want)) < 1e-9


def test_noisy_qonn_forward_none_mode_matches_exact_under_noise():
    net = _unit_box_net(2, 3, 2, seed=9)
    X = np.random.default_rng(1).uniform(0, 1, size=(3, 2))
    got = noisy_qonn_forward(net, X, NoiseProfile(lam=0.05, shots=100),
                             rng=0, quantum_layers="none")
    assert np.max(np.abs(got - qonn_forward(net, X))) < 1e-12


def test_noisy_qonn_forward_info_retention():
    net = _unit_box_net(2, 3, 1, seed=2)
    X = np.random.default_rng(4).uniform(0, 1, size=(2, 2))
    out, info = noisy_qonn_forward(net, X, NoiseProfile(lam=0.01, shots=5000),
                                   rng=3, return_info=True)
    assert out.shape == (2, net.head_w.shape[0])
    assert np.all(info["retained"] > 0.8) and np.all(info["retained"] <= 1.0)


def test_qonn_forward_noisy_mode_dispatch():
    net = _unit_box_net(2, 3, 1, seed=8)
    X = np.random.default_rng(2).uniform(0, 1, size=(2, 2))
    got = qonn_forward(net, X, mode="noisy", profile=NoiseProfile(), rng=0)
    assert np.max(np.abs(got - qonn_forward(net, X))) < 1e-9


# ---------------------------------------------------------------- tally


def test_gate_tally_width5_layer_frozen():
    # Augmented width 6 square layer: 30 rotations and 2 controlled flips map
    # to 62 two-qubit entanglers under the documented decomposition.
    layout = pyramid_layout(6, 6)
    x = np.ones(6) / math.sqrt(6)
    circ = tomography_circuit(x, layout, np.zeros(layout.n_angles))
    tally = basis_gate_tally(circ)
    assert tally.two_qubit == 62
    assert tally.single_rot == 30 * 6 + 2 * 2 + 2 * 1
    assert tally.bit_flip == 1
    assert tally.depth_estimate == 77


def test_gate_tally_small_frozen():
    gates = (
        AuxGate("h", (2,)),
        AuxGate("cnot", (2, 0)),
        AuxGate("x", (2,)),
    )
    circ = RBSCircuit(num_data=2, has_ancilla=True, num_address=0, gates=gates)
    tally = basis_gate_tally(circ)
    assert tally == GateTally(two_qubit=1, single_rot=3, bit_flip=1, depth_estimate=4)
