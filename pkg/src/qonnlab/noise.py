"""Noisy circuit execution: depolarizing evolution, readout confusion, shot sampling.

Every circuit unitary here is real orthogonal, so density matrices stay real
symmetric and are stored as float64. Depolarizing noise acts locally on each
gate's support (address wires included for controlled gates); readout applies
an independent symmetric bit flip per qubit; post-selection keeps shots whose
data register reads exactly one excitation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .circuits import AuxGate, RBSCircuit, RBSGate, circuit_slices, tomography_circuit
from .fullsim import gate_unitary
from .simulate import INVALID, EstimationError

__all__ = [
    "DENSITY_QUBIT_CAP",
    "NoiseProfile",
    "DensityState",
    "evolve_density",
    "measure_probs",
    "multinomial_sample",
    "trajectory_sample",
    "postselect_unary",
    "noisy_layer_forward",
    "noisy_qonn_forward",
    "GateTally",
    "basis_gate_tally",
]

DENSITY_QUBIT_CAP = 12


@dataclass(frozen=True)
class NoiseProfile:
    """Depolarizing strengths, readout flip probability, shot budget and sampling mode.

    ``lam`` is the one-qubit strength; gates acting on two or more wires use
    ``two_qubit_scale * lam``. ``shots = None`` means the infinite-shot limit.
    """

    lam: float = 0.0
    two_qubit_scale: float = 0.8
    readout_flip: float = 0.0
    shots: int | None = None
    method: str = "multinomial"  # or "trajectory"

    def __post_init__(self):
        if self.lam < 0.0 or not 0.0 <= self.readout_flip <= 0.5:
            raise ValueError("invalid noise parameters")
        if self.method not in ("multinomial", "trajectory"):
            raise ValueError(f"unknown sampling method {self.method!r}")

    @property
    def lambda_1q(self) -> float:
        return self.lam

    @property
    def lambda_2q(self) -> float:
        return self.two_qubit_scale * self.lam

    def strength(self, support: int) -> float:
        return self.lambda_1q if support == 1 else self.lambda_2q

    def with_shots(self, shots: int | None) -> "NoiseProfile":
        return replace(self, shots=shots)


@dataclass
class DensityState:
    matrix: np.ndarray
    num_qubits: int

    def trace(self) -> float:
        return float(np.trace(self.matrix))

    def validate(self, tol: float = 1e-9) -> None:
        m = self.matrix
        if m.shape != (1 << self.num_qubits,) * 2:
            raise ValueError("density matrix has wrong shape")
        if np.max(np.abs(m - m.T)) > tol:
            raise ValueError("density matrix is not symmetric")
        if abs(self.trace() - 1.0) > tol:
            raise ValueError(f"density trace {self.trace()} != 1")
        if np.linalg.eigvalsh(m).min() < -tol:
            raise ValueError("density matrix has a negative eigenvalue")


# ----------------------------------------------------------- tensor plumbing
#
# Arrays carry a leading batch axis; wire w of an n-qubit register is bit w of
# the flat index, i.e. tensor axis n-1-w once reshaped to (2,)*n.


def _row_axes(wires, n):
    return [n - 1 - w for w in wires]


def _apply_rows(rho, u, wires, n, control=None, addr_wires=()):
    """rho <- (U x I) rho for batched (B, D, D) arrays; u may be (B, 2^k, 2^k)."""
    b, d, _ = rho.shape
    k = len(wires)
    t = rho.reshape((b,) + (2,) * n + (d,))
    axes = [1 + a for a in _row_axes(wires, n)]
    if control is None:
        moved = np.moveaxis(t, axes, range(1, 1 + k))
        shape = moved.shape
        block = np.ascontiguousarray(moved).reshape(b, 1 << k, -1)
        out = np.matmul(u, block)
        return np.moveaxis(out.reshape(shape), range(1, 1 + k), axes).reshape(b, d, d)
    addr_axes = [1 + a for a in _row_axes(reversed(list(addr_wires)), n)]
    na = len(addr_axes)
    moved = np.moveaxis(t, addr_axes + axes, range(1, 1 + na + k))
    shape = moved.shape
    block = np.ascontiguousarray(moved).reshape(b, 1 << na, 1 << k, -1)
    block[:, control] = np.matmul(u, block[:, control])
    return np.moveaxis(
        block.reshape(shape), range(1, 1 + na + k), addr_axes + axes
    ).reshape(b, d, d)


def _apply_gate_both_sides(rho, u, wires, n, control=None, addr_wires=()):
    rho = _apply_rows(rho, u, wires, n, control, addr_wires)
    rho = np.swapaxes(rho, -1, -2)
    rho = _apply_rows(rho, u, wires, n, control, addr_wires)
    return np.swapaxes(rho, -1, -2)


def _depolarize(rho, lam, wires, n):
    """Local depolarizing channel on the given support, batched."""
    if lam == 0.0:
        return rho
    b, d, _ = rho.shape
    k = len(wires)
    t = rho.reshape((b,) + (2,) * n + (2,) * n)
    row_axes = [1 + a for a in _row_axes(wires, n)]
    col_axes = [1 + n + a for a in _row_axes(wires, n)]
    moved = np.moveaxis(t, row_axes + col_axes, range(1, 1 + 2 * k))
    shape = moved.shape
    block = np.ascontiguousarray(moved).reshape(b, 1 << k, 1 << k, -1)
    tr = np.einsum("biir->br", block)
    block *= 1.0 - lam
    idx = np.arange(1 << k)
    block[:, idx, idx, :] += (lam / (1 << k)) * tr[:, None, :]
    return np.moveaxis(
        block.reshape(shape), range(1, 1 + 2 * k), row_axes + col_axes
    ).reshape(b, d, d)


def _gate_support(gate, circ):
    wires = list(gate.wires)
    if getattr(gate, "control", None) is not None:
        wires = list(circ.address_wires) + wires
    return wires


def evolve_density_batch(circs: list[RBSCircuit], profile: NoiseProfile) -> np.ndarray:
    """Evolve a batch of structurally identical circuits; returns (B, D, D).

    The circuits must share gate count, kinds, wires and controls; only RBS
    angles may differ between batch entries (as produced by per-input loaders).
    """
    ref = circs[0]
    n = ref.num_qubits
    if n > DENSITY_QUBIT_CAP:
        raise ValueError(f"{n} qubits exceed the density-evolution cap {DENSITY_QUBIT_CAP}")
    b = len(circs)
    d = 1 << n
    rho = np.zeros((b, d, d))
    rho[:, 0, 0] = 1.0
    addr = ref.address_wires
    for pos, gate in enumerate(ref.gates):
        peers = [c.gates[pos] for c in circs]
        if isinstance(gate, RBSGate):
            thetas = np.array([g.theta for g in peers])
            if np.all(thetas == thetas[0]):
                u, wires = gate_unitary(gate, ref)
            else:
                cs, sn = np.cos(thetas), np.sin(thetas)
                u = np.zeros((b, 4, 4))
                u[:, 0, 0] = 1.0
                u[:, 3, 3] = 1.0
                u[:, 1, 1] = cs
                u[:, 1, 2] = -sn
                u[:, 2, 1] = sn
                u[:, 2, 2] = cs
                wires = gate.wires
        else:
            u, wires = gate_unitary(gate, ref)
        ctrl = getattr(gate, "control", None)
        rho = _apply_gate_both_sides(rho, u, wires, n, ctrl, addr)
        if profile.lam > 0.0:
            if isinstance(gate, AuxGate) and gate.kind == "addrprep":
                for w in addr:
                    rho = _depolarize(rho, profile.lambda_1q, [w], n)
            else:
                support = _gate_support(gate, ref)
                rho = _depolarize(rho, profile.strength(len(support)), support, n)
    return rho


def evolve_density(circ: RBSCircuit, profile: NoiseProfile) -> DensityState:
    """Exact noisy evolution of one circuit from the all-zeros state."""
    rho = evolve_density_batch([circ], profile)
    return DensityState(matrix=rho[0], num_qubits=circ.num_qubits)


# ----------------------------------------------------------- measurement


def _apply_readout_probs(probs: np.ndarray, flip: float, n: int) -> np.ndarray:
    """Push a (B, 2^n) probability batch through per-qubit symmetric confusion."""
    if flip == 0.0:
        return probs
    b = probs.shape[0]
    t = probs.reshape((b,) + (2,) * n)
    for axis in range(1, n + 1):
        m = np.moveaxis(t, axis, 1)
        a0 = m[:, 0].copy()
        m[:, 0] = (1.0 - flip) * a0 + flip * m[:, 1]
        m[:, 1] = flip * a0 + (1.0 - flip) * m[:, 1]
    return t.reshape(b, -1)


def _outcome_index_maps(circ: RBSCircuit):
    """slot (data unary index, q for invalid), ancilla bit and address value per basis state."""
    n = circ.num_qubits
    q = circ.num_data
    idx = np.arange(1 << n)
    bits = [(idx >> w) & 1 for w in range(q)]
    weight = np.zeros_like(idx)
    hot = np.zeros_like(idx)
    for w, bw in enumerate(bits):
        weight += bw
        hot += w * bw
    slot = np.where(weight == 1, hot, q)
    anc = ((idx >> circ.ancilla) & 1) if circ.has_ancilla else np.zeros_like(idx)
    addr = np.zeros_like(idx)
    for pos, w in enumerate(circ.address_wires):
        addr |= ((idx >> w) & 1) << pos
    return slot, anc, addr


def outcome_tables(probs: np.ndarray, circ: RBSCircuit) -> np.ndarray:
    """Aggregate (B, 2^n) distributions to (B, n_addr_values, 2, q+1) outcome tables."""
    slot, anc, addr = _outcome_index_maps(circ)
    q = circ.num_data
    n_addr = 1 << circ.num_address if circ.num_address else 1
    b = probs.shape[0]
    tables = np.zeros((b, n_addr, 2, q + 1))
    flat = addr * (2 * (q + 1)) + anc * (q + 1) + slot
    for i in range(b):
        tables[i] = np.bincount(
            flat, weights=probs[i], minlength=n_addr * 2 * (q + 1)
        ).reshape(n_addr, 2, q + 1)
    return tables


def _table_to_counts(table: np.ndarray, circ: RBSCircuit) -> dict:
    q = circ.num_data
    out: dict = {}
    n_addr, _, _ = table.shape
    for a in range(n_addr):
        for bit in range(2):
            for s in range(q + 1):
                v = table[a, bit, s]
                if v != 0:
                    key_slot = INVALID if s == q else s
                    key = (a, bit, key_slot) if circ.num_address else (bit, key_slot)
                    out[key] = out.get(key, 0) + (int(v) if float(v).is_integer() else float(v))
    return out


def measure_probs(state: DensityState, circ: RBSCircuit, readout_flip: float = 0.0) -> dict:
    """Outcome probabilities of a density state after readout confusion.

    Keys are (ancilla bit, hot wire | INVALID), prefixed by the address value
    for circuits with an address register.
    """
    diag = np.clip(np.diag(state.matrix), 0.0, None)[None, :]
    diag = _apply_readout_probs(diag.copy(), readout_flip, circ.num_qubits)
    table = outcome_tables(diag, circ)[0]
    table[np.abs(table) < 1e-15] = 0.0  # drop accumulated float dust
    return _table_to_counts(table, circ)


def multinomial_sample(probs: dict, shots: int, rng: np.random.Generator) -> dict:
    """Draw shot counts for a finite budget; keys are sorted for determinism."""
    keys = sorted(probs.keys())
    p = np.array([max(0.0, probs[k]) for k in keys])
    total = p.sum()
    if total <= 0.0:
        raise ValueError("probabilities sum to zero")
    counts = rng.multinomial(shots, p / total)
    return {k: int(c) for k, c in zip(keys, counts) if c > 0}


def postselect_unary(counts: dict) -> tuple[dict, float]:
    """Drop non-unary outcomes; returns retained counts and retained fraction."""
    total = sum(counts.values())
    kept = {k: v for k, v in counts.items() if k[-1] != INVALID}
    retained = sum(kept.values())
    frac = retained / total if total > 0 else 0.0
    return kept, frac


# ----------------------------------------------------------- trajectories


def _apply_u_vec(vec: np.ndarray, u: np.ndarray, wires, n: int) -> np.ndarray:
    k = len(wires)
    t = vec.reshape((2,) * n)
    axes = _row_axes(wires, n)
    moved = np.moveaxis(t, axes, range(k))
    shape = moved.shape
    block = np.ascontiguousarray(moved).reshape(1 << k, -1)
    out = (u @ block).reshape(shape)
    return np.moveaxis(out, range(k), axes).reshape(-1)


def _apply_pauli_vec(vec: np.ndarray, paulis, wires, n: int) -> np.ndarray:
    """Apply per-wire Paulis (0..3) ignoring the global phase: Y acts as XZ."""
    t = vec.reshape((2,) * n)
    for p, w in zip(paulis, wires):
        if p == 0:
            continue
        axis = n - 1 - w
        if p in (2, 3):  # Z component first (sign on the |1> slice)
            m = np.moveaxis(t, axis, 0)
            m[1] = -m[1]
        if p in (1, 2):  # X component (bit flip)
            t = np.flip(t, axis=axis)
    return t.reshape(-1)


def trajectory_sample(
    circ: RBSCircuit, profile: NoiseProfile, shots: int, rng: np.random.Generator
) -> dict:
    """Per-shot Monte-Carlo unravelling of the depolarizing channels.

    Each gate independently suffers a uniformly random non-identity Pauli on
    its support with probability lam_k (1 - 4^-k). Shots without any error
    event follow the noiseless distribution, so only error shots are evolved
    explicitly; single-error shots reuse precomputed suffix operators.
    """
    n = circ.num_qubits
    d = 1 << n
    gates = circ.gates
    supports = []
    p_err = np.zeros(len(gates))
    for gi, gate in enumerate(gates):
        if isinstance(gate, AuxGate) and gate.kind == "addrprep":
            sup = list(circ.address_wires)
            lam = profile.lambda_1q  # modelled as one single-qubit slot per address wire
        else:
            sup = _gate_support(gate, circ)
            lam = profile.strength(len(sup))
        supports.append(sup)
        k = len(sup)
        p_err[gi] = lam * (1.0 - 0.25**k)

    # Prefix states and suffix operators of the noiseless circuit.
    unitaries = []
    prefixes = []
    state = np.zeros(d)
    state[0] = 1.0
    addr = circ.address_wires
    for gate in gates:
        u, wires = gate_unitary(gate, circ)
        ctrl = getattr(gate, "control", None)
        if ctrl is not None:
            full = _apply_rows(np.eye(d)[None], u, wires, n, ctrl, addr)[0]
            state = full @ state
            unitaries.append((full, tuple(range(n - 1, -1, -1)), True))
        else:
            state = _apply_u_vec(state, u, wires, n)
            unitaries.append((u, wires, False))
        prefixes.append(state.copy())

    suffix = [None] * len(gates)
    acc = np.eye(d)
    for gi in range(len(gates) - 1, -1, -1):
        suffix[gi] = acc
        u, wires, is_full = unitaries[gi]
        if gi > 0:
            if is_full:
                acc = acc @ u
            else:
                # acc <- acc @ U_full == (U_full^T acc^T)^T.
                acc = _apply_rows(
                    np.ascontiguousarray(acc.T)[None], u.T, wires, n
                )[0].T

    p_clean = float(np.prod(1.0 - p_err))
    n_clean = int(rng.binomial(shots, p_clean)) if p_clean < 1.0 else shots

    clean_probs = _apply_readout_probs(
        (prefixes[-1] ** 2)[None].copy(), profile.readout_flip, n
    )[0]
    clean_probs = np.clip(clean_probs, 0.0, None)
    clean_probs /= clean_probs.sum()
    totals = np.asarray(rng.multinomial(n_clean, clean_probs), dtype=np.int64)

    n_err = shots - n_clean
    single: dict = {}
    multi = []
    for _ in range(n_err):
        while True:
            hits = np.nonzero(rng.random(len(gates)) < p_err)[0]
            if hits.size:
                break
        if hits.size == 1:
            gi = int(hits[0])
            k = len(supports[gi])
            pidx = int(rng.integers(1, 4**k))
            single[(gi, pidx)] = single.get((gi, pidx), 0) + 1
        else:
            multi.append([(int(gi), int(rng.integers(1, 4 ** len(supports[gi]))))
                          for gi in hits])

    def pauli_digits(pidx, k):
        return [(pidx // 4**i) % 4 for i in range(k)]

    for (gi, pidx), count in sorted(single.items()):
        vec = _apply_pauli_vec(
            prefixes[gi].copy(), pauli_digits(pidx, len(supports[gi])), supports[gi], n
        )
        vec = suffix[gi] @ vec
        probs = _apply_readout_probs((vec**2)[None].copy(), profile.readout_flip, n)[0]
        probs = np.clip(probs, 0.0, None)
        totals += rng.multinomial(count, probs / probs.sum())

    for events in multi:
        first_gi = events[0][0]
        vec = prefixes[first_gi].copy()
        evmap = dict(events)
        vec = _apply_pauli_vec(vec, pauli_digits(evmap[first_gi], len(supports[first_gi])),
                               supports[first_gi], n)
        for gi in range(first_gi + 1, len(gates)):
            u, wires, is_full = unitaries[gi]
            vec = (u @ vec) if is_full else _apply_u_vec(vec, u, wires, n)
            if gi in evmap:
                vec = _apply_pauli_vec(vec, pauli_digits(evmap[gi], len(supports[gi])),
                                       supports[gi], n)
        probs = _apply_readout_probs((vec**2)[None].copy(), profile.readout_flip, n)[0]
        probs = np.clip(probs, 0.0, None)
        totals += rng.multinomial(1, probs / probs.sum())

    tables = outcome_tables(np.asarray(totals, dtype=float)[None], circ)[0]
    return _table_to_counts(tables, circ)


# ----------------------------------------------------------- layer execution


def _estimate_from_tables(tables: np.ndarray, q: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized output estimation from (B, 1, 2, q+1) outcome tables."""
    t = tables[:, 0]
    retained = t[:, :, :q].sum(axis=(1, 2))
    if np.any(retained <= 0.0):
        raise EstimationError("no retained shots for at least one input")
    cols = np.arange(q - m, q)
    y = math.sqrt(q) * (t[:, 0, cols] - t[:, 1, cols]) / retained[:, None]
    total = t.sum(axis=(1, 2))
    frac = np.where(total > 0, retained / np.where(total > 0, total, 1.0), 0.0)
    return y, frac


def noisy_layer_batch(
    layout,
    angles: np.ndarray,
    X: np.ndarray,
    profile: NoiseProfile,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Run one quantum layer on a batch of raw (unnormalized) input vectors.

    Returns (Y, retained_fraction). Inputs are loaded as unit vectors and the
    estimates are rescaled by each input norm; zero inputs map to zero.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    norms = np.linalg.norm(X, axis=1)
    alive = norms > 1e-12
    out = np.zeros((X.shape[0], layout.m))
    frac = np.ones(X.shape[0])
    if not np.any(alive):
        return out, frac
    circs = [
        tomography_circuit(X[i] / norms[i], layout, angles)
        for i in np.nonzero(alive)[0]
    ]
    if profile.method == "trajectory" and profile.shots is not None:
        tables = np.stack(
            [
                outcome_tables(
                    _counts_vector(trajectory_sample(c, profile, profile.shots, rng), c),
                    c,
                )[0]
                for c in circs
            ]
        )
        y, f = _estimate_from_tables(tables, layout.q, layout.m)
        out[alive] = y * norms[alive, None]
        frac[alive] = f
        return out, frac
    # Work in chunks so the batched density matrices (2^n x 2^n each) never
    # hold more than ~2^25 floats at once; wide layers would otherwise exhaust
    # memory long before the qubit cap.
    dim_sq = 1 << (2 * circs[0].num_qubits)
    chunk = max(1, (1 << 25) // dim_sq)
    base_parts = []
    for lo in range(0, len(circs), chunk):
        rho = evolve_density_batch(circs[lo : lo + chunk], profile)
        diags = np.clip(np.einsum("bii->bi", rho), 0.0, None)
        del rho
        diags = _apply_readout_probs(diags.copy(), profile.readout_flip, circs[0].num_qubits)
        base_parts.append(outcome_tables(diags, circs[0]))
    base = np.concatenate(base_parts, axis=0)
    if profile.shots is None:
        tables = base
    else:
        tables = np.zeros_like(base)
        for i in range(len(circs)):
            flat = base[i].reshape(-1)
            total = flat.sum()
            tables[i] = rng.multinomial(
                profile.shots, np.clip(flat, 0, None) / total
            ).reshape(base[i].shape).astype(float)
    y, f = _estimate_from_tables(tables, layout.q, layout.m)
    out[alive] = y * norms[alive, None]
    frac[alive] = f
    return out, frac


def _counts_vector(counts: dict, circ: RBSCircuit) -> np.ndarray:
    """Rebuild a (1, 2^n)-like pseudo distribution from aggregated counts.

    Only the aggregate table matters downstream, so counts are placed on
    representative basis states of each outcome class.
    """
    q = circ.num_data
    n = circ.num_qubits
    vec = np.zeros((1, 1 << n))
    for key, v in counts.items():
        if circ.num_address:
            a, bit, slot = key
        else:
            a = 0
            bit, slot = key
        idx = 0
        if slot != INVALID:
            idx |= 1 << slot
        elif q >= 2:
            idx |= (1 << q) - 1  # representative non-unary pattern
        if circ.has_ancilla and bit:
            idx |= 1 << circ.ancilla
        for pos, w in enumerate(circ.address_wires):
            if (a >> pos) & 1:
                idx |= 1 << w
        vec[0, idx] += v
    return vec


def noisy_layer_forward(
    layout,
    angles: np.ndarray,
    x: np.ndarray,
    profile: NoiseProfile,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, float]:
    """Single-input wrapper around the batched noisy layer execution."""
    rng = np.random.default_rng(0) if rng is None else rng
    y, frac = noisy_layer_batch(layout, angles, np.atleast_2d(x), profile, rng)
    return y[0], float(frac[0])


def noisy_qonn_forward(
    net,
    X: np.ndarray,
    profile: NoiseProfile,
    rng: np.random.Generator | int | None = None,
    quantum_layers: str = "all",
    return_info: bool = False,
):
    """Full network forward where quantum layers run through noisy tomography.

    ``quantum_layers`` may be "all" or "none" (exact classical evaluation),
    letting hybrid executors disable noise per sub-network. Activations,
    rescaling, residuals and the dense head stay classical.
    """
    from .qonn import silu  # local import to avoid a module cycle

    if isinstance(rng, (int, np.integer)) or rng is None:
        rng = np.random.default_rng(rng)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    h = net.norm.apply(X)
    fracs = []
    for i, layer in enumerate(net.layers):
        scale = 1.0 if i == 0 else 1.0 / math.sqrt(h.shape[-1])
        u = h * scale
        if quantum_layers == "none":
            z = u @ layer.matrix().T
        else:
            z, f = noisy_layer_batch(layer.layout, layer.angles, u, profile, rng)
            fracs.append(f)
        z = z * layer.gain + layer.bias
        a = silu(z)
        h = a + h if (layer.residual and z.shape[-1] == h.shape[-1]) else a
    out = h @ net.head_w.T + net.head_b
    if return_info:
        info = {"retained": np.mean(fracs, axis=0) if fracs else np.ones(X.shape[0])}
        return out, info
    return out


# ----------------------------------------------------------- resource tally


@dataclass(frozen=True)
class GateTally:
    """Basis-gate estimate under the documented decomposition model.

    Each RBS costs 2 two-qubit entanglers plus 6 single-qubit rotations at an
    effective pipelined depth of 4 (adjacent Hadamard pairs cancel); CNOT costs
    1 entangler, 2 rotations, depth 2; X is a frame flip of depth 1; H is one
    rotation; controlled rotations add 2 singles per address qubit at the same
    depth; the address preparation costs one rotation layer.
    """

    two_qubit: int
    single_rot: int
    bit_flip: int
    depth_estimate: int


def _gate_costs(gate, circ):
    if isinstance(gate, RBSGate):
        if gate.control is None:
            return 2, 6, 0, 4
        return 2, 6 + 2 * circ.num_address, 0, 4
    if gate.kind == "cnot":
        return 1, 2, 0, 2
    if gate.kind == "h":
        return 0, 1, 0, 1
    if gate.kind == "x":
        return 0, 0, 1, 1
    if gate.kind == "addrprep":
        return 0, max(1, circ.num_address), 0, 1
    raise ValueError(f"unknown gate {gate!r}")


def basis_gate_tally(circ: RBSCircuit) -> GateTally:
    slices = circuit_slices(circ)
    two_q = singles = flips = 0
    slice_depth: dict[int, int] = {}
    for gate, s in zip(circ.gates, slices):
        t, r, f, d = _gate_costs(gate, circ)
        two_q += t
        singles += r
        flips += f
        slice_depth[s] = max(slice_depth.get(s, 0), d)
    return GateTally(
        two_qubit=two_q,
        single_rot=singles,
        bit_flip=flips,
        depth_estimate=sum(slice_depth.values()),
    )
