"""Circuit structures for networks of two-level rotations acting on the unary subspace.

Wire convention: data wires are 0..q-1, the ancilla (when present) is wire q,
address wires (when present) are q+1..q+a. Output slot j of an m-output block
lives on wire q-m+j.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "RBSGate",
    "AuxGate",
    "RBSCircuit",
    "PyramidLayout",
    "loader_angles",
    "loader_gates",
    "pyramid_layout",
    "pyramid_gates",
    "tomography_circuit",
    "circuit_depth",
    "circuit_slices",
    "circuit_to_matrix",
    "circuit_to_text",
    "circuit_from_text",
]


@dataclass(frozen=True)
class RBSGate:
    """Planar rotation between the unary amplitudes on wire_a and wire_b.

    Acting on amplitudes (beta, gamma) carried by (wire_a, wire_b):
        beta'  =  beta*cos(theta) + gamma*sin(theta)
        gamma' = -beta*sin(theta) + gamma*cos(theta)
    States with both wires excited or both empty are left alone. ``control``
    restricts the gate to one value of the address register.
    """

    wire_a: int
    wire_b: int
    theta: float
    control: int | None = None

    def __post_init__(self):
        if self.wire_a == self.wire_b:
            raise ValueError("RBS gate needs two distinct wires")

    @property
    def wires(self) -> tuple[int, int]:
        return (self.wire_a, self.wire_b)

    def dagger(self) -> "RBSGate":
        return replace(self, theta=-self.theta)


@dataclass(frozen=True)
class AuxGate:
    """Non-RBS gate used by the tomography wrapper: X, CNOT, H or ADDRPREP.

    ADDRPREP is the address-register preparation that maps |0..0> to the
    uniform superposition over the first ``param`` address values; its wires
    are the full address register.
    """

    kind: str  # "x" | "cnot" | "h" | "addrprep"
    wires: tuple[int, ...]
    param: int = 0
    control: int | None = None

    def __post_init__(self):
        if self.kind not in ("x", "cnot", "h", "addrprep"):
            raise ValueError(f"unknown auxiliary gate kind {self.kind!r}")
        if self.kind == "cnot" and len(self.wires) != 2:
            raise ValueError("CNOT takes exactly two wires")
        if self.kind in ("x", "h") and len(self.wires) != 1:
            raise ValueError(f"{self.kind} takes exactly one wire")


Gate = RBSGate | AuxGate


@dataclass
class RBSCircuit:
    """Ordered gate list on q data wires, optionally an ancilla and an address register."""

    num_data: int
    has_ancilla: bool = False
    num_address: int = 0
    gates: list[Gate] = field(default_factory=list)

    @property
    def ancilla(self) -> int:
        if not self.has_ancilla:
            raise ValueError("circuit has no ancilla wire")
        return self.num_data

    @property
    def address_wires(self) -> tuple[int, ...]:
        base = self.num_data + (1 if self.has_ancilla else 0)
        return tuple(range(base, base + self.num_address))

    @property
    def num_qubits(self) -> int:
        return self.num_data + (1 if self.has_ancilla else 0) + self.num_address

    def add(self, gate: Gate) -> None:
        self.gates.append(gate)

    def extend(self, gates) -> None:
        self.gates.extend(gates)


def loader_angles(x: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Angles of the diagonal-line loader that prepares sum_i x_i |e_i> from |e_0>.

    x must be unit norm. The k-th angle satisfies cos(theta_k) = x_k / r_k with
    r_k the remaining tail norm, so an all-positive x yields angles in (0, pi/2).
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("loader input must be a 1-d vector")
    nrm = float(np.linalg.norm(x))
    if abs(nrm - 1.0) > tol:
        raise ValueError(f"loader input must be unit norm, got ||x|| = {nrm!r}")
    n = x.size
    angles = np.zeros(n - 1)
    r = 1.0  # signed tail amplitude still to be distributed
    for k in range(n - 1):
        if abs(r) < 1e-300:
            break  # remaining components are all zero
        c = min(1.0, max(-1.0, x[k] / r))
        if k == n - 2:
            s = x[n - 1] / r
            s = min(1.0, max(-1.0, s))
        else:
            s = math.sqrt(max(0.0, 1.0 - c * c))
        angles[k] = math.atan2(s, c)
        r = s * r
    return angles


def loader_gates(block_wires, angles, control: int | None = None) -> list[RBSGate]:
    """RBS chain realizing the loader on consecutive block wires.

    Gates are oriented (next wire, current wire) so the sign convention of
    ``loader_angles`` holds under the RBS action.
    """
    block_wires = list(block_wires)
    if len(block_wires) != len(angles) + 1:
        raise ValueError("loader needs len(block)-1 angles")
    return [
        RBSGate(block_wires[k + 1], block_wires[k], float(angles[k]), control=control)
        for k in range(len(angles))
    ]


@dataclass(frozen=True)
class PyramidLayout:
    """Nearest-neighbour Givens schedule for an m x n orthogonal block on q = max(m, n) wires.

    ``slots`` is the ordered list of (column, row) positions; the gate at a
    slot acts on wires (row, row+1). Columns are time slices of the schedule.
    For m = n the schedule is the full triangle with n(n-1)/2 gates and depth
    2n-3; rectangular cases keep only slots inside the input/output light cone.
    """

    m: int
    n: int
    slots: tuple[tuple[int, int], ...]

    @property
    def q(self) -> int:
        return max(self.m, self.n)

    @property
    def n_angles(self) -> int:
        return len(self.slots)

    @property
    def in_wires(self) -> tuple[int, ...]:
        if self.m >= self.n:
            return tuple(range(self.q - self.n, self.q))
        return tuple(range(self.q))

    @property
    def out_wires(self) -> tuple[int, ...]:
        if self.m >= self.n:
            return tuple(range(self.q)) if self.m == self.q else tuple()
        return tuple(range(self.q - self.m, self.q))


def pyramid_layout(m: int, n: int) -> PyramidLayout:
    if m < 1 or n < 1:
        raise ValueError("pyramid dimensions must be positive")
    q = max(m, n)
    if q == 1:
        return PyramidLayout(m, n, tuple())
    # Full triangle: row k is active at columns k, k+2, ..., 2(q-2)-k.
    triangle = []
    for c in range(2 * q - 3):
        for k in range(c % 2, q - 1, 2):
            if k <= c <= 2 * (q - 2) - k:
                triangle.append((c, k))
    triangle.sort()
    if m == n:
        return PyramidLayout(m, n, tuple(triangle))

    in_wires = set(range(q - n, q)) if m >= n else set(range(q))
    out_wires = set(range(q)) if m >= n else set(range(q - m, q))

    # Forward pass: a slot is live only if the input block can reach it.
    fwd = set(in_wires)
    fwd_live = []
    for c, k in triangle:
        live = k in fwd or (k + 1) in fwd
        fwd_live.append(live)
        if live:
            fwd.update((k, k + 1))
    # Backward pass: a slot must also be able to influence the output block.
    bwd = set(out_wires)
    bwd_live = []
    for c, k in reversed(triangle):
        live = k in bwd or (k + 1) in bwd
        bwd_live.append(live)
        if live:
            bwd.update((k, k + 1))
    bwd_live.reverse()
    slots = tuple(
        slot for slot, f, b in zip(triangle, fwd_live, bwd_live) if f and b
    )
    return PyramidLayout(m, n, slots)


def pyramid_gates(layout: PyramidLayout, angles, control: int | None = None) -> list[RBSGate]:
    angles = np.asarray(angles, dtype=float)
    if angles.shape != (layout.n_angles,):
        raise ValueError(
            f"layout expects {layout.n_angles} angles, got shape {angles.shape}"
        )
    return [
        RBSGate(k, k + 1, float(t), control=control)
        for (_, k), t in zip(layout.slots, angles)
    ]


def uniform_probe(q: int) -> np.ndarray:
    """The probe vector with all components 1/sqrt(q) used by the tomography wrapper."""
    return np.full(q, 1.0 / math.sqrt(q))


def tomography_circuit(
    x: np.ndarray, layout: PyramidLayout, angles: np.ndarray
) -> RBSCircuit:
    """Hadamard-test style circuit whose measurement statistics reveal y = W x with signs.

    Sequence: ancilla superposition, entangling CNOT on the first active input
    wire, loader S(x), pyramid U(theta), inverse probe loader, ancilla X plus
    CNOT on wire 0, probe loader, final ancilla Hadamard. After it,
    sqrt(q) * (Pr[0, e_j] - Pr[1, e_j]) equals component j of W x.
    """
    x = np.asarray(x, dtype=float)
    if x.size != layout.n:
        raise ValueError(f"input has {x.size} components, layout expects {layout.n}")
    q = layout.q
    circ = RBSCircuit(num_data=q, has_ancilla=True)
    anc = circ.ancilla
    in_wires = layout.in_wires

    circ.add(AuxGate("h", (anc,)))
    circ.add(AuxGate("cnot", (anc, in_wires[0])))
    if layout.n >= 2:
        circ.extend(loader_gates(in_wires, loader_angles(x)))
    circ.extend(pyramid_gates(layout, angles))

    probe = loader_gates(range(q), loader_angles(uniform_probe(q)))
    circ.extend(g.dagger() for g in reversed(probe))
    circ.add(AuxGate("x", (anc,)))
    circ.add(AuxGate("cnot", (anc, 0)))
    circ.extend(probe)
    circ.add(AuxGate("h", (anc,)))
    return circ


def circuit_slices(circ: RBSCircuit) -> list[int]:
    """Greedy as-soon-as-possible slice index for every gate.

    Control wires are treated as spectators for scheduling: the address
    register is assumed to be fanned out into per-slice work copies, so two
    controlled gates with disjoint data wires may share a slice.  The extra
    per-gate cost of the control plumbing is already charged to the gate's
    single-qubit rotation count.
    """
    ready = {}
    slices = []
    for gate in circ.gates:
        s = max((ready.get(w, 0) for w in gate.wires), default=0)
        slices.append(s)
        for w in gate.wires:
            ready[w] = s + 1
    return slices


def circuit_depth(circ: RBSCircuit) -> int:
    """Number of parallel slices under greedy pipelining of disjoint-wire gates."""
    s = circuit_slices(circ)
    return max(s) + 1 if s else 0


def circuit_to_matrix(layout: PyramidLayout, angles) -> np.ndarray:
    """Assemble the m x n block W realized by the pyramid on the unary subspace."""
    q = layout.q
    mat = np.eye(q)
    for gate in pyramid_gates(layout, angles):
        a, b = gate.wire_a, gate.wire_b
        c, s = math.cos(gate.theta), math.sin(gate.theta)
        ra = mat[a].copy()
        mat[a] = c * ra + s * mat[b]
        mat[b] = -s * ra + c * mat[b]
    rows = layout.out_wires if layout.out_wires else tuple(range(q))
    return mat[np.ix_(rows, layout.in_wires)]


def circuit_to_text(circ: RBSCircuit) -> str:
    """Serialize to the line format 'RBS a b theta' / 'X a' / 'CNOT a b' / 'H a'.

    Controlled rotations and the address preparation use the extension lines
    'CRBS j a b theta' and 'ADDRPREP l'.
    """
    head = f"qubits {circ.num_data} ancilla {1 if circ.has_ancilla else 0}"
    if circ.num_address:
        head += f" address {circ.num_address}"
    lines = [head]
    for g in circ.gates:
        if isinstance(g, RBSGate):
            if g.control is None:
                lines.append(f"RBS {g.wire_a} {g.wire_b} {g.theta!r}")
            else:
                lines.append(f"CRBS {g.control} {g.wire_a} {g.wire_b} {g.theta!r}")
        elif g.kind == "x":
            lines.append(f"X {g.wires[0]}")
        elif g.kind == "h":
            lines.append(f"H {g.wires[0]}")
        elif g.kind == "cnot":
            lines.append(f"CNOT {g.wires[0]} {g.wires[1]}")
        else:
            lines.append(f"ADDRPREP {g.param}")
    return "\n".join(lines) + "\n"


def _parse_int(tok: str, lineno: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ValueError(f"line {lineno}: expected integer, got {tok!r}") from None


def circuit_from_text(text: str) -> RBSCircuit:
    lines = [ln for ln in (raw.strip() for raw in text.splitlines()) if ln]
    if not lines:
        raise ValueError("empty circuit text")
    head = lines[0].split()
    if len(head) not in (4, 6) or head[0] != "qubits" or head[2] != "ancilla":
        raise ValueError(f"line 1: malformed header {lines[0]!r}")
    q = _parse_int(head[1], 1)
    anc = _parse_int(head[3], 1)
    if anc not in (0, 1):
        raise ValueError("line 1: ancilla flag must be 0 or 1")
    n_addr = 0
    if len(head) == 6:
        if head[4] != "address":
            raise ValueError(f"line 1: malformed header {lines[0]!r}")
        n_addr = _parse_int(head[5], 1)
    circ = RBSCircuit(num_data=q, has_ancilla=bool(anc), num_address=n_addr)
    nq = circ.num_qubits

    def check_wire(w: int, lineno: int) -> int:
        if not 0 <= w < nq:
            raise ValueError(f"line {lineno}: wire {w} out of range for {nq} qubits")
        return w

    for lineno, ln in enumerate(lines[1:], start=2):
        toks = ln.split()
        op = toks[0].upper()
        if op == "RBS" and len(toks) == 4:
            a = check_wire(_parse_int(toks[1], lineno), lineno)
            b = check_wire(_parse_int(toks[2], lineno), lineno)
            circ.add(RBSGate(a, b, float(toks[3])))
        elif op == "CRBS" and len(toks) == 5:
            j = _parse_int(toks[1], lineno)
            a = check_wire(_parse_int(toks[2], lineno), lineno)
            b = check_wire(_parse_int(toks[3], lineno), lineno)
            circ.add(RBSGate(a, b, float(toks[4]), control=j))
        elif op == "X" and len(toks) == 2:
            circ.add(AuxGate("x", (check_wire(_parse_int(toks[1], lineno), lineno),)))
        elif op == "H" and len(toks) == 2:
            circ.add(AuxGate("h", (check_wire(_parse_int(toks[1], lineno), lineno),)))
        elif op == "CNOT" and len(toks) == 3:
            a = check_wire(_parse_int(toks[1], lineno), lineno)
            b = check_wire(_parse_int(toks[2], lineno), lineno)
            circ.add(AuxGate("cnot", (a, b)))
        elif op == "ADDRPREP" and len(toks) == 2:
            circ.add(
                AuxGate("addrprep", circ.address_wires, param=_parse_int(toks[1], lineno))
            )
        else:
            raise ValueError(f"line {lineno}: cannot parse {ln!r}")
    return circ
