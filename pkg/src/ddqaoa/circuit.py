"""Gate-list circuit IR and a dense unitary oracle.

Qubit 0 is the most significant bit of every basis index and the leftmost
character of every bitstring.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

MAX_UNITARY_QUBITS = 10


class GateKind(str, enum.Enum):
    ID = "ID"
    X = "X"
    SX = "SX"
    RZ = "RZ"
    H = "H"
    RX = "RX"
    Y = "Y"
    CX = "CX"
    CZ = "CZ"
    ECR = "ECR"
    RZZ = "RZZ"
    DELAY = "DELAY"
    MEASURE = "MEASURE"


ONE_QUBIT = frozenset(
    {GateKind.ID, GateKind.X, GateKind.SX, GateKind.RZ, GateKind.H, GateKind.RX,
     GateKind.Y, GateKind.DELAY, GateKind.MEASURE}
)
TWO_QUBIT = frozenset({GateKind.CX, GateKind.CZ, GateKind.ECR, GateKind.RZZ})
ROTATIONS = frozenset({GateKind.RZ, GateKind.RX, GateKind.RZZ})


class CircuitError(ValueError):
    pass


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    qubits: tuple[int, ...]
    angle: float | None = None
    delay_span: int | None = None

    def __post_init__(self):
        kind = GateKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        arity = 2 if kind in TWO_QUBIT else 1
        if len(self.qubits) != arity:
            raise CircuitError(f"{kind.value} takes {arity} qubit(s), got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise CircuitError(f"repeated qubit in {kind.value} {self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise CircuitError(f"negative qubit index in {self.qubits}")
        if kind in ROTATIONS:
            if self.angle is None or not math.isfinite(self.angle):
                raise CircuitError(f"{kind.value} needs a finite angle")
            object.__setattr__(self, "angle", float(self.angle))
        elif self.angle is not None:
            raise CircuitError(f"{kind.value} takes no angle")
        if kind is GateKind.DELAY:
            if self.delay_span is None or int(self.delay_span) != self.delay_span or self.delay_span < 0:
                raise CircuitError("DELAY needs a non-negative integer span")
            object.__setattr__(self, "delay_span", int(self.delay_span))
        elif self.delay_span is not None:
            raise CircuitError(f"{kind.value} takes no delay span")

    def __str__(self) -> str:
        return format_gate(self)


# Convenience constructors; these read better than Gate(GateKind.RZ, (q,), a).
def rz(theta: float, q: int) -> Gate:
    return Gate(GateKind.RZ, (q,), theta)


def rx(theta: float, q: int) -> Gate:
    return Gate(GateKind.RX, (q,), theta)


def rzz(theta: float, q0: int, q1: int) -> Gate:
    return Gate(GateKind.RZZ, (q0, q1), theta)


def x(q: int) -> Gate:
    return Gate(GateKind.X, (q,))


def y(q: int) -> Gate:
    return Gate(GateKind.Y, (q,))


def sx(q: int) -> Gate:
    return Gate(GateKind.SX, (q,))


def h(q: int) -> Gate:
    return Gate(GateKind.H, (q,))


def cx(c: int, t: int) -> Gate:
    return Gate(GateKind.CX, (c, t))


def cz(a: int, b: int) -> Gate:
    return Gate(GateKind.CZ, (a, b))


def ecr(c: int, t: int) -> Gate:
    return Gate(GateKind.ECR, (c, t))


def delay(span: int, q: int) -> Gate:
    return Gate(GateKind.DELAY, (q,), delay_span=span)


def measure(q: int) -> Gate:
    return Gate(GateKind.MEASURE, (q,))


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list on ``num_qubits`` qubits.

    ``layout`` is set by routing passes: ``layout[logical] == physical`` at
    the end of the circuit. ``None`` means the identity layout.
    """

    num_qubits: int
    gates: tuple[Gate, ...] = ()
    label: str = ""
    layout: tuple[int, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.num_qubits < 0:
            raise CircuitError("negative qubit count")
        seen_measure = set()
        for g in self.gates:
            if any(q >= self.num_qubits for q in g.qubits):
                raise CircuitError(f"{g} out of range for {self.num_qubits} qubits")
            if g.kind is GateKind.MEASURE:
                seen_measure.update(g.qubits)
            elif seen_measure and (set(g.qubits) & seen_measure):
                raise CircuitError(f"{g} follows a measurement on the same qubit")
        if self.layout is not None:
            layout = tuple(int(p) for p in self.layout)
            if sorted(layout) != list(range(len(layout))) or len(layout) > self.num_qubits:
                raise CircuitError(f"bad layout {self.layout}")
            object.__setattr__(self, "layout", layout)

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    def replace_gates(self, gates: Iterable[Gate]) -> "Circuit":
        return Circuit(self.num_qubits, tuple(gates), self.label, self.layout)

    def compose(self, other: "Circuit") -> "Circuit":
        if other.num_qubits != self.num_qubits:
            raise CircuitError("qubit count mismatch")
        return Circuit(self.num_qubits, self.gates + other.gates, self.label, self.layout)

    def without_measurements(self) -> "Circuit":
        return self.replace_gates(g for g in self.gates if g.kind is not GateKind.MEASURE)

    def with_measurements(self) -> "Circuit":
        return self.replace_gates(
            list(self.without_measurements().gates) + [measure(q) for q in range(self.num_qubits)]
        )

    def count(self, kind: GateKind) -> int:
        return sum(1 for g in self.gates if g.kind is kind)


def inverse_gate(g: Gate) -> list[Gate]:
    """Gates whose product undoes ``g`` (up to global phase)."""
    k = g.kind
    if k in ROTATIONS:
        return [Gate(k, g.qubits, -g.angle)]
    if k is GateKind.SX:
        # SX^-1 = SX^3 = X SX
        return [x(g.qubits[0]), sx(g.qubits[0])]
    if k in (GateKind.MEASURE,):
        raise CircuitError("measurement has no inverse")
    return [g]


def inverse(circuit: Circuit) -> Circuit:
    gates: list[Gate] = []
    for g in reversed(circuit.gates):
        gates.extend(inverse_gate(g))
    return circuit.replace_gates(gates)


# --- matrices ---------------------------------------------------------------

_SQ2 = 1 / math.sqrt(2)
I2 = np.eye(2, dtype=complex)
X_MAT = np.array([[0, 1], [1, 0]], dtype=complex)
Y_MAT = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z_MAT = np.array([[1, 0], [0, -1]], dtype=complex)
H_MAT = np.array([[1, 1], [1, -1]], dtype=complex) * _SQ2
SX_MAT = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=complex)
CX_MAT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
CZ_MAT = np.diag([1, 1, 1, -1]).astype(complex)
# control is the first (more significant) operand
ECR_MAT = _SQ2 * (np.kron(X_MAT, I2) - np.kron(Y_MAT, X_MAT))


def rz_matrix(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def rx_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def rzz_matrix(theta: float) -> np.ndarray:
    a, b = np.exp(-0.5j * theta), np.exp(0.5j * theta)
    return np.diag([a, b, b, a])


_FIXED = {
    GateKind.ID: I2,
    GateKind.X: X_MAT,
    GateKind.Y: Y_MAT,
    GateKind.SX: SX_MAT,
    GateKind.H: H_MAT,
    GateKind.DELAY: I2,
    GateKind.CX: CX_MAT,
    GateKind.CZ: CZ_MAT,
    GateKind.ECR: ECR_MAT,
}


def gate_matrix(g: Gate) -> np.ndarray:
    """Matrix of ``g`` on its own operands, first operand most significant."""
    if g.kind is GateKind.RZ:
        return rz_matrix(g.angle)
    if g.kind is GateKind.RX:
        return rx_matrix(g.angle)
    if g.kind is GateKind.RZZ:
        return rzz_matrix(g.angle)
    if g.kind is GateKind.MEASURE:
        raise CircuitError("measurement has no unitary")
    return _FIXED[g.kind]


def apply_matrix(tensor: np.ndarray, mat: np.ndarray, qubits: Sequence[int], offset: int = 0) -> np.ndarray:
    """Left-multiply ``mat`` onto the given qubit axes of ``tensor``.

    ``tensor`` has one length-2 axis per qubit starting at axis ``offset``;
    trailing axes (columns of a unitary) are carried along untouched.
    """
    k = len(qubits)
    op = mat.reshape((2,) * (2 * k))
    axes = [offset + q for q in qubits]
    out = np.tensordot(op, tensor, axes=(list(range(k, 2 * k)), axes))
    # tensordot puts the new axes first; move them back into place
    return np.moveaxis(out, list(range(k)), axes)


def unitary_of(circuit: Circuit) -> np.ndarray:
    n = circuit.num_qubits
    if n > MAX_UNITARY_QUBITS:
        raise CircuitError(f"unitary oracle limited to {MAX_UNITARY_QUBITS} qubits, got {n}")
    dim = 2**n
    u = np.eye(dim, dtype=complex).reshape((2,) * n + (dim,))
    for g in circuit.gates:
        if g.kind is GateKind.MEASURE:
            raise CircuitError("measurement in unitary context")
        if g.kind in (GateKind.DELAY, GateKind.ID):
            continue
        u = apply_matrix(u, gate_matrix(g), g.qubits)
    return u.reshape(dim, dim)


def equivalent_up_to_phase(u: np.ndarray, v: np.ndarray, tol: float = 1e-9) -> bool:
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch {u.shape} vs {v.shape}")
    idx = np.unravel_index(np.argmax(np.abs(v)), v.shape)
    if abs(v[idx]) == 0:
        return bool(np.max(np.abs(u)) <= tol)
    ratio = u[idx] / v[idx]
    if abs(ratio) == 0:
        return False
    c = ratio / abs(ratio)
    return bool(np.max(np.abs(u - c * v)) <= tol)


def permutation_matrix(perm: Sequence[int]) -> np.ndarray:
    """Unitary moving the state of qubit ``i`` onto qubit ``perm[i]``."""
    n = len(perm)
    dim = 2**n
    p = np.zeros((dim, dim))
    for idx in range(dim):
        bits = [(idx >> (n - 1 - i)) & 1 for i in range(n)]
        out = [0] * n
        for i, b in enumerate(bits):
            out[perm[i]] = b
        j = int("".join(map(str, out)), 2) if n else 0
        p[j, idx] = 1
    return p


# --- text format --------------------------------------------------------------
#
#   QUBITS <n>                 header, required, first non-blank line
#   LABEL <free text>          optional
#   LAYOUT p0,p1,...           optional final logical->physical map
#   <KIND> q0[,q1][@angle][#span]
#
# Angles are written with repr() so the text round-trips exactly.


def format_gate(g: Gate) -> str:
    s = f"{g.kind.value} {','.join(str(q) for q in g.qubits)}"
    if g.angle is not None:
        s += f"@{g.angle!r}"
    if g.delay_span is not None:
        s += f"#{g.delay_span}"
    return s


def parse_gate(line: str) -> Gate:
    try:
        kind, rest = line.split(None, 1)
        span = None
        angle = None
        if "#" in rest:
            rest, span_s = rest.split("#", 1)
            span = int(span_s)
        if "@" in rest:
            rest, angle_s = rest.split("@", 1)
            angle = float(angle_s)
        qubits = tuple(int(q) for q in rest.split(","))
    except ValueError as exc:
        raise CircuitError(f"cannot parse gate line {line!r}") from exc
    return Gate(GateKind(kind.upper()), qubits, angle, span)


def dumps(circuit: Circuit) -> str:
    lines = [f"QUBITS {circuit.num_qubits}"]
    if circuit.label:
        lines.append(f"LABEL {circuit.label}")
    if circuit.layout is not None:
        lines.append("LAYOUT " + ",".join(map(str, circuit.layout)))
    lines.extend(format_gate(g) for g in circuit.gates)
    return "\n".join(lines) + "\n"


def loads(text: str) -> Circuit:
    n = None
    label = ""
    layout = None
    gates = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        head = line.split(None, 1)[0].upper()
        if head == "QUBITS":
            n = int(line.split()[1])
        elif head == "LABEL":
            label = line[len("LABEL"):].strip()
        elif head == "LAYOUT":
            layout = tuple(int(p) for p in line.split()[1].split(","))
        else:
            gates.append(parse_gate(line))
    if n is None:
        raise CircuitError("missing QUBITS header")
    return Circuit(n, tuple(gates), label, layout)
