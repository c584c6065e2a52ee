"""Gate decompositions, basis lowering and peephole optimization presets."""

from __future__ import annotations

import cmath
import enum
import math
from typing import Iterable, Sequence

import numpy as np

from .circuit import (
    Circuit,
    CircuitError,
    Gate,
    GateKind,
    cx,
    cz,
    ecr,
    gate_matrix,
    h,
    rx,
    rz,
    rzz,
    sx,
    x,
)
from .device import DeviceModel

ANGLE_EPS = 1e-10
PI = math.pi


class DecompositionStyle(str, enum.Enum):
    CX_IMPL = "CX_IMPL"
    CZ_IMPL = "CZ_IMPL"


class OptPreset(str, enum.Enum):
    OPT1 = "OPT1"
    OPT3 = "OPT3"


class LoweringError(CircuitError):
    pass


def _check_pair(q0: int, q1: int) -> None:
    if q0 == q1:
        raise CircuitError(f"two-qubit decomposition on a single qubit {q0}")


def rzz_as_cx(theta: float, q0: int, q1: int) -> list[Gate]:
    _check_pair(q0, q1)
    return [cx(q0, q1), rz(theta, q1), cx(q0, q1)]


def rzz_as_cz(theta: float, q0: int, q1: int) -> list[Gate]:
    _check_pair(q0, q1)
    return [h(q1), cz(q0, q1), rx(theta, q1), cz(q0, q1), h(q1)]


def zz_swap(theta: float, q0: int, q1: int, style: DecompositionStyle) -> list[Gate]:
    """RZZ(theta) followed by SWAP, fused into three two-qubit gates."""
    _check_pair(q0, q1)
    if DecompositionStyle(style) is DecompositionStyle.CX_IMPL:
        return [cx(q0, q1), rz(theta, q1), cx(q1, q0), cx(q0, q1)]
    return [
        h(q1), cz(q0, q1), h(q1), rz(theta, q1),
        h(q0), cz(q0, q1), h(q0),
        h(q1), cz(q0, q1), h(q1),
    ]


def cx_as_ecr(control: int, target: int, device: DeviceModel | None = None) -> list[Gate]:
    """One ECR in the given direction plus RZ/SX/X corrections.

    With ECR = (X x I) . RZX(pi/2), CX equals (RZ(-pi/2) X  x  RX(-pi/2)) . ECR
    up to global phase, and RX(-pi/2) = RZ(pi) SX RZ(-pi) up to phase.
    """
    _check_pair(control, target)
    if device is not None and not device.supports(control, target):
        raise LoweringError(f"{device.name} has no ECR in direction ({control},{target})")
    return [
        ecr(control, target),
        x(control),
        rz(-PI / 2, control),
        rz(-PI, target),
        sx(target),
        rz(PI, target),
    ]


def reverse_cx(control: int, target: int) -> list[Gate]:
    _check_pair(control, target)
    return [h(control), h(target), cx(target, control), h(control), h(target)]


# --- single-qubit synthesis ------------------------------------------------------


def _wrap(angle: float) -> float:
    a = math.remainder(angle, 2 * PI)
    return PI if abs(a + PI) < ANGLE_EPS else a


def _is_zero_angle(angle: float) -> bool:
    return abs(math.remainder(angle, 2 * PI)) < ANGLE_EPS


def zyz_angles(u: np.ndarray) -> tuple[float, float, float]:
    """(theta, phi, lam) with u proportional to RZ(phi) RY(theta) RZ(lam)."""
    det = np.linalg.det(u)
    v = u / cmath.sqrt(det)
    theta = 2 * math.atan2(abs(v[1, 0]), abs(v[0, 0]))
    if abs(v[1, 0]) < ANGLE_EPS:
        # gimbal lock at theta = 0: only phi + lam matters
        total = 2 * cmath.phase(v[1, 1])
        return 0.0, total, 0.0
    if abs(v[0, 0]) < ANGLE_EPS:
        diff = 2 * cmath.phase(v[1, 0])
        return PI, diff, 0.0
    s = 2 * cmath.phase(v[1, 1])
    d = 2 * cmath.phase(v[1, 0])
    return theta, (s + d) / 2, (s - d) / 2


def synthesize_1q(u: np.ndarray, q: int) -> list[Gate]:
    """Shortest RZ/SX/X sequence for ``u`` in canonical ZSX form, zero RZs elided."""
    theta, phi, lam = zyz_angles(u)
    if abs(theta) < ANGLE_EPS:
        seq = [rz(phi + lam, q)]
    elif abs(theta - PI) < ANGLE_EPS:
        seq = [rz(lam - PI / 2, q), x(q), rz(phi + PI / 2, q)]
    elif abs(theta - PI / 2) < ANGLE_EPS:
        seq = [rz(lam - PI / 2, q), sx(q), rz(phi + PI / 2, q)]
    else:
        seq = [rz(lam, q), sx(q), rz(theta + PI, q), sx(q), rz(phi + PI, q)]
    out = []
    for g in seq:
        if g.kind is GateKind.RZ:
            if _is_zero_angle(g.angle):
                continue
            g = rz(_wrap(g.angle), q)
        out.append(g)
    return out


# --- lowering --------------------------------------------------------------------


def _cx_on_device(c: int, t: int, device: DeviceModel) -> list[Gate]:
    if device.native_2q is GateKind.CX:
        if device.supports(c, t):
            return [cx(c, t)]
        return _lower_all(reverse_cx(c, t), device, DecompositionStyle.CX_IMPL)
    if device.supports(c, t):
        return cx_as_ecr(c, t, device)
    rev = reverse_cx(c, t)
    out: list[Gate] = []
    for g in rev:
        if g.kind is GateKind.CX:
            out.extend(cx_as_ecr(g.qubits[0], g.qubits[1], device))
        else:
            out.extend(_lower_gate(g, device, DecompositionStyle.CX_IMPL))
    return out


def _oriented(a: int, b: int, device: DeviceModel) -> tuple[int, int]:
    """Native (control, target) orientation for a symmetric interaction on {a, b}."""
    lo, hi = min(a, b), max(a, b)
    return (lo, hi) if device.supports(lo, hi) else (hi, lo)


def _lower_gate(g: Gate, device: DeviceModel, style: DecompositionStyle) -> list[Gate]:
    k = g.kind
    q = g.qubits
    if len(q) == 2:
        a, b = q
        if abs(a - b) != 1 or max(a, b) >= device.chain_length:
            raise LoweringError(f"{g} acts on non-adjacent chain pair; route first")
    if k in (GateKind.RZ, GateKind.SX, GateKind.X, GateKind.ID, GateKind.DELAY, GateKind.MEASURE):
        return [g]
    if k is GateKind.H:
        return [rz(PI / 2, q[0]), sx(q[0]), rz(PI / 2, q[0])]
    if k is GateKind.Y:
        return [rz(-PI / 2, q[0]), x(q[0]), rz(PI / 2, q[0])]
    if k is GateKind.RX:
        theta = math.remainder(g.angle, 4 * PI)
        if _is_zero_angle(theta):
            return []
        if abs(theta - PI / 2) < ANGLE_EPS:
            return [sx(q[0])]
        if abs(abs(theta) - PI) < ANGLE_EPS:
            return [x(q[0])]
        return synthesize_1q(gate_matrix(g), q[0])
    if k is GateKind.CX:
        return _cx_on_device(q[0], q[1], device)
    if k is GateKind.CZ:
        c, t = _oriented(q[0], q[1], device)
        return _lower_all([h(t), cx(c, t), h(t)], device, style)
    if k is GateKind.RZZ:
        c, t = _oriented(q[0], q[1], device)
        if DecompositionStyle(style) is DecompositionStyle.CX_IMPL:
            block = rzz_as_cx(g.angle, c, t)
        else:
            block = rzz_as_cz(g.angle, c, t)
        return _lower_all(block, device, style)
    if k is GateKind.ECR:
        c, t = q
        if device.native_2q is GateKind.ECR and device.supports(c, t):
            return [g]
        # ECR = (X x I) RZX(pi/2), RZX(pi/2) = (I x H) RZZ(pi/2) (I x H)
        return _lower_all([h(t), rzz(PI / 2, c, t), h(t), x(c)], device, style)
    raise LoweringError(f"cannot lower {k.value}")


def _lower_all(gates: Iterable[Gate], device: DeviceModel, style: DecompositionStyle) -> list[Gate]:
    out: list[Gate] = []
    for g in gates:
        out.extend(_lower_gate(g, device, style))
    return out


def lower_to_basis(
    circuit: Circuit,
    device: DeviceModel,
    style: DecompositionStyle = DecompositionStyle.CX_IMPL,
) -> Circuit:
    if circuit.num_qubits > device.chain_length:
        raise LoweringError(
            f"{circuit.num_qubits} qubits do not fit the {device.chain_length}-qubit chain"
        )
    return circuit.replace_gates(_lower_all(circuit.gates, device, style))


# --- optimization ----------------------------------------------------------------

SELF_INVERSE = frozenset(
    {GateKind.X, GateKind.Y, GateKind.H, GateKind.CX, GateKind.CZ, GateKind.ECR}
)
PULSES = frozenset({GateKind.X, GateKind.SX, GateKind.Y, GateKind.H, GateKind.RX})
SINGLE_QUBIT_UNITARY = frozenset({GateKind.RZ, GateKind.SX, GateKind.X, GateKind.ID})


def _cancel_and_merge(gates: Sequence[Gate]) -> list[Gate]:
    out: list[Gate | None] = []
    stacks: dict[int, list[int]] = {}

    def top(qubit: int) -> int | None:
        s = stacks.get(qubit)
        return s[-1] if s else None

    for g in gates:
        if g.kind is GateKind.ID:
            continue
        if g.kind is GateKind.RZ and _is_zero_angle(g.angle):
            continue
        tops = {top(q) for q in g.qubits}
        j = tops.pop() if len(tops) == 1 else None
        prev = out[j] if j is not None else None
        if prev is not None and prev.qubits == g.qubits:
            if g.kind is prev.kind and g.kind in SELF_INVERSE:
                out[j] = None
                for q in g.qubits:
                    stacks[q].pop()
                continue
            if g.kind is prev.kind is GateKind.RZ:
                merged = prev.angle + g.angle
                if _is_zero_angle(merged):
                    out[j] = None
                    stacks[g.qubits[0]].pop()
                else:
                    out[j] = rz(_wrap(merged), g.qubits[0])
                continue
        out.append(g)
        for q in g.qubits:
            stacks.setdefault(q, []).append(len(out) - 1)
    return [g for g in out if g is not None]


def _commute_rz_through_cx(gates: Sequence[Gate]) -> list[Gate]:
    """Float RZ on a CX control line past the CX, toward the circuit end."""
    out: list[Gate] = []
    floating: dict[int, float] = {}

    def flush(q: int) -> None:
        angle = floating.pop(q, None)
        if angle is not None and not _is_zero_angle(angle):
            out.append(rz(_wrap(angle), q))

    for g in gates:
        if g.kind is GateKind.RZ:
            q = g.qubits[0]
            floating[q] = floating.get(q, 0.0) + g.angle
            continue
        if g.kind is GateKind.CX:
            flush(g.qubits[1])
        else:
            for q in g.qubits:
                flush(q)
        out.append(g)
    for q in sorted(floating):
        flush(q)
    return out


def _resynthesize_runs(gates: Sequence[Gate]) -> list[Gate]:
    gates = list(gates)
    runs: list[list[int]] = []
    current: dict[int, list[int]] = {}
    for i, g in enumerate(gates):
        if g.kind in SINGLE_QUBIT_UNITARY:
            current.setdefault(g.qubits[0], []).append(i)
            continue
        for q in g.qubits:
            run = current.pop(q, None)
            if run:
                runs.append(run)
    runs.extend(r for r in current.values() if r)

    replacement: dict[int, list[Gate]] = {}
    dropped: set[int] = set()
    for run in runs:
        if len(run) < 2:
            continue
        q = gates[run[0]].qubits[0]
        u = np.eye(2, dtype=complex)
        for i in run:
            u = gate_matrix(gates[i]) @ u
        new = synthesize_1q(u, q)
        old_key = (len(run), sum(gates[i].kind in PULSES for i in run))
        new_key = (len(new), sum(g.kind in PULSES for g in new))
        if new_key < old_key:
            dropped.update(run)
            replacement[run[-1]] = new
    if not dropped:
        return gates
    out: list[Gate] = []
    for i, g in enumerate(gates):
        if i in replacement:
            out.extend(replacement[i])
        elif i not in dropped:
            out.append(g)
    return out


def optimize(circuit: Circuit, preset: OptPreset = OptPreset.OPT3, max_rounds: int = 100) -> Circuit:
    preset = OptPreset(preset)
    gates = list(circuit.gates)
    for _ in range(max_rounds):
        new = _cancel_and_merge(gates)
        if preset is OptPreset.OPT3:
            new = _commute_rz_through_cx(new)
            new = _resynthesize_runs(new)
            new = _cancel_and_merge(new)
        if new == gates:
            break
        gates = new
    return circuit.replace_gates(gates)


def transpile(
    circuit: Circuit,
    device: DeviceModel,
    style: DecompositionStyle = DecompositionStyle.CX_IMPL,
    preset: OptPreset = OptPreset.OPT3,
) -> Circuit:
    return optimize(lower_to_basis(circuit, device, style), preset)
