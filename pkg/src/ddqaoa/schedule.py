"""ALAP scheduling, idle-window extraction and CPMG/XY4 padding."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable

from .circuit import Circuit, Gate, GateKind, delay, rz, x
from .device import DeviceModel, gate_duration


class ScheduleError(ValueError):
    pass


class DDSequence(str, enum.Enum):
    CPMG = "CPMG"
    XY4 = "XY4"


# delay fractions of the free time t (idle span minus pulse time) and the pulse train
DD_DELAY_FRACTIONS = {
    DDSequence.CPMG: ((1, 4), (1, 2), (1, 4)),
    DDSequence.XY4: ((1, 8), (1, 4), (1, 4), (1, 4), (1, 8)),
}
DD_PULSES = {
    DDSequence.CPMG: (GateKind.X, GateKind.X),
    DDSequence.XY4: (GateKind.X, GateKind.Y, GateKind.X, GateKind.Y),
}


@dataclass(frozen=True)
class TimedInstruction:
    gate: Gate
    start_dt: int
    duration_dt: int

    def __post_init__(self):
        if self.start_dt < 0:
            raise ScheduleError(f"negative start time for {self.gate}")

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.gate.qubits

    @property
    def stop_dt(self) -> int:
        return self.start_dt + self.duration_dt


@dataclass(frozen=True)
class IdleWindow:
    qubit: int
    start_dt: int
    span_dt: int


@dataclass(frozen=True)
class Schedule:
    """Timed instructions in a valid execution order (per-qubit chronological)."""

    num_qubits: int
    instructions: tuple[TimedInstruction, ...]
    total_dt: int
    device_name: str
    layout: tuple[int, ...] | None = None

    def to_circuit(self) -> Circuit:
        return Circuit(self.num_qubits, tuple(i.gate for i in self.instructions),
                       label=self.device_name, layout=self.layout)

    def time_ordered(self) -> list[TimedInstruction]:
        order = sorted(range(len(self.instructions)),
                       key=lambda i: (self.instructions[i].start_dt, i))
        return [self.instructions[i] for i in order]

    def check(self) -> None:
        """Raise ScheduleError if any structural invariant is broken."""
        last_stop: dict[int, int] = {}
        for ins in self.instructions:
            for q in ins.qubits:
                if ins.start_dt < last_stop.get(q, 0):
                    raise ScheduleError(f"overlap or reordering on qubit {q} at {ins.gate}")
                last_stop[q] = ins.stop_dt
        expected = max((i.stop_dt for i in self.instructions), default=0)
        if expected != self.total_dt:
            raise ScheduleError(f"total_dt {self.total_dt} != latest stop {expected}")


def _check_native(g: Gate, device: DeviceModel, n: int) -> None:
    if g.kind not in device.native_kinds and g.kind not in (GateKind.DELAY, GateKind.MEASURE):
        raise ScheduleError(f"{g.kind.value} is not native to {device.name}")
    if len(g.qubits) == 2:
        a, b = g.qubits
        if abs(a - b) != 1:
            raise ScheduleError(f"{g} is not on an adjacent chain pair")
    if n > device.chain_length:
        raise ScheduleError(f"{n} qubits exceed chain length {device.chain_length}")


def alap_schedule(circuit: Circuit, device: DeviceModel) -> Schedule:
    """Latest start times via an as-soon-as-possible sweep over the reversed circuit."""
    n = circuit.num_qubits
    durations = []
    for g in circuit.gates:
        _check_native(g, device, n)
        durations.append(gate_duration(device, g))
    free_rev = [0] * n
    start_rev = [0] * len(circuit.gates)
    for i in range(len(circuit.gates) - 1, -1, -1):
        g = circuit.gates[i]
        s = max(free_rev[q] for q in g.qubits)
        start_rev[i] = s
        for q in g.qubits:
            free_rev[q] = s + durations[i]
    total = max(free_rev, default=0)
    instructions = tuple(
        TimedInstruction(g, total - start_rev[i] - durations[i], durations[i])
        for i, g in enumerate(circuit.gates)
    )
    return Schedule(n, instructions, total, device.name, circuit.layout)


def idle_windows(schedule: Schedule) -> list[IdleWindow]:
    """Gaps between consecutive non-DELAY instructions on each qubit.

    Time covered by explicit DELAYs counts as idle. Idling before a qubit's
    first instruction and after its last is not a window.
    """
    return [w for w, _ in _windows_with_successor(schedule)]


def _windows_with_successor(schedule: Schedule) -> list[tuple[IdleWindow, int]]:
    prev_stop: dict[int, int] = {}
    found = []
    for idx, ins in enumerate(schedule.instructions):
        if ins.gate.kind is GateKind.DELAY:
            continue
        for q in ins.qubits:
            if q in prev_stop and ins.start_dt > prev_stop[q]:
                found.append((IdleWindow(q, prev_stop[q], ins.start_dt - prev_stop[q]), idx))
            prev_stop[q] = ins.stop_dt
    return found


def dd_train(
    window: IdleWindow, seq: DDSequence, pulse_dt: int
) -> list[TimedInstruction] | None:
    """Instructions tiling ``window`` with the sequence, or None if it does not fit."""
    seq = DDSequence(seq)
    pulses = DD_PULSES[seq]
    free = window.span_dt - len(pulses) * pulse_dt
    if free < 0:
        return None
    fractions = DD_DELAY_FRACTIONS[seq]
    delays = [free * num // den for num, den in fractions]
    delays[-1] += free - sum(delays)
    q = window.qubit
    t = window.start_dt
    out: list[TimedInstruction] = []

    def add_delay(span: int) -> None:
        nonlocal t
        if span > 0:
            out.append(TimedInstruction(delay(span, q), t, span))
            t += span

    add_delay(delays[0])
    for kind, span in zip(pulses, delays[1:]):
        if kind is GateKind.Y:
            # Y = RZ(pi/2) X RZ(-pi/2) as a matrix product; the RZs are virtual
            out.append(TimedInstruction(rz(-math.pi / 2, q), t, 0))
            out.append(TimedInstruction(x(q), t, pulse_dt))
            out.append(TimedInstruction(rz(math.pi / 2, q), t + pulse_dt, 0))
        else:
            out.append(TimedInstruction(x(q), t, pulse_dt))
        t += pulse_dt
        add_delay(span)
    assert t == window.start_dt + window.span_dt
    return out


def insert_dd(schedule: Schedule, seq: DDSequence, device: DeviceModel) -> Schedule:
    inserts: dict[int, list[TimedInstruction]] = {}
    removed: set[int] = set()
    padded: list[IdleWindow] = []
    for window, successor in _windows_with_successor(schedule):
        train = dd_train(window, seq, device.single_pulse_dt)
        if train is None:
            continue
        inserts.setdefault(successor, []).extend(train)
        padded.append(window)
    if not padded:
        return schedule
    for idx, ins in enumerate(schedule.instructions):
        if ins.gate.kind is not GateKind.DELAY:
            continue
        q = ins.qubits[0]
        for w in padded:
            if w.qubit == q and w.start_dt <= ins.start_dt and ins.stop_dt <= w.start_dt + w.span_dt:
                removed.add(idx)
                break
    out: list[TimedInstruction] = []
    for idx, ins in enumerate(schedule.instructions):
        out.extend(inserts.get(idx, ()))
        if idx not in removed:
            out.append(ins)
    return Schedule(schedule.num_qubits, tuple(out), schedule.total_dt, schedule.device_name, schedule.layout)


def dumps(schedule: Schedule) -> str:
    """``start_dt KIND q0[,q1] [angle|span]`` lines sorted by (start, qubit)."""
    order = sorted(
        range(len(schedule.instructions)),
        key=lambda i: (schedule.instructions[i].start_dt, schedule.instructions[i].qubits[0], i),
    )
    lines = []
    for i in order:
        ins = schedule.instructions[i]
        g = ins.gate
        line = f"{ins.start_dt} {g.kind.value} {','.join(map(str, g.qubits))}"
        if g.angle is not None:
            line += f" {g.angle!r}"
        elif g.delay_span is not None:
            line += f" {g.delay_span}"
        lines.append(line)
    return "\n".join(lines) + "\n"


def schedule_circuit(circuit: Circuit, device: DeviceModel, seq: DDSequence | None = None) -> Schedule:
    sched = alap_schedule(circuit, device)
    return sched if seq is None else insert_dd(sched, seq, device)


def window_tiling(instructions: Iterable[TimedInstruction]) -> int:
    """Total dt covered by a DD train (delays plus pulses)."""
    return sum(i.duration_dt for i in instructions)
