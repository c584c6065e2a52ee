"""Ideal statevector sampling and schedule-driven noisy simulation.

The noisy engine is a density matrix batched over quasi-static detuning
samples. Each qubit keeps a pending single-qubit superoperator (idle
channels and single-qubit gates compose into it); the density matrix is
only touched when a two-qubit gate arrives or the run ends. Operations on
distinct qubits commute, so this is exact.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .circuit import Circuit, Gate, GateKind, I2, X_MAT, Y_MAT, Z_MAT, apply_matrix, gate_matrix
from .device import DeviceModel, VIRTUAL
from .metrics import circuit_fidelity
from .qaoa import CostSpec, approximation_ratio, expectation, success_probability, unpermute_probabilities
from .schedule import Schedule, TimedInstruction

MAX_IDEAL_QUBITS = 12
MAX_DENSITY_QUBITS = 10


class SimulationError(ValueError):
    pass


class Channel(str, enum.Enum):
    AD = "AD"
    PD = "PD"
    DEPOL1 = "DEPOL1"
    DEPOL2 = "DEPOL2"


@dataclass(frozen=True)
class NoiseConfig:
    enable_t1t2: bool = True
    enable_detuning: bool = True
    detuning_samples: int = 16
    enable_gate_error: bool = True
    enable_readout: bool = True
    rng_seed: int = 0
    # fixed per-qubit detuning (rad/dt) used instead of random draws
    static_detuning: tuple[float, ...] | None = None
    # statevector trajectories per detuning sample, used above MAX_DENSITY_QUBITS
    trajectories: int = 8

    def __post_init__(self):
        if self.enable_detuning and self.detuning_samples < 1:
            raise ValueError("detuning_samples must be >= 1 when detuning is enabled")
        if self.trajectories < 1:
            raise ValueError("trajectories must be >= 1")

    @classmethod
    def ideal(cls) -> "NoiseConfig":
        return cls(False, False, 1, False, False)

    def to_dict(self) -> dict:
        return {
            "enable_t1t2": self.enable_t1t2,
            "enable_detuning": self.enable_detuning,
            "detuning_samples": self.detuning_samples,
            "enable_gate_error": self.enable_gate_error,
            "enable_readout": self.enable_readout,
            "rng_seed": self.rng_seed,
            "static_detuning": None if self.static_detuning is None else list(self.static_detuning),
            "trajectories": self.trajectories,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "NoiseConfig":
        d = dict(d)
        if d.get("static_detuning") is not None:
            d["static_detuning"] = tuple(float(v) for v in d["static_detuning"])
        return cls(**d)


@dataclass
class RunResult:
    counts: dict[str, int]
    shots: int
    tau_dt: int
    fq: float
    F: float | None = None
    r: float | None = None
    sp: float | None = None
    engine: str = "density_matrix"
    probabilities: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if sum(self.counts.values()) != self.shots:
            raise SimulationError("counts do not sum to shots")
        if self.sp is not None and not 0 <= self.sp <= 1:
            raise SimulationError("success probability outside [0, 1]")


# --- channels -----------------------------------------------------------------------


def kraus_channels(kind: Channel | str, p: float) -> list[np.ndarray]:
    kind = Channel(kind)
    if not 0 <= p <= 1:
        raise ValueError(f"channel parameter {p} outside [0, 1]")
    if kind is Channel.AD:
        return [np.diag([1, math.sqrt(1 - p)]).astype(complex),
                np.array([[0, math.sqrt(p)], [0, 0]], dtype=complex)]
    if kind is Channel.PD:
        return [np.diag([1, math.sqrt(1 - p)]).astype(complex),
                np.diag([0, math.sqrt(p)]).astype(complex)]
    paulis = [I2, X_MAT, Y_MAT, Z_MAT]
    if kind is Channel.DEPOL2:
        paulis = [np.kron(a, b) for a in paulis for b in paulis]
    d2 = len(paulis)
    # (1-p) rho + p I/d  ==  (1 - p + p/d^2) rho + p/d^2 sum_{P != I} P rho P
    weights = [1 - p + p / d2] + [p / d2] * (d2 - 1)
    return [math.sqrt(w) * P for w, P in zip(weights, paulis)]


def depolarizing_strength(fidelity: float, dim: int) -> float:
    """Depolarizing p whose average gate fidelity is ``fidelity``: F = 1 - p(d-1)/d."""
    return min(1.0, max(0.0, (1 - fidelity) * dim / (dim - 1)))


def superop_from_kraus(kraus: Sequence[np.ndarray]) -> np.ndarray:
    return sum(np.kron(k, k.conj()) for k in kraus)


def _unitary_superop(u: np.ndarray) -> np.ndarray:
    return np.kron(u, u.conj())


def _depol_superop(p: float, dim: int) -> np.ndarray:
    vec_i = np.eye(dim).reshape(-1)
    return (1 - p) * np.eye(dim * dim) + (p / dim) * np.outer(vec_i, vec_i)


def _tensor_superops(sa: np.ndarray, sb: np.ndarray) -> np.ndarray:
    """Batched 2-qubit superop from single-qubit ones, (row a, row b, col a, col b) order."""
    a = sa.reshape(sa.shape[0], 2, 2, 2, 2)
    b = sb.reshape(sb.shape[0], 2, 2, 2, 2)
    t = np.einsum("xijkl,xmnop->ximjnkolp", *np.broadcast_arrays(a, b))
    return t.reshape(t.shape[0], 16, 16)


# --- ideal ------------------------------------------------------------------------


def statevector(circuit: Circuit) -> np.ndarray:
    n = circuit.num_qubits
    if n > MAX_IDEAL_QUBITS:
        raise SimulationError(f"ideal simulation limited to {MAX_IDEAL_QUBITS} qubits")
    psi = np.zeros((2,) * n, dtype=complex)
    psi[(0,) * n] = 1
    for g in circuit.gates:
        if g.kind in (GateKind.MEASURE, GateKind.DELAY, GateKind.ID):
            continue
        psi = apply_matrix(psi, gate_matrix(g), g.qubits)
    return psi.reshape(-1)


def ideal_probabilities(circuit: Circuit) -> np.ndarray:
    """Outcome distribution indexed by logical bitstring."""
    probs = np.abs(statevector(circuit)) ** 2
    return unpermute_probabilities(probs, circuit.layout)


def sample_counts(probs: np.ndarray, shots: int, seed: int | np.random.Generator, n: int) -> dict[str, int]:
    """Inverse-CDF sampling.

    Two distributions sampled with the same seed share their uniforms, so
    paired arms (with and without DD) differ only where their CDFs differ.
    """
    rng = np.random.default_rng(seed)
    p = np.clip(np.real(probs), 0, None)
    cdf = np.cumsum(p / p.sum())
    cdf[-1] = 1.0
    outcomes = np.searchsorted(cdf, rng.random(shots), side="right")
    draws = np.bincount(outcomes, minlength=len(p))
    return {format(int(i), f"0{n}b"): int(draws[i]) for i in np.flatnonzero(draws)}


def simulate_ideal(circuit: Circuit, shots: int, seed: int = 0) -> dict[str, int]:
    return sample_counts(ideal_probabilities(circuit), shots, seed, circuit.num_qubits)


# --- noisy ------------------------------------------------------------------------


def _apply_superop(rho: np.ndarray, sop: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """rho has shape (S, 2^n rows as n axes, 2^n cols as n axes)."""
    k = len(qubits)
    rows = [1 + q for q in qubits]
    cols = [1 + n + q for q in qubits]
    src = rows + cols
    dst = list(range(rho.ndim - 2 * k, rho.ndim))
    moved = np.moveaxis(rho, src, dst)
    shape = moved.shape
    flat = moved.reshape(shape[0], -1, 4**k)
    out = flat @ np.swapaxes(sop, -1, -2)
    return np.moveaxis(out.reshape(shape), dst, src)


class _NoisyRun:
    """Single pass over a schedule with per-qubit pending superoperators."""

    def __init__(self, schedule: Schedule, device: DeviceModel, noise: NoiseConfig,
                 detunings: np.ndarray, observer: Callable | None):
        self.schedule = schedule
        self.device = device
        self.noise = noise
        self.n = schedule.num_qubits
        self.detunings = detunings  # (S, n) rad per dt
        self.batch = detunings.shape[0]
        self.observer = observer
        self.clock = [0] * self.n
        self.pending: list[np.ndarray | None] = [None] * self.n

    def idle_superop(self, q: int, span: int) -> np.ndarray | None:
        if span <= 0:
            return None
        dev, noise = self.device, self.noise
        ops = []
        if noise.enable_detuning:
            theta = self.detunings[:, q] * span
            diag = np.stack([np.ones_like(theta), np.exp(-1j * theta), np.exp(1j * theta),
                             np.ones_like(theta)], axis=-1).astype(complex)
            ops.append(np.einsum("si,ij->sij", diag, np.eye(4)))
        if noise.enable_t1t2:
            tau_ns = span * dev.dt_ns
            t1, t2 = dev.t1_ns[q], dev.t2_ns[q]
            p_ad = 1 - math.exp(-tau_ns / t1)
            p_pd = 1 - math.exp(-2 * tau_ns * (1 / t2 - 1 / (2 * t1)))
            p_pd = min(1.0, max(0.0, p_pd))
            ops.append(superop_from_kraus(kraus_channels(Channel.AD, p_ad))[None])
            ops.append(superop_from_kraus(kraus_channels(Channel.PD, p_pd))[None])
        if not ops:
            return None
        total = ops[0]
        for op in ops[1:]:
            total = op @ total
        return total

    def gate_superop(self, g: Gate) -> np.ndarray:
        sop = _unitary_superop(gate_matrix(g))
        if self.noise.enable_gate_error and g.kind not in VIRTUAL:
            if len(g.qubits) == 1:
                p = depolarizing_strength(self.device.f_1q[g.qubits[0]], 2)
                sop = _depol_superop(p, 2) @ sop
            else:
                p = depolarizing_strength(self.device.pair_fidelity(*g.qubits), 4)
                sop = _depol_superop(p, 4) @ sop
        return sop[None]

    def push(self, q: int, sop: np.ndarray | None) -> None:
        if sop is None:
            return
        cur = self.pending[q]
        self.pending[q] = sop if cur is None else sop @ cur

    def advance(self, q: int, t: int) -> None:
        self.push(q, self.idle_superop(q, t - self.clock[q]))
        self.clock[q] = max(self.clock[q], t)

    def flush(self, rho: np.ndarray, q: int) -> np.ndarray:
        sop = self.pending[q]
        self.pending[q] = None
        if sop is None:
            return rho
        return _apply_superop(rho, sop, [q], self.n)

    def run(self) -> np.ndarray:
        n = self.n
        rho = np.zeros((self.batch,) + (2,) * (2 * n), dtype=complex)
        rho[(slice(None),) + (0,) * (2 * n)] = 1
        eager = self.observer is not None
        for ins in self.schedule.time_ordered():
            g = ins.gate
            if g.kind is GateKind.DELAY:
                # idle time is charged when the next real instruction arrives
                if eager:
                    self.advance(g.qubits[0], ins.stop_dt)
                    rho = self.flush(rho, g.qubits[0])
                    self.observer(rho, ins)
                continue
            for q in g.qubits:
                self.advance(q, ins.start_dt)
            if g.kind is GateKind.MEASURE:
                if eager:
                    rho = self.flush(rho, g.qubits[0])
                    self.observer(rho, ins)
                continue
            sop = self.gate_superop(g)
            if len(g.qubits) == 1:
                self.push(g.qubits[0], sop)
                if eager:
                    rho = self.flush(rho, g.qubits[0])
            else:
                a, b = g.qubits
                pa = self.pending[a] if self.pending[a] is not None else np.eye(4)[None]
                pb = self.pending[b] if self.pending[b] is not None else np.eye(4)[None]
                self.pending[a] = self.pending[b] = None
                total = sop @ _tensor_superops(pa, pb)
                rho = _apply_superop(rho, total, [a, b], n)
            for q in g.qubits:
                self.clock[q] = ins.stop_dt
            if eager:
                self.observer(rho, ins)
        for q in range(n):
            stop = self._measure_start(q)
            self.advance(q, stop)
            rho = self.flush(rho, q)
        return rho

    def _measure_start(self, q: int) -> int:
        for ins in self.schedule.instructions:
            if ins.gate.kind is GateKind.MEASURE and ins.qubits[0] == q:
                return ins.start_dt
        return self.schedule.total_dt


def _draw_detunings(device: DeviceModel, noise: NoiseConfig, n: int) -> np.ndarray:
    if not noise.enable_detuning:
        return np.zeros((1, n))
    if noise.static_detuning is not None:
        det = np.asarray(noise.static_detuning, dtype=float)
        if det.shape != (n,):
            raise SimulationError(f"static_detuning needs {n} entries")
        return det[None, :]
    rng = np.random.default_rng(noise.rng_seed)
    return rng.normal(0.0, device.detuning_sigma, size=(noise.detuning_samples, n))


def apply_readout_flips(probs: np.ndarray, flips: Sequence[float]) -> np.ndarray:
    n = len(flips)
    t = probs.reshape((2,) * n)
    for q, f in enumerate(flips):
        if f == 0:
            continue
        m = np.array([[1 - f, f], [f, 1 - f]])
        t = np.moveaxis(np.tensordot(m, t, axes=([1], [q])), 0, q)
    return t.reshape(-1)


def noisy_probabilities(
    schedule: Schedule,
    device: DeviceModel,
    noise: NoiseConfig,
    observer: Callable[[np.ndarray, TimedInstruction], None] | None = None,
) -> tuple[np.ndarray, str]:
    """Logical-order outcome distribution and the engine that produced it."""
    n = schedule.num_qubits
    if schedule.device_name != device.name:
        raise SimulationError(f"schedule built for {schedule.device_name}, not {device.name}")
    if n > device.chain_length:
        raise SimulationError("schedule does not fit the device")
    if n > MAX_IDEAL_QUBITS:
        raise SimulationError(f"noisy simulation limited to {MAX_IDEAL_QUBITS} qubits")
    detunings = _draw_detunings(device, noise, n)
    if n <= MAX_DENSITY_QUBITS:
        rho = _NoisyRun(schedule, device, noise, detunings, observer).run()
        dim = 2**n
        diag = np.real(np.diagonal(rho.reshape(rho.shape[0], dim, dim), axis1=1, axis2=2))
        probs = diag.mean(axis=0)
        engine = "density_matrix"
    else:
        probs = _trajectory_probabilities(schedule, device, noise, detunings)
        engine = "trajectory"
    probs = np.clip(probs, 0, None)
    probs = probs / probs.sum()
    if noise.enable_readout:
        probs = apply_readout_flips(probs, device.readout_flip[:n])
    return unpermute_probabilities(probs, schedule.layout), engine


def simulate_noisy(
    schedule: Schedule,
    device: DeviceModel,
    noise: NoiseConfig,
    shots: int,
    seed: int = 0,
    spec: CostSpec | None = None,
    observer: Callable[[np.ndarray, TimedInstruction], None] | None = None,
) -> RunResult:
    probs, engine = noisy_probabilities(schedule, device, noise, observer)
    counts = sample_counts(probs, shots, seed, schedule.num_qubits)
    fq = circuit_fidelity(schedule.to_circuit(), device)
    result = RunResult(counts, shots, schedule.total_dt, fq, engine=engine, probabilities=probs)
    if spec is not None:
        result.F = expectation(counts, spec)
        result.r = approximation_ratio(result.F, spec.f0, spec.fmax)
        result.sp = success_probability(counts, spec)
    return result


# --- trajectory fallback for 11-12 qubits ------------------------------------------


def _trajectory_probabilities(schedule: Schedule, device: DeviceModel, noise: NoiseConfig,
                              detunings: np.ndarray) -> np.ndarray:
    n = schedule.num_qubits
    rng = np.random.default_rng([noise.rng_seed, 1])
    acc = np.zeros(2**n)
    ordered = schedule.time_ordered()
    paulis1 = [I2, X_MAT, Y_MAT, Z_MAT]
    paulis2 = [np.kron(a, b) for a in paulis1 for b in paulis1]

    def sample_kraus(psi, kraus, q):
        branches = [apply_matrix(psi, k, [q]) for k in kraus]
        weights = np.array([np.vdot(b, b).real for b in branches])
        i = rng.choice(len(branches), p=weights / weights.sum())
        return branches[i] / math.sqrt(weights[i])

    def idle(psi, q, span, delta):
        if span <= 0:
            return psi
        if noise.enable_detuning:
            th = delta[q] * span
            psi = apply_matrix(psi, np.diag([np.exp(-0.5j * th), np.exp(0.5j * th)]), [q])
        if noise.enable_t1t2:
            tau_ns = span * device.dt_ns
            t1, t2 = device.t1_ns[q], device.t2_ns[q]
            p_ad = 1 - math.exp(-tau_ns / t1)
            p_pd = min(1.0, max(0.0, 1 - math.exp(-2 * tau_ns * (1 / t2 - 1 / (2 * t1)))))
            psi = sample_kraus(psi, kraus_channels(Channel.AD, p_ad), q)
            psi = sample_kraus(psi, kraus_channels(Channel.PD, p_pd), q)
        return psi

    for delta in detunings:
        for _ in range(noise.trajectories):
            psi = np.zeros((2,) * n, dtype=complex)
            psi[(0,) * n] = 1
            clock = [0] * n
            for ins in ordered:
                g = ins.gate
                if g.kind is GateKind.DELAY:
                    continue
                for q in g.qubits:
                    psi = idle(psi, q, ins.start_dt - clock[q], delta)
                    clock[q] = ins.start_dt
                if g.kind is GateKind.MEASURE:
                    continue
                psi = apply_matrix(psi, gate_matrix(g), g.qubits)
                if noise.enable_gate_error and g.kind not in VIRTUAL:
                    if len(g.qubits) == 1:
                        p = depolarizing_strength(device.f_1q[g.qubits[0]], 2)
                        if rng.random() < p:
                            psi = apply_matrix(psi, paulis1[rng.integers(4)], g.qubits)
                    else:
                        p = depolarizing_strength(device.pair_fidelity(*g.qubits), 4)
                        if rng.random() < p:
                            psi = apply_matrix(psi, paulis2[rng.integers(16)], g.qubits)
                for q in g.qubits:
                    clock[q] = ins.stop_dt
            acc += np.abs(psi.reshape(-1)) ** 2
    return acc / (len(detunings) * noise.trajectories)
