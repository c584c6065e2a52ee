"""Portfolio-optimization QAOA: cost model, circuits and the linear-chain swap network."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Mapping, Sequence

import numpy as np

from .circuit import Circuit, CircuitError, Gate, GateKind, h, measure, rx, rz, rzz
from .decompose import DecompositionStyle, rzz_as_cx, rzz_as_cz, zz_swap
from .device import DeviceModel

MAX_ENUMERATION_QUBITS = 20


@dataclass(frozen=True)
class PortfolioInstance:
    n: int
    lam: float
    q: float
    A: float
    B: int
    mu: tuple[float, ...]
    sigma: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        mu = tuple(float(m) for m in self.mu)
        sigma = tuple(tuple(float(v) for v in row) for row in self.sigma)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        s = np.array(sigma, dtype=float)
        if len(mu) != self.n or s.shape != (self.n, self.n):
            raise ValueError(f"mu/sigma do not match n={self.n}")
        if not np.allclose(s, s.T, rtol=0, atol=1e-12):
            raise ValueError("sigma is not symmetric")
        values = [self.lam, self.q, self.A, *mu, *s.ravel()]
        if not all(math.isfinite(v) for v in values):
            raise ValueError("instance contains non-finite values")
        if not 1 <= self.B <= self.n:
            raise ValueError(f"B={self.B} outside [1, {self.n}]")

    def to_dict(self) -> dict:
        return {
            "n": self.n, "lambda": self.lam, "q": self.q, "A": self.A, "B": self.B,
            "mu": list(self.mu), "sigma": [list(r) for r in self.sigma],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "PortfolioInstance":
        return cls(int(d["n"]), float(d["lambda"]), float(d["q"]), float(d["A"]), int(d["B"]),
                   tuple(d["mu"]), tuple(tuple(r) for r in d["sigma"]))


@dataclass(frozen=True)
class QAOAParams:
    gammas: tuple[float, ...]
    betas: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        if len(self.gammas) != len(self.betas) or not self.gammas:
            raise ValueError("need equal, non-zero numbers of gammas and betas")

    @property
    def depth(self) -> int:
        return len(self.gammas)


@dataclass(frozen=True)
class CostSpec:
    c: Mapping[tuple[int, int], float]
    k: tuple[float, ...]
    f0: float
    fmax: float
    optimal_bitstrings: frozenset[str] = field(default_factory=frozenset)

    @property
    def n(self) -> int:
        return len(self.k)


def random_instance(n: int, seed: int) -> PortfolioInstance:
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(n, n))
    sigma = 0.1 * (g @ g.T) / n
    sigma = (sigma + sigma.T) / 2
    mu = rng.uniform(0.0, 1.0, size=n)
    return PortfolioInstance(n, 1.0, 0.5, 1.0, math.ceil(n / 2), tuple(mu), tuple(map(tuple, sigma)))


def cost_coefficients(inst: PortfolioInstance) -> tuple[dict[tuple[int, int], float], np.ndarray]:
    n, lam, q, A, B = inst.n, inst.lam, inst.q, inst.A, inst.B
    s = np.array(inst.sigma)
    mu = np.array(inst.mu)
    c = {(i, j): lam / 2 * (q * s[i, j] + A) for i in range(n) for j in range(i + 1, n)}
    k = lam / 2 * (A * (2 * B - n) + (1 - q) * mu - q * s.sum(axis=1))
    return c, k


def _z_matrix(n: int) -> np.ndarray:
    """Row ``idx`` holds the Z eigenvalues (1 - 2*bit) of basis state ``idx``."""
    idx = np.arange(2**n)
    bits = (idx[:, None] >> np.arange(n - 1, -1, -1)[None, :]) & 1
    return 1 - 2 * bits


def cost_table(c: Mapping[tuple[int, int], float], k: Sequence[float], n: int) -> np.ndarray:
    """Cost of every basis state, indexed with qubit 0 as the most significant bit."""
    z = _z_matrix(n).astype(float)
    total = -z @ np.asarray(k, dtype=float)
    for (i, j), cij in c.items():
        total += cij * z[:, i] * z[:, j]
    return total


def cost_value(bits: str, spec: CostSpec) -> float:
    if len(bits) != spec.n:
        raise ValueError(f"bitstring {bits!r} has length {len(bits)}, expected {spec.n}")
    z = [1 - 2 * int(b) for b in bits]
    ising = sum(cij * z[i] * z[j] for (i, j), cij in spec.c.items())
    return ising - sum(ki * zi for ki, zi in zip(spec.k, z))


def exact_extrema(c: Mapping[tuple[int, int], float], k: Sequence[float], n: int) -> CostSpec:
    if n > MAX_ENUMERATION_QUBITS:
        raise ValueError(f"exhaustive enumeration limited to {MAX_ENUMERATION_QUBITS} qubits")
    values = cost_table(c, k, n)
    f0 = float(values.min())
    fmax = float(values.max())
    # ties are decided on a relative scale so float noise does not split them
    scale = max(1.0, abs(f0), abs(fmax))
    optimal = frozenset(
        format(int(i), f"0{n}b") for i in np.flatnonzero(values <= f0 + 1e-12 * scale)
    )
    return CostSpec(dict(c), tuple(float(v) for v in k), f0, fmax, optimal)


def cost_spec(inst: PortfolioInstance) -> CostSpec:
    c, k = cost_coefficients(inst)
    return exact_extrema(c, k, inst.n)


def build_qaoa(
    inst: PortfolioInstance,
    params: QAOAParams,
    style: DecompositionStyle | None = DecompositionStyle.CX_IMPL,
) -> Circuit:
    """QAOA circuit on the complete interaction graph.

    ``style=None`` keeps each ZZ term as an RZZ gate, which is the form the
    swap-network router consumes.
    """
    n = inst.n
    c, k = cost_coefficients(inst)
    gates: list[Gate] = [h(q) for q in range(n)]
    for gamma, beta in zip(params.gammas, params.betas):
        for (i, j), cij in c.items():
            theta = 2 * gamma * cij
            if style is None:
                gates.append(rzz(theta, i, j))
            elif DecompositionStyle(style) is DecompositionStyle.CX_IMPL:
                gates.extend(rzz_as_cx(theta, i, j))
            else:
                gates.extend(rzz_as_cz(theta, i, j))
        gates.extend(rz(-2 * gamma * k[q], q) for q in range(n))
        gates.extend(rx(2 * beta, q) for q in range(n))
    gates.extend(measure(q) for q in range(n))
    return Circuit(n, tuple(gates), label=f"qaoa-n{n}-p{params.depth}")


def swap_network_blocks(n: int) -> list[tuple[int, int, bool]]:
    """Brick-pattern blocks as (layer, left position, fused SWAP?).

    The last layer needs no SWAPs, so a 2-qubit network is a single RZZ.
    """
    blocks = [(layer, p) for layer in range(n) for p in range(layer % 2, n - 1, 2)]
    if not blocks:
        return []
    last = blocks[-1][0]
    return [(layer, p, layer != last) for layer, p in blocks]


def swap_network_map(
    circuit: Circuit,
    device: DeviceModel,
    style: DecompositionStyle = DecompositionStyle.CX_IMPL,
) -> Circuit:
    """Route an RZZ-form QAOA circuit onto the first ``n`` qubits of the chain.

    Every maximal run of RZZ gates is realised by one swap network covering all
    pairs. The result's ``layout[logical]`` gives the physical qubit that holds
    each logical qubit at the end, which is where it is measured.
    """
    n = circuit.num_qubits
    if n > device.chain_length:
        raise CircuitError(f"chain of {device.chain_length} too short for {n} qubits")
    style = DecompositionStyle(style)
    arr = list(range(n))  # arr[physical] = logical
    pos = list(range(n))  # pos[logical] = physical
    out: list[Gate] = []
    pending: dict[tuple[int, int], float] = {}

    def flush() -> None:
        if not pending:
            return
        for _, p, swap in swap_network_blocks(n):
            a, b = arr[p], arr[p + 1]
            theta = pending.pop((min(a, b), max(a, b)), 0.0)
            if swap:
                out.extend(zz_swap(theta, p, p + 1, style))
                arr[p], arr[p + 1] = b, a
                pos[a], pos[b] = p + 1, p
            elif theta != 0.0:
                block = rzz_as_cx if style is DecompositionStyle.CX_IMPL else rzz_as_cz
                out.extend(block(theta, p, p + 1))
        assert not pending, "swap network left interactions uncovered"

    for g in circuit.gates:
        if g.kind is GateKind.RZZ:
            key = (min(g.qubits), max(g.qubits))
            pending[key] = pending.get(key, 0.0) + g.angle
            continue
        if len(g.qubits) != 1:
            raise CircuitError(f"swap network expects RZZ-form interactions, found {g.kind.value}")
        flush()
        out.append(Gate(g.kind, (pos[g.qubits[0]],), g.angle, g.delay_span))
    flush()
    return Circuit(n, tuple(out), circuit.label, layout=tuple(pos))


def unpermute_counts(counts: Mapping[str, int], layout: Sequence[int] | None) -> dict[str, int]:
    """Re-index physical bitstrings so character ``i`` is logical qubit ``i``."""
    if layout is None:
        return dict(counts)
    out: dict[str, int] = {}
    for bits, k in counts.items():
        logical = "".join(bits[p] for p in layout)
        out[logical] = out.get(logical, 0) + k
    return out


def unpermute_probabilities(probs: np.ndarray, layout: Sequence[int] | None) -> np.ndarray:
    if layout is None:
        return probs
    n = len(layout)
    t = probs.reshape((2,) * n)
    # logical axis i lives on physical axis layout[i]
    return np.transpose(t, axes=list(layout)).reshape(-1)


def expectation(counts: Mapping[str, int], spec: CostSpec) -> float:
    total = sum(counts.values())
    if total <= 0:
        raise ValueError("empty histogram")
    return sum(k * cost_value(bits, spec) for bits, k in counts.items()) / total


def approximation_ratio(F: float, f0: float, fmax: float) -> float:
    if f0 == fmax:
        raise ValueError("degenerate cost: f0 == fmax")
    return (F - fmax) / (f0 - fmax)


def success_probability(counts: Mapping[str, int], spec: CostSpec) -> float:
    total = sum(counts.values())
    if total <= 0:
        raise ValueError("empty histogram")
    return sum(k for bits, k in counts.items() if bits in spec.optimal_bitstrings) / total


# --- parameter search ------------------------------------------------------------


def _apply_mixer(psi: np.ndarray, beta: float, n: int) -> np.ndarray:
    c, s = math.cos(beta), -1j * math.sin(beta)
    t = psi.reshape((2,) * n)
    for q in range(n):
        a = np.take(t, 0, axis=q)
        b = np.take(t, 1, axis=q)
        t = np.stack([c * a + s * b, s * a + c * b], axis=q)
    return t.reshape(-1)


def qaoa_state(energies: np.ndarray, params: QAOAParams, n: int) -> np.ndarray:
    psi = np.full(2**n, 2 ** (-n / 2), dtype=complex)
    for gamma, beta in zip(params.gammas, params.betas):
        psi = psi * np.exp(-1j * gamma * energies)
        psi = _apply_mixer(psi, beta, n)
    return psi


def grid_search(spec: CostSpec, grid: int = 32) -> tuple[QAOAParams, float]:
    """Depth-1 grid search on the exact ideal expectation.

    gamma and beta both range over [0, pi); the (gamma, beta) -> (-gamma, -beta)
    symmetry makes negative gamma redundant. Ties go to the smallest
    (gamma, beta) in lexicographic order.
    """
    n = spec.n
    energies = cost_table(spec.c, spec.k, n)
    axis = [math.pi * i / grid for i in range(grid)]
    best: tuple[float, float, float] | None = None
    for gamma, beta in product(axis, axis):
        psi = qaoa_state(energies, QAOAParams((gamma,), (beta,)), n)
        F = float(np.dot(np.abs(psi) ** 2, energies))
        if best is None or F < best[0] - 1e-12:
            best = (F, gamma, beta)
    F, gamma, beta = best
    return QAOAParams((gamma,), (beta,)), F
