"""Performance metrics, DD-effect deltas and linear-fit statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .circuit import Circuit, GateKind
from .device import VIRTUAL, DeviceError, DeviceModel


class MetricsError(ValueError):
    pass


def circuit_fidelity(circuit: Circuit, device: DeviceModel) -> float:
    """Product of calibrated single-qubit, two-qubit and readout fidelities."""
    fq = 1.0
    try:
        for g in circuit.gates:
            if g.kind in VIRTUAL or g.kind is GateKind.DELAY:
                continue
            if g.kind is GateKind.MEASURE:
                fq *= device.f_meas[g.qubits[0]]
            elif len(g.qubits) == 2:
                fq *= device.pair_fidelity(*g.qubits)
            else:
                fq *= device.f_1q[g.qubits[0]]
    except (IndexError, DeviceError) as exc:
        raise MetricsError(f"missing calibration entry: {exc}") from exc
    return fq


def normalized_metrics(r_eps: float, p_eps: float, r0: float, p0: float) -> tuple[float, float]:
    if r0 == 0 or p0 == 0:
        raise MetricsError("noise-free baseline is zero; cannot normalize")
    return r_eps / r0, p_eps / p0


def dd_deltas(nar_b: float, nar_dd: float, nsp_b: float, nsp_dd: float) -> tuple[float, float]:
    return nar_dd - nar_b, nsp_dd - nsp_b


def emsr(deltas: Sequence[float]) -> float:
    """Percentage of trials where DD strictly improved the metric."""
    if len(deltas) == 0:
        raise MetricsError("EMSR of an empty list")
    return 100.0 * sum(1 for d in deltas if d > 0) / len(deltas)


@dataclass(frozen=True)
class MetricsRecord:
    nar_b: float
    nar_dd: float
    nsp_b: float
    nsp_dd: float
    delta_nar: float
    delta_nsp: float
    fq: float
    log_tau: float
    n_qubits: int
    labels: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if abs(self.delta_nar - (self.nar_dd - self.nar_b)) > 1e-12:
            raise MetricsError("delta_nar inconsistent with nar_dd - nar_b")
        if not (math.isnan(self.delta_nsp) and math.isnan(self.nsp_dd - self.nsp_b)):
            if abs(self.delta_nsp - (self.nsp_dd - self.nsp_b)) > 1e-12:
                raise MetricsError("delta_nsp inconsistent with nsp_dd - nsp_b")

    @classmethod
    def build(cls, r_b: float, p_b: float, r_d: float, p_d: float, r0: float, p0: float,
              fq: float, tau_dt: int, n_qubits: int, labels: Mapping[str, str] | None = None
              ) -> "MetricsRecord":
        nar_b, nsp_b = r_b / r0, (p_b / p0 if p0 else math.nan)
        nar_dd, nsp_dd = r_d / r0, (p_d / p0 if p0 else math.nan)
        d_nar, d_nsp = dd_deltas(nar_b, nar_dd, nsp_b, nsp_dd)
        return cls(nar_b, nar_dd, nsp_b, nsp_dd, d_nar, d_nsp, fq, math.log(tau_dt),
                   n_qubits, dict(labels or {}))


# --- statistics ---------------------------------------------------------------------


def _betacf(a: float, b: float, x: float, max_iter: int = 300, eps: float = 1e-15) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise MetricsError("incomplete beta continued fraction did not converge")


def betainc_regularized(a: float, b: float, x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise MetricsError(f"x={x} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise MetricsError("degrees of freedom must be positive")
    if math.isinf(t):
        return 0.0
    return betainc_regularized(df / 2.0, 0.5, df / (df + t * t))


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    c_r: float
    p_value: float
    n_points: int


def linear_fit(xs: Sequence[float], ys: Sequence[float]) -> FitResult:
    """Least-squares line with Pearson correlation and its two-sided p-value."""
    n = len(xs)
    if n != len(ys):
        raise MetricsError("xs and ys differ in length")
    if n < 3:
        raise MetricsError("linear fit needs at least 3 points")
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    sxx = math.fsum((x - mx) ** 2 for x in xs)
    syy = math.fsum((y - my) ** 2 for y in ys)
    sxy = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys))
    if sxx == 0:
        raise MetricsError("degenerate fit: all x values equal")
    slope = sxy / sxx
    intercept = my - slope * mx
    if syy == 0:
        return FitResult(slope, intercept, 0.0, 1.0, n)
    r = sxy / math.sqrt(sxx * syy)
    if abs(abs(r) - 1.0) < 1e-12:
        r = math.copysign(1.0, r)
    if abs(r) == 1.0:
        return FitResult(slope, intercept, r, 0.0, n)
    df = n - 2
    t = r * math.sqrt(df / (1.0 - r * r))
    return FitResult(slope, intercept, r, t_two_sided_p(t, df), n)


CORRELATION_BANDS = (
    (0.9, "very strong"),
    (0.7, "strong"),
    (0.4, "moderate"),
    (0.2, "weak"),
    (0.0, "very weak"),
)


def correlation_strength(c_r: float) -> str:
    """Band label for |c_r|; a value on a band edge belongs to the upper band."""
    a = abs(c_r)
    for edge, label in CORRELATION_BANDS:
        if a >= edge:
            return label
    return "very weak"


def display_p(p: float) -> float:
    """p-value as shown in summary tables: anything below 1e-12 prints as 0."""
    return 0.0 if p < 1e-12 else p
