"""Calibration snapshots for linear-chain devices.

Calibration files are JSON with the keys documented in ``docs/formats.md``.
Per-qubit entries may be given as a scalar (applied to every qubit on the
chain) or as a list of length ``chain_length``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from .circuit import Gate, GateKind

NATIVE_1Q = frozenset({GateKind.ID, GateKind.RZ, GateKind.SX, GateKind.X})
VIRTUAL = frozenset({GateKind.ID, GateKind.RZ})
BUNDLED = {"cairo-like": "cairo_like.json", "cusco-like": "cusco_like.json"}


class DeviceError(ValueError):
    pass


@dataclass(frozen=True)
class DeviceModel:
    name: str
    native_2q: GateKind
    dt_ns: float
    chain_length: int
    directed_pairs: tuple[tuple[int, int], ...]
    single_pulse_dt: int
    two_qubit_dt: int
    measure_dt: int
    f_1q: tuple[float, ...]
    f_2q: Mapping[tuple[int, int], float]
    f_meas: tuple[float, ...]
    t1_ns: tuple[float, ...]
    t2_ns: tuple[float, ...]
    readout_flip: tuple[float, ...]
    detuning_sigma: float

    def __post_init__(self):
        object.__setattr__(self, "native_2q", GateKind(self.native_2q))
        object.__setattr__(self, "f_2q", dict(sorted(self.f_2q.items())))
        validate(self)

    @property
    def native_kinds(self) -> frozenset[GateKind]:
        return NATIVE_1Q | {self.native_2q}

    def supports(self, control: int, target: int) -> bool:
        return (control, target) in self.directed_pairs

    def pair_fidelity(self, a: int, b: int) -> float:
        key = (min(a, b), max(a, b))
        try:
            return self.f_2q[key]
        except KeyError:
            raise DeviceError(f"{self.name}: no two-qubit fidelity for pair {key}") from None

    def with_two_qubit_fidelity(self, f: float) -> "DeviceModel":
        return replace(self, f_2q={k: f for k in self.f_2q})

    def with_detuning(self, sigma: float) -> "DeviceModel":
        return replace(self, detuning_sigma=sigma)


def _chain_pairs(length: int) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(length - 1)]


def validate(dev: DeviceModel) -> None:
    if dev.native_2q not in (GateKind.CX, GateKind.ECR):
        raise DeviceError(f"native_2q must be CX or ECR, got {dev.native_2q.value}")
    if not dev.dt_ns > 0:
        raise DeviceError("dt_ns must be positive")
    if dev.chain_length < 1:
        raise DeviceError("chain_length must be >= 1")
    for field_name in ("single_pulse_dt", "two_qubit_dt", "measure_dt"):
        if getattr(dev, field_name) < 0:
            raise DeviceError(f"{field_name} must be >= 0")
    for field_name in ("f_1q", "f_meas", "t1_ns", "t2_ns", "readout_flip"):
        if len(getattr(dev, field_name)) != dev.chain_length:
            raise DeviceError(f"{field_name} needs {dev.chain_length} entries")
    for field_name in ("f_1q", "f_meas"):
        for q, f in enumerate(getattr(dev, field_name)):
            if not 0 < f <= 1:
                raise DeviceError(f"{field_name} out of (0,1] on qubit {q}: {f}")
    for pair, f in dev.f_2q.items():
        if not 0 < f <= 1:
            raise DeviceError(f"f_2q out of (0,1] on pair {pair}: {f}")
    for q, (t1, t2) in enumerate(zip(dev.t1_ns, dev.t2_ns)):
        if not (t1 > 0 and t2 > 0):
            raise DeviceError(f"coherence times must be positive on qubit {q}")
        if t2 > 2 * t1:
            raise DeviceError(f"t2_ns > 2*t1_ns on qubit {q} ({t2} > 2*{t1})")
    for q, p in enumerate(dev.readout_flip):
        if not 0 <= p <= 1:
            raise DeviceError(f"readout_flip out of [0,1] on qubit {q}")
    if dev.detuning_sigma < 0:
        raise DeviceError("detuning_sigma must be >= 0")

    physical = {tuple(sorted(p)) for p in dev.directed_pairs}
    for c, t in dev.directed_pairs:
        if abs(c - t) != 1 or max(c, t) >= dev.chain_length:
            raise DeviceError(f"directed pair ({c},{t}) is not a chain edge")
    if physical != set(_chain_pairs(dev.chain_length)):
        raise DeviceError("directed_pairs must cover every chain edge")
    for a, b in physical:
        both = (a, b) in dev.directed_pairs and (b, a) in dev.directed_pairs
        if dev.native_2q is GateKind.ECR and both:
            raise DeviceError(f"ECR device lists both directions on pair ({a},{b})")
        if dev.native_2q is GateKind.CX and not both:
            raise DeviceError(f"CX device must list both directions on pair ({a},{b})")
        if (a, b) not in dev.f_2q:
            raise DeviceError(f"f_2q missing for pair ({a},{b})")


def gate_duration(device: DeviceModel, gate: Gate) -> int:
    k = gate.kind
    if k in VIRTUAL:
        return 0
    if k is GateKind.DELAY:
        return gate.delay_span
    if k is GateKind.MEASURE:
        return device.measure_dt
    if k in (GateKind.X, GateKind.SX, GateKind.Y):
        # Y is a phase-shifted X pulse
        return device.single_pulse_dt
    if k is device.native_2q:
        return device.two_qubit_dt
    raise DeviceError(f"{k.value} is not native to {device.name}")


# --- (de)serialization --------------------------------------------------------


def _per_qubit(value: Any, n: int, name: str) -> tuple[float, ...]:
    if isinstance(value, (int, float)):
        return (float(value),) * n
    if len(value) != n:
        raise DeviceError(f"{name} needs {n} entries, got {len(value)}")
    return tuple(float(v) for v in value)


def from_dict(data: Mapping[str, Any]) -> DeviceModel:
    try:
        n = int(data["chain_length"])
        native = GateKind(str(data["native_2q"]).upper())
        pairs = data.get("directed_pairs")
        if pairs is None:
            pairs = _chain_pairs(n)
            if native is GateKind.CX:
                pairs = pairs + [(b, a) for a, b in pairs]
        durations = data["durations"]
        fid = data["fidelities"]
        coh = data["coherence"]
        f2 = fid["f_2q"]
        if isinstance(f2, (int, float)):
            f2q = {p: float(f2) for p in _chain_pairs(n)}
        else:
            f2q = {}
            for key, val in f2.items():
                a, b = (int(s) for s in key.split("-"))
                f2q[(min(a, b), max(a, b))] = float(val)
        return DeviceModel(
            name=str(data["name"]),
            native_2q=native,
            dt_ns=float(data["dt_ns"]),
            chain_length=n,
            directed_pairs=tuple((int(c), int(t)) for c, t in pairs),
            single_pulse_dt=int(durations["single_pulse"]),
            two_qubit_dt=int(durations["two_qubit"]),
            measure_dt=int(durations["measure"]),
            f_1q=_per_qubit(fid["f_1q"], n, "f_1q"),
            f_2q=f2q,
            f_meas=_per_qubit(fid["f_meas"], n, "f_meas"),
            t1_ns=_per_qubit(coh["t1_ns"], n, "t1_ns"),
            t2_ns=_per_qubit(coh["t2_ns"], n, "t2_ns"),
            readout_flip=_per_qubit(data["readout"]["flip"], n, "readout.flip"),
            detuning_sigma=float(data["detuning_sigma"]),
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise DeviceError(f"malformed calibration data: {exc!r}") from exc


def to_dict(dev: DeviceModel) -> dict[str, Any]:
    d = asdict(dev)
    return {
        "name": dev.name,
        "native_2q": dev.native_2q.value,
        "dt_ns": dev.dt_ns,
        "chain_length": dev.chain_length,
        "directed_pairs": [list(p) for p in dev.directed_pairs],
        "durations": {
            "single_pulse": dev.single_pulse_dt,
            "two_qubit": dev.two_qubit_dt,
            "measure": dev.measure_dt,
        },
        "fidelities": {
            "f_1q": list(d["f_1q"]),
            "f_2q": {f"{a}-{b}": f for (a, b), f in dev.f_2q.items()},
            "f_meas": list(d["f_meas"]),
        },
        "coherence": {"t1_ns": list(d["t1_ns"]), "t2_ns": list(d["t2_ns"])},
        "readout": {"flip": list(d["readout_flip"])},
        "detuning_sigma": dev.detuning_sigma,
    }


def load_device(path: str | Path) -> DeviceModel:
    """Load a calibration file, or a bundled device by name (``cairo-like``)."""
    path_s = str(path)
    if path_s in BUNDLED:
        text = resources.files("ddqaoa.data").joinpath(BUNDLED[path_s]).read_text()
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise DeviceError(f"cannot read calibration file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DeviceError(f"calibration file {path} is not valid JSON: {exc}") from exc
    return from_dict(data)


def save_device(dev: DeviceModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(to_dict(dev), indent=2) + "\n")
