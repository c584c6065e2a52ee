"""Experiment grid runner and result tables.

A sweep runs every (device, qubit count, style, preset) cell from a JSON
config. Each cell holds one seeded portfolio instance, and the baseline arm
and every DD arm share one transpiled schedule, so the deltas isolate the
effect of the pulses. Per-run records go to ``runs.jsonl``. The CSV tables
are derived from that file alone.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import subprocess
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from . import __version__
from .decompose import DecompositionStyle, OptPreset, transpile
from .device import BUNDLED, DeviceModel, load_device
from .metrics import (MetricsError, MetricsRecord, correlation_strength, display_p, emsr,
                      linear_fit)
from .noisesim import NoiseConfig, simulate_ideal, simulate_noisy
from .qaoa import (approximation_ratio, build_qaoa, cost_spec, expectation, grid_search,
                   random_instance, success_probability, swap_network_map)
from .schedule import DDSequence, alap_schedule, insert_dd

log = logging.getLogger(__name__)

NONE = "NONE"
SEQUENCE_CHOICES = (NONE, DDSequence.CPMG.value, DDSequence.XY4.value)
MIN_QUBITS, MAX_QUBITS = 3, 12

METRIC_COLUMNS = ("nar_b", "nar_dd", "nsp_b", "nsp_dd", "delta_nar", "delta_nsp")
AXES = ("fq", "log_tau", "n_qubits")
LABEL_COLUMNS = ("device", "gate_set", "style", "preset", "sequence")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    devices: tuple[str, ...]
    qubit_range: tuple[int, int]
    styles: tuple[DecompositionStyle, ...] = (DecompositionStyle.CX_IMPL,)
    sequences: tuple[str, ...] = (DDSequence.CPMG.value,)
    presets: tuple[OptPreset, ...] = (OptPreset.OPT3,)
    shots: int = 30000
    instance_seed: int = 0
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    output_dir: str = "results"
    workers: int = 1
    grid: int = 32

    def __post_init__(self):
        lo, hi = self.qubit_range
        if not MIN_QUBITS <= lo <= hi <= MAX_QUBITS:
            raise ConfigError(f"qubit_range must satisfy {MIN_QUBITS} <= min <= max <= {MAX_QUBITS}")
        for name in ("devices", "styles", "sequences", "presets"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must be nonempty")
        bad = [s for s in self.sequences if s not in SEQUENCE_CHOICES]
        if bad:
            raise ConfigError(f"unknown sequences {bad}; choose from {SEQUENCE_CHOICES}")
        if self.shots < 1 or self.workers < 1 or self.grid < 1:
            raise ConfigError("shots, workers and grid must be positive")

    @property
    def dd_sequences(self) -> tuple[str, ...]:
        return tuple(s for s in SEQUENCE_CHOICES[1:] if s in self.sequences)

    def to_dict(self) -> dict[str, Any]:
        return {
            "devices": list(self.devices),
            "qubit_range": list(self.qubit_range),
            "styles": [s.value for s in self.styles],
            "sequences": list(self.sequences),
            "presets": [p.value for p in self.presets],
            "shots": self.shots,
            "instance_seed": self.instance_seed,
            "noise": self.noise.to_dict(),
            "output_dir": self.output_dir,
            "workers": self.workers,
            "grid": self.grid,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], base_dir: Path | None = None) -> "ExperimentConfig":
        known = {"devices", "qubit_range", "styles", "sequences", "presets", "shots",
                 "instance_seed", "noise", "output_dir", "workers", "grid"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        try:
            devices = tuple(_resolve_device(p, base_dir) for p in d["devices"])
            kw: dict[str, Any] = {
                "devices": devices,
                "qubit_range": tuple(int(v) for v in d["qubit_range"]),
            }
        except KeyError as exc:
            raise ConfigError(f"missing config key {exc}") from exc
        if len(kw["qubit_range"]) != 2:
            raise ConfigError("qubit_range must be [min, max]")
        try:
            if "styles" in d:
                kw["styles"] = tuple(DecompositionStyle(s) for s in d["styles"])
            if "presets" in d:
                kw["presets"] = tuple(OptPreset(p) for p in d["presets"])
            if "noise" in d:
                kw["noise"] = NoiseConfig.from_dict(d["noise"])
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        if "sequences" in d:
            kw["sequences"] = tuple(str(s).upper() for s in d["sequences"])
        for key in ("shots", "instance_seed", "workers", "grid"):
            if key in d:
                kw[key] = int(d[key])
        if "output_dir" in d:
            kw["output_dir"] = str(d["output_dir"])
        return cls(**kw)

    def digest(self) -> str:
        """sha256 of the result-determining fields (output_dir and workers excluded)."""
        d = self.to_dict()
        del d["output_dir"], d["workers"]
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def _resolve_device(entry: str, base_dir: Path | None) -> str:
    if entry in BUNDLED or base_dir is None or Path(entry).is_absolute():
        return entry
    return str((base_dir / entry).resolve())


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return ExperimentConfig.from_dict(data, path.parent)


def version_string() -> str:
    """Package version, suffixed with ``git describe`` when run from a checkout."""
    src = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], cwd=src,
                             capture_output=True, text=True, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return __version__
    desc = out.stdout.strip()
    return f"{__version__}+g{desc}" if out.returncode == 0 and desc else __version__


# --- running one cell ---------------------------------------------------------------


@dataclass(frozen=True)
class Cell:
    device: str
    n_qubits: int
    style: DecompositionStyle
    preset: OptPreset

    def key(self) -> tuple:
        return (self.device, self.n_qubits, self.style.value, self.preset.value)


def run_cell(
    device: DeviceModel,
    n_qubits: int,
    style: DecompositionStyle,
    preset: OptPreset,
    sequences: Sequence[str],
    shots: int,
    instance_seed: int,
    noise: NoiseConfig,
    grid: int = 32,
) -> list[dict[str, Any]]:
    """All arms of one grid cell: the NONE baseline first, then each DD sequence.

    Every arm uses the same detuning draws (``noise.rng_seed``) and the same
    shot seed, so differences between arms come from the pulses alone.
    """
    inst = random_instance(n_qubits, instance_seed)
    spec = cost_spec(inst)
    params, _ = grid_search(spec, grid)
    mapped = swap_network_map(build_qaoa(inst, params, None), device, style)
    shot_seed = instance_seed
    ideal_counts = simulate_ideal(mapped, shots, shot_seed)
    F0 = expectation(ideal_counts, spec)
    r0 = approximation_ratio(F0, spec.f0, spec.fmax)
    p0 = success_probability(ideal_counts, spec)
    lowered = transpile(mapped, device, style, preset)
    base = alap_schedule(lowered, device)
    base.check()
    records = []
    for seq in (NONE, *[s for s in sequences if s != NONE]):
        sched = base if seq == NONE else insert_dd(base, DDSequence(seq), device)
        res = simulate_noisy(sched, device, noise, shots, shot_seed, spec)
        records.append({
            "device": device.name,
            "gate_set": device.native_2q.value,
            "n_qubits": n_qubits,
            "style": style.value,
            "preset": preset.value,
            "sequence": seq,
            "instance": inst.to_dict(),
            "params": {"gammas": list(params.gammas), "betas": list(params.betas)},
            "shots": shots,
            "F": res.F,
            "r": res.r,
            "sp": res.sp,
            "r0": r0,
            "p0": p0,
            "fq": res.fq,
            "tau_dt": res.tau_dt,
            "n_gates": len(sched.instructions),
            "engine": res.engine,
            "counts": dict(sorted(res.counts.items())),
        })
    return records


def _run_cell_job(job: tuple) -> tuple[tuple, list[dict[str, Any]] | None, str | None]:
    cell, cfg_dict, provenance = job
    cfg = ExperimentConfig.from_dict(cfg_dict)
    try:
        device = load_device(cell.device)
        records = run_cell(device, cell.n_qubits, cell.style, cell.preset, cfg.dd_sequences,
                           cfg.shots, cfg.instance_seed, cfg.noise, cfg.grid)
    except Exception as exc:  # a failed cell must not stop the sweep
        return cell.key(), None, f"{type(exc).__name__}: {exc}"
    for rec in records:
        rec["provenance"] = {
            **provenance,
            "device_source": cell.device,
            "instance_seed": cfg.instance_seed,
            "shot_seed": cfg.instance_seed,
            "noise_seed": cfg.noise.rng_seed,
        }
    return cell.key(), records, None


@dataclass
class SweepOutcome:
    output_dir: Path
    n_cells: int
    n_records: int
    failures: list[tuple[tuple, str]]

    @property
    def ok(self) -> bool:
        return not self.failures


def grid_cells(cfg: ExperimentConfig) -> list[Cell]:
    lo, hi = cfg.qubit_range
    return [Cell(d, n, s, p) for d in cfg.devices for n in range(lo, hi + 1)
            for s in cfg.styles for p in cfg.presets]


def _record_key(rec: Mapping[str, Any]) -> tuple:
    return (rec["device"], rec["provenance"]["device_source"], rec["n_qubits"], rec["style"],
            rec["preset"], SEQUENCE_CHOICES.index(rec["sequence"]))


def run_sweep(cfg: ExperimentConfig, output_dir: str | Path | None = None) -> SweepOutcome:
    out = Path(output_dir if output_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    provenance = {"config_sha256": cfg.digest(), "version": version_string()}
    cfg_dict = cfg.to_dict()
    jobs = [(cell, cfg_dict, provenance) for cell in grid_cells(cfg)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_cell_job, jobs))
    else:
        results = [_run_cell_job(j) for j in jobs]
    records: list[dict[str, Any]] = []
    failures = []
    for key, recs, err in results:
        if err is not None:
            log.error("cell %s failed: %s", key, err)
            failures.append((key, err))
        else:
            records.extend(recs)
    records.sort(key=_record_key)
    with open(out / "runs.jsonl", "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    write_tables(out)
    return SweepOutcome(out, len(jobs), len(records), failures)


# --- tables -------------------------------------------------------------------------


def read_runs(path: str | Path) -> list[dict[str, Any]]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no runs file at {path}")
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def metrics_rows(runs: Iterable[Mapping[str, Any]]) -> list[dict[str, Any]]:
    """Pair each DD arm with its cell's baseline and build one metrics row."""
    runs = list(runs)
    baselines = {}
    for r in runs:
        if r["sequence"] == NONE:
            baselines[_cell_of(r)] = r
    rows = []
    for r in runs:
        if r["sequence"] == NONE:
            continue
        b = baselines.get(_cell_of(r))
        if b is None:
            log.warning("DD run without a baseline in cell %s", _cell_of(r))
            continue
        rec = MetricsRecord.build(b["r"], b["sp"], r["r"], r["sp"], b["r0"], b["p0"],
                                  b["fq"], b["tau_dt"], b["n_qubits"])
        rows.append({
            "device": r["device"],
            "gate_set": r["gate_set"],
            "n_qubits": r["n_qubits"],
            "style": r["style"],
            "preset": r["preset"],
            "sequence": r["sequence"],
            "nar_b": rec.nar_b,
            "nar_dd": rec.nar_dd,
            "nsp_b": rec.nsp_b,
            "nsp_dd": rec.nsp_dd,
            "delta_nar": rec.delta_nar,
            "delta_nsp": rec.delta_nsp,
            "fq": rec.fq,
            "fq_dd": r["fq"],
            "log_tau": rec.log_tau,
            "tau_dt": b["tau_dt"],
        })
    return rows


def _cell_of(r: Mapping[str, Any]) -> tuple:
    src = r.get("provenance", {}).get("device_source", r["device"])
    return (r["device"], src, r["n_qubits"], r["style"], r["preset"])


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.10g}"
    return "" if v is None else str(v)


def _write_csv(path: Path, columns: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in columns])
    path.write_text(buf.getvalue())


def _finite_pairs(rows: Sequence[Mapping[str, Any]], x: str, y: str) -> tuple[list[float], list[float]]:
    xs, ys = [], []
    for r in rows:
        a, b = float(r[x]), float(r[y])
        if math.isfinite(a) and math.isfinite(b):
            xs.append(a)
            ys.append(b)
    return xs, ys


def _mean(values: Iterable[float]) -> float:
    vals = [v for v in values if math.isfinite(v)]
    return math.fsum(vals) / len(vals) if vals else math.nan


def fit_row(rows: Sequence[Mapping[str, Any]], metric: str, axis: str) -> dict[str, Any]:
    """Fit summary for one (metric, axis) pair; fit columns stay blank when refused."""
    xs, ys = _finite_pairs(rows, axis, metric)
    out: dict[str, Any] = {"metric": metric, "axis": axis, "n_points": len(ys), "mean": _mean(ys)}
    try:
        fit = linear_fit(xs, ys)
    except MetricsError as exc:
        out["note"] = str(exc)
        return out
    out.update(slope=fit.slope, intercept=fit.intercept, c_r=fit.c_r, p_value=fit.p_value,
               p_display=display_p(fit.p_value), strength=correlation_strength(fit.c_r))
    return out


FIT_COLUMNS = ("scope", "level", "metric", "axis", "n_points", "mean", "slope", "intercept",
               "c_r", "p_value", "p_display", "strength", "note")
METRICS_COLUMNS = ("device", "gate_set", "n_qubits", "style", "preset", "sequence",
                   *METRIC_COLUMNS, "fq", "fq_dd", "log_tau", "tau_dt")
EMSR_COLUMNS = ("factor", "level", "n_records", "emsr_ar", "emsr_sp")
SUMMARY_COLUMNS = ("factor", "level", "axis", "n_records", "mean_nar_b", "mean_delta_nar",
                   "mean_nsp_b", "mean_delta_nsp", "slope_delta_nar", "slope_delta_nsp",
                   "emsr_ar", "emsr_sp")


def _groups(rows: Sequence[Mapping[str, Any]]) -> list[tuple[str, str, list[Mapping[str, Any]]]]:
    groups: list[tuple[str, str, list[Mapping[str, Any]]]] = [("all", "all", list(rows))]
    for factor in LABEL_COLUMNS:
        for level in sorted({str(r[factor]) for r in rows}):
            groups.append((factor, level, [r for r in rows if str(r[factor]) == level]))
    return groups


def _emsr_or_nan(deltas: list[float]) -> float:
    vals = [d for d in deltas if math.isfinite(d)]
    return emsr(vals) if vals else math.nan


def fits_table(rows: Sequence[Mapping[str, Any]]) -> list[dict[str, Any]]:
    out = []
    for scope, level, sub in _groups(rows):
        for metric in METRIC_COLUMNS:
            for axis in AXES:
                out.append({"scope": scope, "level": level, **fit_row(sub, metric, axis)})
    return out


def emsr_table(rows: Sequence[Mapping[str, Any]]) -> list[dict[str, Any]]:
    return [{
        "factor": factor,
        "level": level,
        "n_records": len(sub),
        "emsr_ar": _emsr_or_nan([float(r["delta_nar"]) for r in sub]),
        "emsr_sp": _emsr_or_nan([float(r["delta_nsp"]) for r in sub]),
    } for factor, level, sub in _groups(rows)]


def summary_table(rows: Sequence[Mapping[str, Any]]) -> list[dict[str, Any]]:
    """Factor-impact table: means, DD-delta slopes and EMSR per factor level.

    Pooled rows fit against circuit fidelity and ln(tau/dt); per-level rows fit
    against qubit count.
    """
    if not rows:
        raise MetricsError("no metrics rows to summarize")
    pooled = [("circuit_fidelity", "all", "fq", list(rows)), ("schedule_duration", "all", "log_tau", list(rows))]
    levels = [(f, lv, "n_qubits", sub) for f, lv, sub in _groups(rows) if f != "all"]
    out = []
    for factor, level, axis, sub in pooled + levels:
        d_nar = fit_row(sub, "delta_nar", axis)
        d_nsp = fit_row(sub, "delta_nsp", axis)
        out.append({
            "factor": factor,
            "level": level,
            "axis": axis,
            "n_records": len(sub),
            "mean_nar_b": _mean(float(r["nar_b"]) for r in sub),
            "mean_delta_nar": d_nar["mean"],
            "mean_nsp_b": _mean(float(r["nsp_b"]) for r in sub),
            "mean_delta_nsp": d_nsp["mean"],
            "slope_delta_nar": d_nar.get("slope"),
            "slope_delta_nsp": d_nsp.get("slope"),
            "emsr_ar": _emsr_or_nan([float(r["delta_nar"]) for r in sub]),
            "emsr_sp": _emsr_or_nan([float(r["delta_nsp"]) for r in sub]),
        })
    return out


def write_tables(result_dir: str | Path) -> list[dict[str, Any]]:
    """Derive metrics.csv, fits.csv and emsr.csv from runs.jsonl; return the metrics rows."""
    result_dir = Path(result_dir)
    rows = metrics_rows(read_runs(result_dir / "runs.jsonl"))
    _write_csv(result_dir / "metrics.csv", METRICS_COLUMNS, rows)
    _write_csv(result_dir / "fits.csv", FIT_COLUMNS, fits_table(rows))
    _write_csv(result_dir / "emsr.csv", EMSR_COLUMNS, emsr_table(rows))
    return rows


def report(result_dir: str | Path, figures: bool = True) -> Path:
    """Rebuild every table plus summary.csv (and figures) from a result directory."""
    result_dir = Path(result_dir)
    if not (result_dir / "runs.jsonl").exists():
        raise FileNotFoundError(f"{result_dir} holds no runs.jsonl")
    rows = write_tables(result_dir)
    if not rows:
        raise MetricsError(f"{result_dir} holds no baseline/DD pairs")
    summary = result_dir / "summary.csv"
    _write_csv(summary, SUMMARY_COLUMNS, summary_table(rows))
    if figures:
        from .plotting import render_figures
        render_figures(rows, result_dir / "figures")
    return summary


def inspect_runs(path: str | Path) -> str:
    """One human-readable line per run record."""
    lines = [f"{'device':<12} {'n':>2} {'style':<8} {'preset':<5} {'seq':<5} "
             f"{'r':>7} {'sp':>7} {'r0':>7} {'p0':>7} {'fq':>7} {'tau_dt':>8} engine"]
    for r in read_runs(path):
        lines.append(
            f"{r['device']:<12} {r['n_qubits']:>2} {r['style']:<8} {r['preset']:<5} "
            f"{r['sequence']:<5} {r['r']:7.4f} {r['sp']:7.4f} {r['r0']:7.4f} {r['p0']:7.4f} "
            f"{r['fq']:7.4f} {r['tau_dt']:>8} {r['engine']}"
        )
    return "\n".join(lines)
