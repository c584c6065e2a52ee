"""Simulation of dynamical decoupling on QAOA portfolio circuits."""

__version__ = "0.1.0"

from .circuit import Circuit, Gate, GateKind  # noqa: E402
from .decompose import DecompositionStyle, OptPreset, transpile  # noqa: E402
from .device import DeviceModel, load_device  # noqa: E402
from .metrics import FitResult, MetricsRecord, linear_fit  # noqa: E402
from .noisesim import NoiseConfig, RunResult, simulate_ideal, simulate_noisy  # noqa: E402
from .qaoa import PortfolioInstance, QAOAParams, build_qaoa, swap_network_map  # noqa: E402
from .schedule import DDSequence, Schedule, alap_schedule, insert_dd  # noqa: E402

__all__ = [
    "Circuit", "Gate", "GateKind", "DecompositionStyle", "OptPreset", "transpile",
    "DeviceModel", "load_device", "FitResult", "MetricsRecord", "linear_fit",
    "NoiseConfig", "RunResult", "simulate_ideal", "simulate_noisy",
    "PortfolioInstance", "QAOAParams", "build_qaoa", "swap_network_map",
    "DDSequence", "Schedule", "alap_schedule", "insert_dd",
]
