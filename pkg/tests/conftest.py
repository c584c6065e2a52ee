import math

import numpy as np
import pytest

from ddqaoa.circuit import Circuit, Gate, GateKind
from ddqaoa.device import load_device

ONE_Q = (GateKind.X, GateKind.SX, GateKind.H, GateKind.Y, GateKind.RZ, GateKind.RX)
TWO_Q = (GateKind.CX, GateKind.CZ, GateKind.ECR, GateKind.RZZ)


def random_gate(rng: np.random.Generator, n: int, adjacent: bool = True) -> Gate:
    if n > 1 and rng.random() < 0.4:
        kind = TWO_Q[rng.integers(len(TWO_Q))]
        if adjacent:
            a = int(rng.integers(n - 1))
            pair = (a, a + 1) if rng.random() < 0.5 else (a + 1, a)
        else:
            pair = tuple(int(v) for v in rng.choice(n, 2, replace=False))
        angle = float(rng.uniform(-math.pi, math.pi)) if kind is GateKind.RZZ else None
        return Gate(kind, pair, angle)
    kind = ONE_Q[rng.integers(len(ONE_Q))]
    angle = float(rng.uniform(-2 * math.pi, 2 * math.pi)) if kind in (GateKind.RZ, GateKind.RX) else None
    return Gate(kind, (int(rng.integers(n)),), angle)


def random_circuit(rng: np.random.Generator, n: int, depth: int, adjacent: bool = True) -> Circuit:
    return Circuit(n, tuple(random_gate(rng, n, adjacent) for _ in range(depth)))


@pytest.fixture(scope="session")
def cairo():
    return load_device("cairo-like")


@pytest.fixture(scope="session")
def cusco():
    return load_device("cusco-like")


@pytest.fixture(params=["cairo-like", "cusco-like"], scope="session")
def device(request):
    return load_device(request.param)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].lstrip("C").rstrip(":"))):
            terminalreporter.write_line(line)
