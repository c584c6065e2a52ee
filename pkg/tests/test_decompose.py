import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import unitary_group

from ddqaoa.circuit import (Circuit, GateKind, cx, cz, ecr, equivalent_up_to_phase, gate_matrix,
                            h, measure, rx, rzz, unitary_of, x)
from ddqaoa.decompose import (DecompositionStyle, LoweringError, OptPreset, cx_as_ecr,
                              lower_to_basis, optimize, reverse_cx, rzz_as_cx, rzz_as_cz,
                              synthesize_1q, transpile, zyz_angles, zz_swap)
from conftest import random_circuit

angles = st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False)
STYLES = list(DecompositionStyle)


def _u(n, gates):
    return unitary_of(Circuit(n, tuple(gates)))


@given(angles)
def test_rzz_decompositions(theta):
    target = gate_matrix(rzz(theta, 0, 1))
    assert equivalent_up_to_phase(_u(2, rzz_as_cx(theta, 0, 1)), target)
    assert equivalent_up_to_phase(_u(2, rzz_as_cz(theta, 0, 1)), target)
    assert equivalent_up_to_phase(_u(2, rzz_as_cz(theta, 1, 0)), _u(2, [rzz(theta, 1, 0)]))


@given(angles, st.sampled_from(STYLES))
def test_zz_swap_is_interaction_then_swap(theta, style):
    swap = _u(2, [cx(0, 1), cx(1, 0), cx(0, 1)])
    assert equivalent_up_to_phase(_u(2, zz_swap(theta, 0, 1, style)), swap @ gate_matrix(rzz(theta, 0, 1)))


def test_cx_as_ecr_and_reverse_cx():
    assert equivalent_up_to_phase(_u(2, cx_as_ecr(0, 1)), gate_matrix(cx(0, 1)))
    assert equivalent_up_to_phase(_u(2, cx_as_ecr(1, 0)), _u(2, [cx(1, 0)]))
    assert equivalent_up_to_phase(_u(2, reverse_cx(0, 1)), gate_matrix(cx(0, 1)))
    kinds = {g.kind for g in cx_as_ecr(0, 1)}
    assert kinds <= {GateKind.ECR, GateKind.X, GateKind.SX, GateKind.RZ}


def test_cx_as_ecr_respects_device_direction(cusco):
    with pytest.raises(LoweringError):
        cx_as_ecr(1, 0, cusco)


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1))
def test_single_qubit_synthesis(seed):
    u = unitary_group.rvs(2, random_state=seed)
    gates = synthesize_1q(u, 0)
    assert {g.kind for g in gates} <= {GateKind.RZ, GateKind.SX}
    assert sum(g.kind is GateKind.SX for g in gates) <= 2
    assert equivalent_up_to_phase(_u(1, gates), u)
    theta, phi, lam = zyz_angles(u)
    assert 0 <= theta <= math.pi + 1e-12


@pytest.mark.parametrize("gate", [h(0), x(0), rx(0.3, 0), rx(math.pi / 2, 0), rx(-math.pi, 0), rx(0.0, 0)])
def test_special_single_qubit_lowerings(gate, cairo):
    lowered = lower_to_basis(Circuit(1, (gate,)), cairo)
    assert equivalent_up_to_phase(unitary_of(lowered), gate_matrix(gate))
    assert all(g.kind in (GateKind.RZ, GateKind.SX, GateKind.X) for g in lowered.gates)


def test_lowering_only_emits_native_gates(device):
    rng = np.random.default_rng(5)
    allowed = {GateKind.RZ, GateKind.SX, GateKind.X, device.native_2q, GateKind.MEASURE}
    for style in STYLES:
        for _ in range(30):
            c = random_circuit(rng, 4, 20)
            low = lower_to_basis(c, device, style)
            assert {g.kind for g in low.gates} <= allowed
            for g in low.gates:
                if len(g.qubits) == 2:
                    assert device.supports(*g.qubits)
            assert equivalent_up_to_phase(unitary_of(low), unitary_of(c))


def test_lowering_rejects_non_adjacent(cairo):
    with pytest.raises(LoweringError):
        lower_to_basis(Circuit(3, (cz(0, 2),)), cairo)


def test_lowering_rejects_oversized_circuit(cairo):
    with pytest.raises(LoweringError):
        lower_to_basis(Circuit(17, ()), cairo)


@pytest.mark.parametrize("preset", list(OptPreset))
def test_optimize_preserves_unitary_and_never_grows(device, preset):
    rng = np.random.default_rng(17)
    for _ in range(25):
        low = lower_to_basis(random_circuit(rng, 4, 25), device)
        opt = optimize(low, preset)
        assert len(opt) <= len(low)
        assert equivalent_up_to_phase(unitary_of(opt), unitary_of(low))


def test_optimize_cancels_adjacent_pairs():
    c = Circuit(2, (cx(0, 1), cx(0, 1), x(0), x(0), ecr(0, 1), ecr(0, 1)))
    assert len(optimize(c, OptPreset.OPT1)) == 0


def test_opt3_is_no_larger_than_opt1(device):
    rng = np.random.default_rng(3)
    for style in STYLES:
        for _ in range(10):
            c = random_circuit(rng, 3, 20)
            assert len(transpile(c, device, style, OptPreset.OPT3)) <= len(transpile(c, device, style, OptPreset.OPT1))


def test_measurements_survive_transpile(device):
    c = Circuit(2, (h(0), cx(0, 1), measure(0), measure(1)))
    out = transpile(c, device)
    assert out.count(GateKind.MEASURE) == 2
    assert out.gates[-1].kind is GateKind.MEASURE
