import json
import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddqaoa.circuit import equivalent_up_to_phase, permutation_matrix, unitary_of
from ddqaoa.decompose import DecompositionStyle
from ddqaoa.noisesim import ideal_probabilities, statevector
from ddqaoa.qaoa import (PortfolioInstance, QAOAParams, approximation_ratio, build_qaoa,
                         cost_spec, cost_table, cost_value, expectation, grid_search,
                         qaoa_state, random_instance, success_probability, swap_network_blocks,
                         swap_network_map, unpermute_counts, unpermute_probabilities)

seeds = st.integers(0, 10_000)


def qubo_objective(inst, bits):
    # asset i is selected when its bit reads 0
    x = np.array([1 - int(b) for b in bits], dtype=float)
    s, mu = np.array(inst.sigma), np.array(inst.mu)
    return inst.lam * (inst.q * x @ s @ x - (1 - inst.q) * mu @ x + inst.A * (x.sum() - inst.B) ** 2)


@settings(max_examples=30)
@given(st.integers(2, 6), seeds)
def test_ising_cost_equals_portfolio_objective_up_to_constant(n, seed):
    inst = random_instance(n, seed)
    spec = cost_spec(inst)
    table = cost_table(spec.c, spec.k, n)
    diffs = [table[i] - qubo_objective(inst, format(i, f"0{n}b")) for i in range(2**n)]
    assert np.ptp(diffs) < 1e-9


@settings(max_examples=20)
@given(st.integers(2, 6), seeds)
def test_extrema_and_cost_value(n, seed):
    spec = cost_spec(random_instance(n, seed))
    values = {b: cost_value(b, spec) for b in ("".join(p) for p in product("01", repeat=n))}
    assert spec.f0 == pytest.approx(min(values.values()))
    assert spec.fmax == pytest.approx(max(values.values()))
    for b in spec.optimal_bitstrings:
        assert values[b] == pytest.approx(spec.f0)


def test_coefficients_for_hand_instance():
    inst = PortfolioInstance(2, 2.0, 0.5, 1.0, 1, (0.2, 0.4), ((0.1, 0.05), (0.05, 0.3)))
    spec = cost_spec(inst)
    assert spec.c[(0, 1)] == pytest.approx(1.0 * (0.5 * 0.05 + 1.0))
    # k_i = lam/2 [A(2B-n) + (1-q) mu_i - q sum_j sigma_ij]
    assert spec.k[0] == pytest.approx(1.0 * (0 + 0.5 * 0.2 - 0.5 * 0.15))
    assert spec.k[1] == pytest.approx(1.0 * (0 + 0.5 * 0.4 - 0.5 * 0.35))


def test_instance_validation_and_json_round_trip():
    inst = random_instance(4, 1)
    assert PortfolioInstance.from_dict(json.loads(json.dumps(inst.to_dict()))) == inst
    with pytest.raises(ValueError):
        PortfolioInstance(2, 1, 0.5, 1, 1, (0.1, 0.2), ((1, 0.5), (0.4, 1)))
    with pytest.raises(ValueError):
        PortfolioInstance(2, 1, 0.5, 1, 3, (0.1, 0.2), ((1, 0.5), (0.5, 1)))


@pytest.mark.parametrize("style", [None, *DecompositionStyle])
def test_circuit_state_matches_analytic_state(style):
    for n in (2, 3, 4):
        inst = random_instance(n, 10 + n)
        spec = cost_spec(inst)
        params = QAOAParams((0.37,), (1.1,))
        circ = build_qaoa(inst, params, style).without_measurements()
        analytic = qaoa_state(cost_table(spec.c, spec.k, n), params, n)
        assert equivalent_up_to_phase(statevector(circ).reshape(-1, 1), analytic.reshape(-1, 1))


def test_depth_two_state():
    inst = random_instance(3, 2)
    spec = cost_spec(inst)
    params = QAOAParams((0.2, 0.5), (0.9, 0.3))
    circ = build_qaoa(inst, params, None).without_measurements()
    analytic = qaoa_state(cost_table(spec.c, spec.k, 3), params, 3)
    assert equivalent_up_to_phase(statevector(circ).reshape(-1, 1), analytic.reshape(-1, 1))


@pytest.mark.parametrize("n", range(2, 9))
def test_swap_network_covers_every_pair_once(n):
    blocks = swap_network_blocks(n)
    assert len(blocks) == n * (n - 1) // 2
    arr = list(range(n))
    met = set()
    for _, p, swap in blocks:
        met.add(frozenset((arr[p], arr[p + 1])))
        if swap:
            arr[p], arr[p + 1] = arr[p + 1], arr[p]
    assert len(met) == n * (n - 1) // 2
    assert max(layer for layer, _, _ in blocks) < n


@pytest.mark.parametrize("style", list(DecompositionStyle))
def test_swap_mapped_unitary_is_permuted_original(style, cairo):
    for n in (2, 3, 4, 5):
        inst = random_instance(n, n)
        abstract = build_qaoa(inst, QAOAParams((0.4,), (0.7,)), None).without_measurements()
        mapped = swap_network_map(abstract, cairo, style)
        assert all(abs(g.qubits[0] - g.qubits[1]) == 1 for g in mapped.gates if len(g.qubits) == 2)
        lhs = unitary_of(mapped)
        rhs = permutation_matrix(mapped.layout) @ unitary_of(abstract)
        assert equivalent_up_to_phase(lhs, rhs)


def test_swap_map_rejects_other_two_qubit_gates(cairo):
    inst = random_instance(3, 0)
    with pytest.raises(ValueError):
        swap_network_map(build_qaoa(inst, QAOAParams((0.1,), (0.2,))), cairo)


def test_unpermuted_probabilities_match_logical_state(cairo):
    inst = random_instance(4, 9)
    spec = cost_spec(inst)
    params = QAOAParams((0.3,), (0.8,))
    mapped = swap_network_map(build_qaoa(inst, params, None), cairo)
    expected = np.abs(qaoa_state(cost_table(spec.c, spec.k, 4), params, 4)) ** 2
    assert np.allclose(ideal_probabilities(mapped), expected)


def test_unpermute_counts_and_probabilities_agree():
    layout = (2, 0, 1)
    probs = np.arange(8, dtype=float)
    logical = unpermute_probabilities(probs, layout)
    counts = {format(i, "03b"): int(p) for i, p in enumerate(probs) if p}
    lc = unpermute_counts(counts, layout)
    for bits, k in lc.items():
        assert logical[int(bits, 2)] == k


def test_ratio_and_success_probability():
    spec = cost_spec(random_instance(3, 4))
    assert approximation_ratio(spec.f0, spec.f0, spec.fmax) == 1
    assert approximation_ratio(spec.fmax, spec.f0, spec.fmax) == 0
    with pytest.raises(ValueError):
        approximation_ratio(1.0, 2.0, 2.0)
    best = next(iter(spec.optimal_bitstrings))
    counts = {best: 3, ("1" if best[0] == "0" else "0") + best[1:]: 1}
    assert success_probability(counts, spec) == 0.75
    assert expectation({best: 10}, spec) == pytest.approx(spec.f0)


def test_grid_search_finds_grid_minimum():
    spec = cost_spec(random_instance(4, 21))
    params, F = grid_search(spec, grid=16)
    energies = cost_table(spec.c, spec.k, 4)
    rng = np.random.default_rng(0)
    for _ in range(30):
        g, b = (math.pi * rng.integers(16) / 16 for _ in range(2))
        psi = qaoa_state(energies, QAOAParams((g,), (b,)), 4)
        assert F <= float(np.abs(psi) ** 2 @ energies) + 1e-12
    assert grid_search(spec, grid=16) == (params, F)
    assert F < float(energies.mean())
