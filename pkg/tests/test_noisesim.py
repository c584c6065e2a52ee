import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ddqaoa.circuit import Circuit, cx, delay, h, measure, x
from ddqaoa.decompose import transpile
from ddqaoa.noisesim import (Channel, NoiseConfig, SimulationError, _draw_detunings,
                             _trajectory_probabilities, apply_readout_flips,
                             depolarizing_strength, ideal_probabilities, kraus_channels,
                             noisy_probabilities, sample_counts, simulate_ideal, simulate_noisy)
from ddqaoa.schedule import DDSequence, alap_schedule, insert_dd
from conftest import random_circuit

OFF = NoiseConfig(enable_t1t2=False, enable_detuning=False, enable_gate_error=False, enable_readout=False)


@given(st.sampled_from(list(Channel)), st.floats(0, 1))
def test_kraus_completeness(kind, p):
    ks = kraus_channels(kind, p)
    total = sum(k.conj().T @ k for k in ks)
    assert np.abs(total - np.eye(total.shape[0])).max() <= 1e-12


def test_kraus_rejects_bad_probability():
    with pytest.raises(ValueError):
        kraus_channels(Channel.AD, 1.5)


def test_depolarizing_strength():
    assert depolarizing_strength(0.999, 2) == pytest.approx(0.002)
    assert depolarizing_strength(0.99, 4) == pytest.approx(0.04 / 3)
    assert depolarizing_strength(0.0, 2) == 1.0


def _idle_schedule(device, prep, span):
    c = Circuit(1, tuple(prep) + (delay(span, 0), measure(0)))
    return alap_schedule(transpile(c, device), device)


def _final_rho(schedule, device, noise):
    states = []
    noisy_probabilities(schedule, device, noise, observer=lambda rho, ins: states.append(rho.copy()))
    return states


def test_plus_state_coherence_after_t2(cusco):
    span = round(cusco.t2_ns[0] / cusco.dt_ns)
    sched = _idle_schedule(cusco, [h(0)], span)
    noise = replace(OFF, enable_t1t2=True)
    rho = _final_rho(sched, cusco, noise)[-1][0]
    assert abs(2 * abs(rho[0, 1]) - math.exp(-1)) < 1e-6


def test_excited_population_after_t1(cusco):
    span = round(cusco.t1_ns[0] / cusco.dt_ns)
    sched = _idle_schedule(cusco, [x(0)], span)
    noise = replace(OFF, enable_t1t2=True)
    probs, _ = noisy_probabilities(sched, cusco, noise)
    assert probs[1] == pytest.approx(math.exp(-1), abs=1e-9)


def test_noiseless_matches_ideal(device):
    rng = np.random.default_rng(2)
    for n in (2, 3, 4):
        c = transpile(random_circuit(rng, n, 25).with_measurements(), device)
        sched = insert_dd(alap_schedule(c, device), DDSequence.XY4, device)
        probs, engine = noisy_probabilities(sched, device, OFF)
        assert engine == "density_matrix"
        assert np.allclose(probs, ideal_probabilities(c), atol=1e-9)


def test_readout_flip_and_gate_error(cairo):
    sched = alap_schedule(Circuit(1, (measure(0),)), cairo)
    probs, _ = noisy_probabilities(sched, cairo, replace(OFF, enable_readout=True))
    assert probs[1] == pytest.approx(cairo.readout_flip[0])
    sched = alap_schedule(Circuit(1, (x(0), measure(0))), cairo)
    probs, _ = noisy_probabilities(sched, cairo, replace(OFF, enable_gate_error=True))
    assert probs[0] == pytest.approx(depolarizing_strength(cairo.f_1q[0], 2) / 2)


def test_readout_flip_matrix():
    p = apply_readout_flips(np.array([1.0, 0, 0, 0]), [0.1, 0.2])
    assert np.allclose(p, [0.9 * 0.8, 0.9 * 0.2, 0.1 * 0.8, 0.1 * 0.2])


def test_random_detuning_dephases(cairo):
    span = 20000
    sched = _idle_schedule(cairo, [h(0)], span)
    noise = replace(OFF, enable_detuning=True, detuning_samples=64, rng_seed=3)
    rho = _final_rho(sched, cairo, noise)[-1]
    coherence = abs(rho[:, 0, 1].mean()) * 2
    assert coherence < 0.99
    dets = _draw_detunings(cairo, noise, 1)[:, 0]
    assert coherence == pytest.approx(abs(np.mean(np.exp(1j * dets * span))), abs=1e-9)


def test_common_detuning_draws_across_arms(cairo):
    noise = NoiseConfig(rng_seed=9)
    assert np.array_equal(_draw_detunings(cairo, noise, 3), _draw_detunings(cairo, noise, 3))


def test_trajectory_engine_agrees_with_density_matrix(cairo):
    rng = np.random.default_rng(4)
    c = transpile(random_circuit(rng, 3, 15).with_measurements(), cairo)
    sched = alap_schedule(c, cairo)
    # detuning and readout only: trajectories are deterministic
    noise = replace(OFF, enable_detuning=True, detuning_samples=4, rng_seed=1, trajectories=1)
    dm, _ = noisy_probabilities(sched, cairo, noise)
    traj = _trajectory_probabilities(sched, cairo, noise, _draw_detunings(cairo, noise, 3))
    assert np.allclose(dm, traj, atol=1e-9)
    noise = replace(noise, enable_t1t2=True, enable_gate_error=True, trajectories=400)
    dm, _ = noisy_probabilities(sched, cairo, noise)
    traj = _trajectory_probabilities(sched, cairo, noise, _draw_detunings(cairo, noise, 3))
    assert np.abs(dm - traj).max() < 0.03


def test_trajectory_engine_used_above_ten_qubits(cairo):
    n = 11
    c = Circuit(n, tuple(h(q) for q in range(n)) + (cx(0, 1),) + tuple(measure(q) for q in range(n)))
    sched = alap_schedule(transpile(c, cairo), cairo)
    noise = NoiseConfig(detuning_samples=2, trajectories=2)
    res = simulate_noisy(sched, cairo, noise, 1000, seed=1)
    assert res.engine == "trajectory"
    assert sum(res.counts.values()) == 1000


def test_sampling_is_seeded_and_coupled():
    p = np.array([0.5, 0.25, 0.25, 0.0])
    a = sample_counts(p, 1000, 5, 2)
    assert a == sample_counts(p, 1000, 5, 2)
    assert sum(a.values()) == 1000 and "11" not in a
    q = np.array([0.49, 0.26, 0.25, 0.0])
    b = sample_counts(q, 1000, 5, 2)
    # shared uniforms: only draws in the shifted CDF sliver change outcome
    assert sum(abs(a.get(k, 0) - b.get(k, 0)) for k in set(a) | set(b)) <= 2 * 40


def test_simulate_ideal_counts(cairo):
    c = Circuit(2, (h(0), cx(0, 1), measure(0), measure(1)))
    counts = simulate_ideal(c, 2000, seed=3)
    assert set(counts) == {"00", "11"}


def test_device_mismatch_rejected(cairo, cusco):
    sched = alap_schedule(Circuit(1, (x(0), measure(0))), cairo)
    with pytest.raises(SimulationError):
        simulate_noisy(sched, cusco, OFF, 10)


def test_noise_config_round_trip():
    cfg = NoiseConfig(static_detuning=(0.1, 0.2), rng_seed=4)
    assert NoiseConfig.from_dict(cfg.to_dict()) == cfg
