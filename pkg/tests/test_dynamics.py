import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctrlvqe.dynamics import (
    NumericalError,
    Trajectory,
    evolve,
    fidelity_map,
    measure_energy,
    save_fidelity_map,
    time_grid,
)
from ctrlvqe.model import (
    ConfigurationError,
    DeviceSpec,
    Problem,
    TWO_PI,
    basis_state,
    build_static_hamiltonian,
    default_device,
    random_hermitian,
    with_steps_per_ns,
)
from ctrlvqe.pulses import Parameterization, PulseEnsemble, initialize_parameters, window_grid
from oracles import ode_rotating_frame, product_formula


def random_pulse(device, T, seed, form=Parameterization.AB, dsmin=3.0, scale=1.0):
    p = PulseEnsemble.zeros(form, window_grid(T, dsmin), device)
    return p.with_vector(scale * initialize_parameters(p, device.omega_max, "random", seed))


def infidelity(a, b):
    return 1.0 - abs(np.vdot(a, b)) ** 2


@pytest.mark.parametrize("T, steps", [(10.0, 20), (23.8, 20), (0.01, 20), (1.0, 7)])
def test_time_grid_invariants(T, steps):
    g = time_grid(T, steps)
    assert g.r == math.ceil(steps * T - 1e-9)
    assert abs(g.r * g.tau - T) < 1e-12
    assert g.times[0] == 0.0 and g.times[-1] == T


@pytest.mark.parametrize("T", [0.5, 7.3, 20.0])
def test_zero_pulse_is_identity(T):
    dev = default_device(3)
    p = PulseEnsemble.zeros(Parameterization.AB, window_grid(T, 3.0), dev)
    rng = np.random.default_rng(1)
    psi = rng.normal(size=8) + 1j * rng.normal(size=8)
    psi /= np.linalg.norm(psi)
    assert np.max(np.abs(evolve(psi, p, dev, T) - psi)) < 1e-10


def test_resonant_pi_pulse_flips_qubit():
    dev = default_device(1)
    omega = 0.02 * TWO_PI
    T = math.pi / (2 * omega)
    p = PulseEnsemble.zeros(Parameterization.A, window_grid(T, T), dev).with_vector([omega])
    psi = evolve(basis_state(1, 0), p, dev, T)
    assert abs(psi[1]) ** 2 >= 1 - 1e-4


def test_matches_dense_product_formula():
    """Window edges on Trotter nodes: each half-step sees one window."""
    dev = default_device(2)
    T = 9.0
    pulse = random_pulse(dev, T, seed=3, form=Parameterization.ABD)
    pulse = pulse.with_vector(np.concatenate([pulse.to_vector()[:-2], [0.3, -0.2]]))
    grid = time_grid(T, dev.steps_per_ns)
    t = grid.times
    amps = pulse.amplitudes()
    carrier = np.exp(1j * np.outer(pulse.drive_freqs, t))
    left = amps[:, np.clip(np.floor((t - grid.tau / 4) / 3.0).astype(int), 0, 2)] * carrier
    right = amps[:, np.clip(np.floor((t + grid.tau / 4) / 3.0).astype(int), 0, 2)] * carrier
    psi0 = basis_state(2, 1)
    expected = product_formula(build_static_hamiltonian(dev), left, right, grid.tau, T, psi0)
    assert np.max(np.abs(evolve(psi0, pulse, dev, T) - expected)) < 1e-10


def test_close_to_exact_dynamics():
    dev = default_device(2)
    T = 6.0
    pulse = random_pulse(dev, T, seed=8)
    psi0 = basis_state(2, 0)
    _, states = ode_rotating_frame(
        build_static_hamiltonian(dev), 2, lambda t: pulse.sample([t])[:, 0], pulse.drive_freqs, T, psi0
    )
    assert infidelity(states[-1], evolve(psi0, pulse, dev, T)) < 1e-8


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_self_convergence_against_fine_grid(seed):
    dev = default_device(2)
    pulse = random_pulse(dev, 10.0, seed)
    psi0 = basis_state(2, seed % 4)
    coarse = evolve(psi0, pulse, dev)
    fine = evolve(psi0, pulse, with_steps_per_ns(dev, 200))
    assert infidelity(coarse, fine) <= 1e-6


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_second_order_convergence(seed):
    dev = default_device(2)
    # dsmin = 2.3 puts window edges between Trotter nodes
    pulse = random_pulse(dev, 10.0, seed, dsmin=2.3, scale=3.0)
    psi0 = basis_state(2, 0)
    ref = evolve(psi0, pulse, with_steps_per_ns(dev, 400))
    e20 = np.linalg.norm(evolve(psi0, pulse, with_steps_per_ns(dev, 20)) - ref)
    e40 = np.linalg.norm(evolve(psi0, pulse, with_steps_per_ns(dev, 40)) - ref)
    assert 3.0 < e20 / e40 < 5.0


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), T=st.floats(1.0, 50.0))
def test_norm_preserved(seed, T):
    dev = default_device(2)
    psi = evolve(basis_state(2, 3), random_pulse(dev, T, seed, scale=5.0), dev, T)
    assert abs(np.linalg.norm(psi) - 1.0) < 1e-10


def test_zero_drive_energy_is_frame_independent():
    dev = default_device(2)
    O = random_hermitian(4, 2)
    problem = Problem(2, O, 1)
    energies = []
    for T in (0.3, 5.0, 17.7, 40.0):
        p = PulseEnsemble.zeros(Parameterization.AB, window_grid(T, 3.0), dev)
        energies.append(measure_energy(evolve(problem.reference_state(), p, dev, T), problem))
    assert np.ptp(energies) < 1e-10


def test_composition_over_split_interval():
    dev = default_device(2)
    T = 10.0
    # windows of 2.5 ns put an edge at T/2 and others between nodes
    pulse = random_pulse(dev, T, seed=5, form=Parameterization.ABD, dsmin=2.4)
    pulse = pulse.with_vector(np.concatenate([pulse.to_vector()[:-2], [0.2, 0.1]]))
    psi0 = basis_state(2, 2)
    full = evolve(psi0, pulse, dev, T)
    half = evolve(psi0, pulse, dev, T / 2)
    split = evolve(half, pulse, dev, T, t0=T / 2)
    assert np.max(np.abs(full - split)) < 1e-10


def test_recorded_trajectory():
    dev = default_device(2)
    pulse = random_pulse(dev, 6.0, seed=2)
    traj = evolve(basis_state(2, 0), pulse, dev, record=True)
    assert len(traj) == 121
    assert np.allclose(np.linalg.norm(traj.states, axis=1), 1.0, atol=1e-10)
    assert np.array_equal(traj.states[0], basis_state(2, 0))
    assert np.max(np.abs(traj.states[-1] - evolve(basis_state(2, 0), pulse, dev))) < 1e-12
    # the intermediate records agree with shorter evolutions on the same grid
    assert np.max(np.abs(traj.states[60] - evolve(basis_state(2, 0), pulse, dev, 3.0))) < 1e-10


def test_trajectory_save_load(tmp_path):
    dev = default_device(1)
    traj = evolve(basis_state(1, 0), random_pulse(dev, 2.0, 1), dev, record=True)
    for name in ("t.npz", "t.json"):
        traj.save(tmp_path / name)
        back = Trajectory.load(tmp_path / name)
        assert np.allclose(back.states, traj.states, atol=1e-15)


def test_mismatched_inputs_rejected():
    dev2 = default_device(2)
    pulse1 = random_pulse(default_device(1), 3.0, 0)
    with pytest.raises(ConfigurationError):
        evolve(basis_state(2, 0), pulse1, dev2)
    with pytest.raises(ConfigurationError):
        evolve(basis_state(1, 0), random_pulse(dev2, 3.0, 0), dev2)
    with pytest.raises(ConfigurationError, match="cover"):
        evolve(basis_state(2, 0), random_pulse(dev2, 3.0, 0), dev2, T=4.0)


def test_measure_energy_cases():
    rng = np.random.default_rng(0)
    psi = rng.normal(size=8) + 1j * rng.normal(size=8)
    psi /= np.linalg.norm(psi)
    assert measure_energy(psi, Problem(3, np.eye(8))) == pytest.approx(1.0, abs=1e-14)
    D = np.diag([0.5, -1.0, 2.0, 3.0])
    assert measure_energy(basis_state(2, 1), Problem(2, D)) == -1.0
    O = random_hermitian(8, 4)
    direct = sum(psi[i].conjugate() * O[i, j] * psi[j] for i in range(8) for j in range(8)).real
    assert abs(measure_energy(psi, Problem(3, O)) - direct) < 1e-12


def test_measure_energy_rejects_imaginary_expectation():
    problem = Problem(1, np.eye(2))
    object.__setattr__(problem, "observable", np.array([[0, 1], [0, 0]], dtype=complex))
    with pytest.raises(NumericalError):
        measure_energy(np.array([1, 1j]) / math.sqrt(2), problem)


def test_fidelity_maps(tmp_path):
    dev = default_device(2)
    a = evolve(basis_state(2, 0), random_pulse(dev, 5.0, 1), dev, record=True)
    b = evolve(basis_state(2, 0), random_pulse(dev, 5.0, 2), dev, record=True)
    F = fidelity_map(a, a)
    assert np.allclose(np.diag(F), 1.0, atol=1e-12)
    G = fidelity_map(a, b)
    assert G[0, 0] == pytest.approx(1.0, abs=1e-12)
    assert np.all((G >= 0) & (G <= 1))
    zeros = np.tile(basis_state(2, 0), (4, 1))
    ones = np.tile(basis_state(2, 3), (5, 1))
    assert np.array_equal(fidelity_map(zeros, ones), np.zeros((4, 5)))
    with pytest.raises(ConfigurationError):
        fidelity_map(zeros, np.ones((3, 8)))
    save_fidelity_map(G, tmp_path / "f.csv")
    assert np.allclose(np.loadtxt(tmp_path / "f.csv", delimiter=","), G, atol=1e-11)


def test_single_qubit_device_without_couplings():
    dev = DeviceSpec(1, [TWO_PI * 5.0], steps_per_ns=10)
    psi = evolve(basis_state(1, 0), random_pulse(dev, 4.0, 0), dev)
    assert abs(np.linalg.norm(psi) - 1) < 1e-12
