"""Analytic energy gradients by one forward and one backward sweep.

With ``psi_i`` the lab-frame state after the right part ``U_i^(r)`` of the
propagator and ``lambda_i = U_i^(l)^dag O psi_R`` the costate, the gradient
signals are

    phi^(x)_qi = Im <lambda_i| Q_q |psi_i>,   phi^(y)_qi = Im <lambda_i| P_q |psi_i>

with ``Q = a + a^dag`` and ``P = i (a - a^dag)``.  The derivative of the energy
with respect to the drive coefficient ``x_qi + i y_qi`` of one half-step is
``tau * phi_qi``; within-step commutators are neglected, which is accurate
to ``O(tau^2 |Omega|^2)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dynamics import (
    NumericalError,
    TimeGrid,
    half_step_weights,
    node_coefficients,
    static_propagator,
    step_matrices,
    time_grid,
    evolve,
)
from .model import ConfigurationError, DeviceSpec, Problem, check_state
from .pulses import Parameterization, PulseEnsemble


@dataclass
class GradientSignals:
    times: np.ndarray
    tau: float
    phi_x: np.ndarray
    phi_y: np.ndarray
    energy: float

    @property
    def complex(self) -> np.ndarray:
        return self.phi_x + 1j * self.phi_y

    def save_csv(self, path: str | Path) -> None:
        n, m = self.phi_x.shape
        rows = np.column_stack(
            [
                np.tile(self.times, n),
                np.repeat(np.arange(1, n + 1), m),
                self.phi_x.reshape(-1),
                self.phi_y.reshape(-1),
            ]
        )
        np.savetxt(path, rows, delimiter=",", header="t,q,phi_x,phi_y", comments="", fmt="%.12g")


def _qubit_overlaps(bra: np.ndarray, ket: np.ndarray, n_qubits: int):
    """``<bra|Q_q|ket>`` and ``<bra|P_q|ket>`` for every row and qubit.

    ``bra`` and ``ket`` have shape ``(m, 2**n)``; results have shape ``(n, m)``.
    """
    m = bra.shape[0]
    Qs = np.empty((n_qubits, m), dtype=complex)
    Ps = np.empty((n_qubits, m), dtype=complex)
    for q in range(n_qubits):
        shape = (m, 2 ** (n_qubits - q - 1), 2, 2**q)
        b = bra.reshape(shape).conj()
        k = ket.reshape(shape)
        s01 = np.einsum("mik,mik->m", b[:, :, 0], k[:, :, 1])
        s10 = np.einsum("mik,mik->m", b[:, :, 1], k[:, :, 0])
        Qs[q] = s01 + s10
        Ps[q] = 1j * (s01 - s10)
    return Qs, Ps


def _sweep(pulse: PulseEnsemble, device: DeviceSpec, problem: Problem, T, reference):
    if problem.n_qubits != device.n_qubits:
        raise ConfigurationError("problem and device qubit counts differ")
    T = pulse.grid.T if T is None else T
    psi0 = problem.reference_state() if reference is None else check_state(reference, device.dim)
    grid = time_grid(T, device.steps_per_ns)
    steps = step_matrices(pulse, device, grid)
    states = np.empty((grid.r + 1, device.dim), dtype=complex)
    states[0] = psi0
    for j, M in enumerate(steps, start=1):
        states[j] = M @ states[j - 1]
    psi_R = static_propagator(device, -grid.T) @ states[-1]
    O_psi = problem.observable @ psi_R
    energy = np.vdot(psi_R, O_psi)
    if abs(energy.imag) >= 1e-10:
        raise NumericalError(f"energy has imaginary part {energy.imag:.3e}")
    costates = np.empty_like(states)
    costates[-1] = static_propagator(device, grid.T) @ O_psi
    for j in range(grid.r, 0, -1):
        costates[j - 1] = steps[j - 1].conj().T @ costates[j]
    return grid, states, costates, float(energy.real)


def gradient_signals(
    pulse: PulseEnsemble,
    device: DeviceSpec,
    problem: Problem,
    T: float | None = None,
    reference=None,
) -> GradientSignals:
    grid, states, costates, energy = _sweep(pulse, device, problem, T, reference)
    Qs, Ps = _qubit_overlaps(costates, states, device.n_qubits)
    phi_x, phi_y = Qs.imag, Ps.imag
    if not (np.all(np.isfinite(phi_x)) and np.all(np.isfinite(phi_y))):
        raise NumericalError("non-finite gradient signal")
    return GradientSignals(grid.times, grid.tau, phi_x, phi_y, energy)


def _half_step_exposure(pulse: PulseEnsemble, grid: TimeGrid):
    """Per-node window weights, half-step weights folded in (trapezoid ends get 1/2)."""
    left, right = half_step_weights(pulse.grid, grid)
    wl = np.full(grid.r + 1, 0.5)
    wr = np.full(grid.r + 1, 0.5)
    wl[0] = 0.0
    wr[-1] = 0.0
    return left * wl[:, None] + right * wr[:, None], wl, wr


def signals_to_gradient(pulse: PulseEnsemble, signals: GradientSignals, grid: TimeGrid) -> np.ndarray:
    """Chain rule from gradient signals to the pulse's parameter vector."""
    exposure, wl, wr = _half_step_exposure(pulse, grid)
    z = signals.complex
    phase = np.exp(-1j * np.outer(pulse.drive_freqs, grid.times))
    # dE/dOmega_qw as a complex number G with dE/dtheta = Re(conj(dOmega/dtheta) G)
    G = 2.0 * grid.tau * (phase * z) @ exposure
    param = pulse.parameterization
    wp = pulse.window_params
    if param.polar:
        A, phi = wp[..., 0], wp[..., 1]
        omega = A * np.exp(1j * phi) / 2.0
        amp_grad = np.stack([(np.exp(-1j * phi) / 2.0 * G).real, (omega.conj() * G).imag], axis=-1)
    elif param.per_window == 2:
        amp_grad = np.stack([G.real, G.imag], axis=-1)
    else:
        amp_grad = G.real[..., None]
    grad = amp_grad.reshape(-1)
    if param.has_detuning:
        c_left, c_right = node_coefficients(pulse, grid)
        c_eff = c_left * wl + c_right * wr
        det_grad = 2.0 * grid.tau * np.sum(grid.times * (c_eff.conj() * z).imag, axis=1)
        grad = np.concatenate([grad, det_grad])
    return grad


def energy_and_gradient(
    pulse: PulseEnsemble,
    device: DeviceSpec,
    problem: Problem,
    T: float | None = None,
    reference=None,
):
    """Energy and its gradient with respect to ``pulse.to_vector()``."""
    if not isinstance(pulse.parameterization, Parameterization):
        raise ConfigurationError(f"unknown parameterization {pulse.parameterization!r}")
    signals = gradient_signals(pulse, device, problem, T, reference)
    T = pulse.grid.T if T is None else T
    grid = time_grid(T, device.steps_per_ns)
    return signals.energy, signals_to_gradient(pulse, signals, grid)


def energy_gradient(pulse, device, problem, T=None, reference=None) -> np.ndarray:
    return energy_and_gradient(pulse, device, problem, T, reference)[1]


def state_jacobian(pulse, device, reference, T=None, step: float = 1e-4):
    """Final state and its central-difference derivatives, one column per parameter."""
    x = pulse.to_vector()
    psi = evolve(reference, pulse, device, T)
    D = np.empty((psi.size, x.size), dtype=complex)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = step
        plus = evolve(reference, pulse.with_vector(x + e), device, T)
        minus = evolve(reference, pulse.with_vector(x - e), device, T)
        D[:, k] = (plus - minus) / (2.0 * step)
    if not np.all(np.isfinite(D)):
        raise NumericalError("non-finite state derivative")
    return psi, D


def quantum_fisher_matrix(pulse, device, reference, T=None, step: float = 1e-4) -> np.ndarray:
    """``F_kl = 4 Re[<d_k psi|d_l psi> - <d_k psi|psi><psi|d_l psi>]``."""
    psi, D = state_jacobian(pulse, device, reference, T, step)
    overlap = psi.conj() @ D
    F = 4.0 * (D.conj().T @ D - np.outer(overlap.conj(), overlap)).real
    return (F + F.T) / 2.0


def quantum_fisher_rank(pulse, device, reference, T=None, step: float = 1e-4, rtol: float = 1e-8) -> int:
    """Effective quantum dimension: number of singular values above ``rtol * max(1, s_max)``."""
    F = quantum_fisher_matrix(pulse, device, reference, T, step)
    s = np.linalg.svd(F, compute_uv=False)
    if s.size == 0:
        return 0
    return int(np.sum(s > rtol * max(1.0, s[0])))
