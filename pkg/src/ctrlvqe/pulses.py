"""Windowed drive pulses and their parameterizations.

Every qubit carries one drive ``Omega_q(t) exp(i nu_q t) a_q + h.c.`` whose
complex amplitude is piecewise constant over a uniform window grid.  The
supported parameterizations are

======  =======================================  ==========================
label   amplitude per window                     drive frequency
======  =======================================  ==========================
ab      ``Omega = alpha + i beta``               resonant
Aphi    ``Omega = A exp(i phi) / 2``             resonant
a       ``Omega = alpha`` (real)                 resonant
aD      ``Omega = alpha`` (real)                 one detuning per pulse
abD     ``Omega = alpha + i beta``               one detuning per pulse
======  =======================================  ==========================

The labels ``ab2`` and ``ab-inf`` are the ``ab`` form with a minimum window
length of 1.5 ns and of one Trotter step respectively.

Canonical parameter order: qubit-major, window-minor, the per-window
components in the order listed above (``alpha, beta`` or ``A, phi``), and
the per-qubit detunings appended last in qubit order.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .model import ConfigurationError, DeviceSpec

# Grid points within this fraction of a window of a boundary count as on it.
_BOUNDARY_RTOL = 1e-9


class Parameterization(enum.Enum):
    AB = "ab"
    APHI = "Aphi"
    A = "a"
    AD = "aD"
    ABD = "abD"

    @property
    def per_window(self) -> int:
        return 1 if self in (Parameterization.A, Parameterization.AD) else 2

    @property
    def has_detuning(self) -> bool:
        return self in (Parameterization.AD, Parameterization.ABD)

    @property
    def polar(self) -> bool:
        return self is Parameterization.APHI


LABELS = ("ab", "ab2", "ab-inf", "Aphi", "a", "aD", "abD")


def resolve_label(label: str, device: DeviceSpec, dsmin: float = 3.0):
    """Map a parameterization label to ``(Parameterization, window minimum)``.

    ``dsmin`` is used as-is except for the ``ab2`` and ``ab-inf`` variants,
    which fix it to 1.5 ns and to one Trotter step.
    """
    if label == "ab2":
        return Parameterization.AB, 1.5
    if label == "ab-inf":
        return Parameterization.AB, 1.0 / device.steps_per_ns
    try:
        return Parameterization(label), dsmin
    except ValueError:
        raise ConfigurationError(
            f"unknown parameterization '{label}' (expected one of {', '.join(LABELS)})"
        ) from None


@dataclass(frozen=True)
class WindowGrid:
    T: float
    n_windows: int
    window_length: float

    def boundaries(self) -> np.ndarray:
        edges = self.window_length * np.arange(self.n_windows + 1)
        edges[-1] = self.T
        return edges

    def window_index(self, t):
        """Window containing ``t``; windows are ``[start, end)``, the last one closed."""
        t = np.asarray(t, dtype=float)
        if np.any(t < -_BOUNDARY_RTOL * self.window_length) or np.any(
            t > self.T * (1 + 1e-12) + _BOUNDARY_RTOL * self.window_length
        ):
            raise ValueError(f"time outside pulse interval [0, {self.T}]")
        idx = np.floor(t / self.window_length + _BOUNDARY_RTOL).astype(int)
        return np.clip(idx, 0, self.n_windows - 1)


def window_grid(T: float, dsmin: float) -> WindowGrid:
    """As many equal windows as fit in ``T`` without any being shorter than ``dsmin``."""
    if not (T > 0 and dsmin > 0):
        raise ValueError("pulse duration and minimum window length must be positive")
    n = max(1, math.floor(T / dsmin + 1e-9))
    return WindowGrid(float(T), n, T / n)


def param_count(parameterization: Parameterization, n_qubits: int, n_windows: int) -> int:
    count = parameterization.per_window * n_qubits * n_windows
    if parameterization.has_detuning:
        count += n_qubits
    return count


@dataclass(frozen=True)
class PulseEnsemble:
    """One windowed drive per qubit, all sharing the same window grid.

    ``window_params`` has shape ``(n_qubits, n_windows, per_window)`` and
    ``detunings`` (rad/ns) is all zeros for the resonant parameterizations.
    """

    parameterization: Parameterization
    grid: WindowGrid
    qubit_freqs: tuple[float, ...]
    window_params: np.ndarray
    detunings: np.ndarray

    def __post_init__(self):
        shape = (self.n_qubits, self.grid.n_windows, self.parameterization.per_window)
        wp = np.asarray(self.window_params, dtype=float)
        if wp.shape != shape:
            raise ValueError(f"window_params has shape {wp.shape}, expected {shape}")
        det = np.asarray(self.detunings, dtype=float)
        if det.shape != (self.n_qubits,):
            raise ValueError("one detuning per qubit expected")
        if not self.parameterization.has_detuning and np.any(det != 0.0):
            raise ValueError(f"{self.parameterization.value} pulses are resonant")
        object.__setattr__(self, "window_params", wp)
        object.__setattr__(self, "detunings", det)

    @classmethod
    def zeros(cls, parameterization: Parameterization, grid: WindowGrid, device: DeviceSpec):
        n = device.n_qubits
        return cls(
            parameterization,
            grid,
            device.qubit_freqs,
            np.zeros((n, grid.n_windows, parameterization.per_window)),
            np.zeros(n),
        )

    @property
    def n_qubits(self) -> int:
        return len(self.qubit_freqs)

    @property
    def n_params(self) -> int:
        return param_count(self.parameterization, self.n_qubits, self.grid.n_windows)

    @property
    def drive_freqs(self) -> np.ndarray:
        return np.asarray(self.qubit_freqs) + self.detunings

    def amplitudes(self) -> np.ndarray:
        """Complex window amplitudes, shape ``(n_qubits, n_windows)``."""
        wp = self.window_params
        if self.parameterization.polar:
            return wp[..., 0] * np.exp(1j * wp[..., 1]) / 2.0
        if self.parameterization.per_window == 2:
            return wp[..., 0] + 1j * wp[..., 1]
        return wp[..., 0].astype(complex)

    def sample(self, times) -> np.ndarray:
        """Complex amplitudes at ``times``, shape ``(n_qubits, len(times))``."""
        return self.amplitudes()[:, self.grid.window_index(times)]

    def to_vector(self) -> np.ndarray:
        x = self.window_params.reshape(-1)
        if self.parameterization.has_detuning:
            x = np.concatenate([x, self.detunings])
        return x.copy()

    def with_vector(self, x) -> "PulseEnsemble":
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {x.shape}")
        n_amp = self.window_params.size
        det = x[n_amp:] if self.parameterization.has_detuning else np.zeros(self.n_qubits)
        return PulseEnsemble(
            self.parameterization,
            self.grid,
            self.qubit_freqs,
            x[:n_amp].reshape(self.window_params.shape),
            det,
        )

    def to_json_dict(self) -> dict:
        edges = self.grid.boundaries().tolist()
        return {
            "parameterization": self.parameterization.value,
            "T_ns": self.grid.T,
            "window_boundaries_ns": [edges] * self.n_qubits,
            "parameters": self.to_vector().tolist(),
            "drive_freqs_rad_per_ns": self.drive_freqs.tolist(),
            "qubit_freqs_rad_per_ns": list(self.qubit_freqs),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "PulseEnsemble":
        try:
            param = Parameterization(data["parameterization"])
            edges = data["window_boundaries_ns"][0]
            T = float(data["T_ns"])
            grid = WindowGrid(T, len(edges) - 1, T / (len(edges) - 1))
            template = cls(
                param,
                grid,
                tuple(data["qubit_freqs_rad_per_ns"]),
                np.zeros((len(data["qubit_freqs_rad_per_ns"]), grid.n_windows, param.per_window)),
                np.zeros(len(data["qubit_freqs_rad_per_ns"])),
            )
            return template.with_vector(data["parameters"])
        except (KeyError, IndexError, ValueError, TypeError) as exc:
            raise ConfigurationError(f"pulse file: {exc}") from exc


def drive_value(pulse: PulseEnsemble, q: int, t: float):
    """``(Omega, nu)`` of the drive on qubit ``q`` (1-based) at time ``t``."""
    if not 1 <= q <= pulse.n_qubits:
        raise ValueError(f"qubit {q} out of range")
    if t < 0 or t > pulse.grid.T:
        raise ValueError(f"t = {t} outside [0, {pulse.grid.T}]")
    w = int(pulse.grid.window_index(t))
    return complex(pulse.amplitudes()[q - 1, w]), float(pulse.drive_freqs[q - 1])


def initialize_parameters(
    pulse: PulseEnsemble,
    omega_max: float,
    mode: str = "zero",
    seed: int | None = None,
    detuning_range: float | None = None,
) -> np.ndarray:
    """Starting vector for an optimization.

    ``random`` draws Cartesian components from ``U(-omega_max/sqrt2, omega_max/sqrt2)``,
    real-only amplitudes from ``U(-omega_max, omega_max)``, and polar pulses
    from the equivalent Cartesian draw, so ``|Omega| <= omega_max`` holds.
    Detunings stay zero unless ``detuning_range`` is given, in which case
    they are drawn from ``U(-detuning_range, detuning_range)``.
    """
    x = np.zeros(pulse.n_params)
    if mode == "zero":
        return x
    if mode != "random":
        raise ValueError(f"unknown initialization mode '{mode}'")
    rng = np.random.default_rng(seed)
    shape = pulse.window_params.shape
    param = pulse.parameterization
    if param.per_window == 1:
        wp = rng.uniform(-omega_max, omega_max, size=shape)
    else:
        bound = omega_max / np.sqrt(2.0)
        wp = rng.uniform(-bound, bound, size=shape)
        if param.polar:
            omega = wp[..., 0] + 1j * wp[..., 1]
            wp = np.stack([2.0 * np.abs(omega), np.angle(omega)], axis=-1)
    x[: wp.size] = wp.reshape(-1)
    if param.has_detuning and detuning_range:
        x[wp.size :] = rng.uniform(-detuning_range, detuning_range, size=pulse.n_qubits)
    return x
