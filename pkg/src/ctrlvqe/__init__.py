"""Pulse-level variational eigensolver for chains of coupled two-level transmons."""
from .analysis import (
    RabiSetting,
    SweepRow,
    detect_transition,
    emet_sweep,
    multistart,
    rabi_trajectory,
    simulate_rabi,
    sweep_summary,
)
from .dynamics import NumericalError, Trajectory, evolve, fidelity_map, measure_energy, time_grid
from .gradients import energy_gradient, gradient_signals, quantum_fisher_rank
from .model import (
    ConfigurationError,
    DeviceSpec,
    Problem,
    build_static_hamiltonian,
    default_device,
    exact_ground_energy,
    load_device,
    load_problem,
)
from .optimize import Objective, OptimizerConfig, OptResult, bfgs_minimize, minimize_energy, penalty
from .pulses import (
    Parameterization,
    PulseEnsemble,
    WindowGrid,
    drive_value,
    initialize_parameters,
    resolve_label,
    window_grid,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "DeviceSpec",
    "NumericalError",
    "Objective",
    "OptResult",
    "OptimizerConfig",
    "Parameterization",
    "Problem",
    "PulseEnsemble",
    "RabiSetting",
    "SweepRow",
    "Trajectory",
    "WindowGrid",
    "bfgs_minimize",
    "build_static_hamiltonian",
    "default_device",
    "detect_transition",
    "drive_value",
    "emet_sweep",
    "energy_gradient",
    "evolve",
    "exact_ground_energy",
    "fidelity_map",
    "gradient_signals",
    "initialize_parameters",
    "load_device",
    "load_problem",
    "measure_energy",
    "minimize_energy",
    "multistart",
    "penalty",
    "quantum_fisher_rank",
    "rabi_trajectory",
    "resolve_label",
    "simulate_rabi",
    "sweep_summary",
    "time_grid",
    "window_grid",
]
