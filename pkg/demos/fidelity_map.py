"""Overlap between the trajectories of two optimized pulses of different durations.

Run: python3 demos/fidelity_map.py
"""
import numpy as np

from ctrlvqe.cli import fixture_path
from ctrlvqe.dynamics import evolve, fidelity_map
from ctrlvqe.model import load_device, load_problem
from ctrlvqe.optimize import minimize_energy
from ctrlvqe.pulses import Parameterization, PulseEnsemble, window_grid

problem = load_problem(fixture_path("problem_2q"))
device = load_device(fixture_path("device_2q"))

trajectories = []
for T in (12.0, 18.0):
    template = PulseEnsemble.zeros(Parameterization.AB, window_grid(T, 3.0), device)
    result, _ = minimize_energy(problem, device, template, np.zeros(template.n_params))
    print(f"T = {T:4.1f} ns  final energy error {result.energy - np.linalg.eigvalsh(problem.observable)[0]:.2e}")
    trajectories.append(evolve(problem.reference_state(), template.with_vector(result.x), device,
                               record=True))

F = fidelity_map(trajectories[0], trajectories[1])
print(f"map shape {F.shape}; overlap of the two final states {F[-1, -1]:.6f}")
print(f"fraction of time pairs with overlap above 0.99: {np.mean(F > 0.99):.3f}")
