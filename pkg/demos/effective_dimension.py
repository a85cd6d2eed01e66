"""Rank of the quantum Fisher information on four qubits, before and after a few optimizer steps.

Run: python3 demos/effective_dimension.py
"""
import numpy as np

from ctrlvqe.cli import fixture_path
from ctrlvqe.gradients import quantum_fisher_rank
from ctrlvqe.model import default_device, load_problem
from ctrlvqe.optimize import OptimizerConfig, minimize_energy
from ctrlvqe.pulses import Parameterization, PulseEnsemble, window_grid

device = default_device(4)
problem = load_problem(fixture_path("problem_4q"))
reference = problem.reference_state()

for T in (8.0, 12.0, 16.0):
    template = PulseEnsemble.zeros(Parameterization.AB, window_grid(T, 3.0), device)
    zero_rank = quantum_fisher_rank(template, device, reference)
    result, _ = minimize_energy(problem, device, template, np.zeros(template.n_params),
                                OptimizerConfig(max_iterations=3))
    rank = quantum_fisher_rank(template.with_vector(result.x), device, reference)
    print(f"T = {T:4.1f} ns  {template.n_params:3d} parameters  rank at zero pulse {zero_rank}, after 3 steps {rank}")
