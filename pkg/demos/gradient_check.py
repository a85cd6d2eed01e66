"""Analytic gradient against central finite differences for every pulse parameterization.

Run: python3 demos/gradient_check.py
"""
import numpy as np

from ctrlvqe.dynamics import evolve, measure_energy
from ctrlvqe.gradients import energy_gradient
from ctrlvqe.model import Problem, default_device, random_hermitian
from ctrlvqe.pulses import Parameterization, PulseEnsemble, initialize_parameters, window_grid

device = default_device(2)
problem = Problem(2, random_hermitian(4, 1), reference_index=1)


def energy(pulse):
    return measure_energy(evolve(problem.reference_state(), pulse, device), problem)


for form in Parameterization:
    template = PulseEnsemble.zeros(form, window_grid(8.0, 3.0), device)
    x = initialize_parameters(template, device.omega_max, "random", 0, detuning_range=0.2)
    pulse = template.with_vector(x)
    analytic = energy_gradient(pulse, device, problem)
    h = 1e-5
    fd = np.array([
        (energy(pulse.with_vector(x + h * e)) - energy(pulse.with_vector(x - h * e))) / (2 * h)
        for e in np.eye(x.size)
    ])
    rel = np.max(np.abs(analytic - fd)) / np.max(np.abs(fd))
    print(f"{form.value:5s} {x.size:3d} parameters  relative error {rel:.2e}")
