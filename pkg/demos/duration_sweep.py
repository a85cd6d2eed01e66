"""Energy error and iteration count against pulse duration on the bundled 2-qubit problem.

Run: python3 demos/duration_sweep.py
"""
from ctrlvqe.analysis import emet_sweep, sweep_summary
from ctrlvqe.cli import fixture_path
from ctrlvqe.model import load_device, load_problem
from ctrlvqe.pulses import Parameterization

problem = load_problem(fixture_path("problem_2q"))
device = load_device(fixture_path("device_2q"))
rows = emet_sweep(problem, device, Parameterization.AB, 3.0, [float(T) for T in range(2, 21)])

print(" T (ns)   error (Ha)   iterations")
for row in rows:
    print(f"{row.T_ns:7.1f}   {row.error_ha:10.3e}   {row.iterations:5d}")

summary = sweep_summary(rows)
print(f"minimal evolution time {summary['T_star_ns']} ns, iteration peak at {summary['iteration_peak_T_ns']} ns")
