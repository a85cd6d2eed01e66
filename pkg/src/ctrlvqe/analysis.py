"""Single-qubit Rabi oracle and duration sweeps (energy error and iterations vs T)."""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .dynamics import evolve
from .model import TWO_PI, DeviceSpec, Problem, basis_state, exact_ground_energy
from .optimize import OptimizerConfig, minimize_energy
from .pulses import (
    Parameterization,
    PulseEnsemble,
    initialize_parameters,
    window_grid,
)

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class RabiSetting:
    """Constant drive ``Omega = A exp(i phi) / 2`` detuned by ``detuning`` (rad/ns)."""

    A: float
    detuning: float = 0.0
    phi: float = 0.0

    @property
    def rabi_frequency(self) -> float:
        return math.hypot(self.A, self.detuning)

    @property
    def theta_max(self) -> float:
        # atan2 gives pi at zero detuning and stays valid for negative detuning
        return 2.0 * math.atan2(self.A, self.detuning)


def rabi_trajectory(setting: RabiSetting, t):
    """Bloch vector ``(<X>, <Y>, <Z>)`` at time(s) ``t``, starting from ``|0>``."""
    t = np.asarray(t, dtype=float)
    lam = setting.rabi_frequency
    if lam == 0.0:
        zero = np.zeros_like(t)
        return zero, zero.copy(), np.ones_like(t)
    th = setting.theta_max
    D = setting.detuning
    s2 = np.sin(lam * t / 2.0) ** 2
    x = -math.sin(th / 2) * np.sin(D * t) * np.sin(lam * t) + math.sin(th) * np.cos(D * t) * s2
    y = -math.sin(th / 2) * np.cos(D * t) * np.sin(lam * t) - math.sin(th) * np.sin(D * t) * s2
    c, s = math.cos(setting.phi), math.sin(setting.phi)
    X = x * c + y * s
    Y = y * c - x * s
    Z = np.cos(lam * t / 2.0) ** 2 + s2 * math.cos(th)
    return X, Y, Z


def bloch_vectors(states) -> np.ndarray:
    """``(<X>, <Y>, <Z>)`` rows for single-qubit states, shape ``(m, 3)``."""
    states = np.atleast_2d(states)
    return np.stack(
        [np.einsum("mi,ij,mj->m", states.conj(), P, states).real for P in (PAULI_X, PAULI_Y, PAULI_Z)],
        axis=1,
    )


def simulate_rabi(setting: RabiSetting, T: float, steps_per_ns: int = 20, qubit_freq_ghz: float = 4.82):
    """Trajectory of one driven qubit from ``|0>`` using the Trotterized simulator.

    Returns ``(times, bloch)`` with ``bloch`` of shape ``(m, 3)``.
    """
    device = DeviceSpec(1, [2 * math.pi * qubit_freq_ghz], steps_per_ns=steps_per_ns)
    pulse = PulseEnsemble(
        Parameterization.ABD,
        window_grid(T, T),
        device.qubit_freqs,
        np.array([[[setting.A * math.cos(setting.phi) / 2, setting.A * math.sin(setting.phi) / 2]]]),
        np.array([setting.detuning]),
    )
    traj = evolve(basis_state(1, 0), pulse, device, T, record=True)
    return traj.times, bloch_vectors(traj.states)


def rabi_settings_grid(bound: float = 0.2 * TWO_PI, n_amp: int = 5, n_det: int = 5, n_phase: int = 4):
    """Evenly spaced settings with ``0 < A <= bound``, ``|detuning| <= bound``, phases in ``[0, 2pi)``."""
    amps = np.linspace(bound / n_amp, bound, n_amp)
    detunings = np.linspace(-bound, bound, n_det)
    phases = np.linspace(0.0, 2 * np.pi, n_phase, endpoint=False)
    return [RabiSetting(float(a), float(d), float(p)) for a in amps for d in detunings for p in phases]


def rabi_comparison(settings, T: float, steps_per_ns: int = 20) -> list[dict]:
    """Max per-component deviation between simulator and oracle for each setting."""
    rows = []
    for s in settings:
        times, sim = simulate_rabi(s, T, steps_per_ns)
        exact = np.stack(rabi_trajectory(s, times), axis=1)
        rows.append(
            {"A": s.A, "detuning": s.detuning, "phi": s.phi, "T_ns": T,
             "max_deviation": float(np.max(np.abs(sim - exact)))}
        )
    return rows


@dataclass
class SweepRow:
    T_ns: float
    n_windows: int
    energy_ha: float
    error_ha: float
    iterations: int
    f_evals: int
    g_evals: int
    converged: bool
    init_mode: str
    seed: int | None = None


SWEEP_COLUMNS = [f.name for f in fields(SweepRow)]


def _coerce_row(raw: dict) -> SweepRow:
    seed = raw.get("seed", "")
    return SweepRow(
        T_ns=float(raw["T_ns"]),
        n_windows=int(raw["n_windows"]),
        energy_ha=float(raw["energy_ha"]),
        error_ha=float(raw["error_ha"]),
        iterations=int(raw["iterations"]),
        f_evals=int(raw["f_evals"]),
        g_evals=int(raw["g_evals"]),
        converged=str(raw["converged"]) in ("True", "true", "1"),
        init_mode=raw["init_mode"],
        seed=None if seed in ("", None, "None") else int(seed),
    )


def read_sweep_csv(path: str | Path) -> list[SweepRow]:
    with open(path, newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return [_coerce_row(r) for r in csv.DictReader(lines)]


class _SweepWriter:
    """Single writer that appends rows to a CSV, creating it with a provenance header."""

    def __init__(self, path, provenance: dict | None):
        self.path = Path(path) if path is not None else None
        if self.path is not None and not self.path.exists():
            with open(self.path, "w", newline="") as fh:
                for key, value in (provenance or {}).items():
                    fh.write(f"# {key}: {json.dumps(value)}\n")
                csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS).writeheader()

    def write(self, row: SweepRow) -> None:
        if self.path is None:
            return
        with open(self.path, "a", newline="") as fh:
            values = asdict(row)
            values["energy_ha"] = repr(row.energy_ha)
            values["error_ha"] = repr(row.error_ha)
            values["seed"] = "" if row.seed is None else row.seed
            csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS).writerow(values)


def optimize_point(problem, device, parameterization, dsmin, T, init_mode="zero", seed=None,
                   config=None, sampler=None, detuning_range=None):
    """One optimization at fixed duration; returns ``(SweepRow, OptResult, Objective)``."""
    config = OptimizerConfig() if config is None else config
    if problem.ground_energy is None:
        exact_ground_energy(problem)
    template = PulseEnsemble.zeros(parameterization, window_grid(T, dsmin), device)
    if sampler is not None:
        x0 = np.asarray(sampler(template, seed), dtype=float)
    else:
        x0 = initialize_parameters(template, device.omega_max, init_mode, seed, detuning_range)
    result, objective = minimize_energy(problem, device, template, x0, config)
    row = SweepRow(
        T_ns=float(T),
        n_windows=template.grid.n_windows,
        energy_ha=result.energy,
        error_ha=result.energy - problem.ground_energy,
        iterations=result.iterations,
        f_evals=result.f_evals,
        g_evals=result.g_evals,
        converged=result.converged,
        init_mode=init_mode if sampler is None else "custom",
        seed=seed,
    )
    return row, result, objective


def _point_task(args):
    row, _, _ = optimize_point(*args)
    return row


def _run_points(tasks, writer: _SweepWriter, jobs: int) -> list[SweepRow]:
    """Run tasks, writing rows in task order as soon as each prefix is complete."""
    rows: list[SweepRow | None] = [None] * len(tasks)
    next_to_write = 0

    def flush():
        nonlocal next_to_write
        while next_to_write < len(rows) and rows[next_to_write] is not None:
            writer.write(rows[next_to_write])
            next_to_write += 1

    if jobs <= 1 or len(tasks) <= 1:
        for i, task in enumerate(tasks):
            rows[i] = _point_task(task)
            flush()
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_point_task, task) for task in tasks]
            for i, fut in enumerate(futures):
                rows[i] = fut.result()
                flush()
    return rows


def emet_sweep(
    problem: Problem,
    device: DeviceSpec,
    parameterization: Parameterization,
    dsmin: float,
    T_list,
    init_mode: str = "zero",
    config: OptimizerConfig | None = None,
    seed: int | None = None,
    csv_path: str | Path | None = None,
    provenance: dict | None = None,
    jobs: int = 1,
) -> list[SweepRow]:
    """Optimize at every duration in ``T_list`` and collect one row per duration.

    With ``csv_path`` each row is appended as soon as it (and every earlier
    row) is available; durations already present in an existing file are
    read back instead of recomputed.
    """
    T_list = [float(T) for T in T_list]
    if not T_list:
        raise ValueError("T_list must not be empty")
    if any(b <= a for a, b in zip(T_list, T_list[1:])):
        raise ValueError("T_list must be strictly ascending")
    exact_ground_energy(problem)
    done = {}
    if csv_path is not None and Path(csv_path).exists():
        done = {row.T_ns: row for row in read_sweep_csv(csv_path)}
    writer = _SweepWriter(csv_path, provenance)
    todo = [T for T in T_list if T not in done]
    tasks = [(problem, device, parameterization, dsmin, T, init_mode, seed, config) for T in todo]
    fresh = dict(zip(todo, _run_points(tasks, writer, jobs)))
    return [done[T] if T in done else fresh[T] for T in T_list]


def restart_seeds(seed: int, n_restarts: int) -> list[int]:
    """Independent, reproducible per-run seeds derived from one master seed."""
    state = np.random.SeedSequence(seed).generate_state(n_restarts, dtype=np.uint32)
    return [int(s) for s in state]


def multistart(
    problem: Problem,
    device: DeviceSpec,
    parameterization: Parameterization,
    dsmin: float,
    T_list,
    n_restarts: int,
    seed: int = 0,
    config: OptimizerConfig | None = None,
    sampler=None,
    detuning_range: float | None = None,
    csv_path: str | Path | None = None,
    provenance: dict | None = None,
    jobs: int = 1,
) -> list[SweepRow]:
    """Randomly initialized optimizations, ``n_restarts`` per duration.

    Run seeds come from :func:`restart_seeds`; as in :func:`emet_sweep`,
    ``(T, seed)`` pairs already present in ``csv_path`` are not rerun.
    """
    if n_restarts < 1:
        raise ValueError("n_restarts must be at least 1")
    exact_ground_energy(problem)
    seeds = restart_seeds(seed, n_restarts)
    done = {}
    if csv_path is not None and Path(csv_path).exists():
        done = {(row.T_ns, row.seed): row for row in read_sweep_csv(csv_path)}
    keys = [(float(T), s) for T in T_list for s in seeds]
    todo = [k for k in keys if k not in done]
    tasks = [
        (problem, device, parameterization, dsmin, T, "random", s, config, sampler, detuning_range)
        for T, s in todo
    ]
    fresh = dict(zip(todo, _run_points(tasks, _SweepWriter(csv_path, provenance), jobs)))
    return [done[k] if k in done else fresh[k] for k in keys]


def best_by_duration(rows) -> dict[float, SweepRow]:
    best = {}
    for row in rows:
        if row.T_ns not in best or row.error_ha < best[row.T_ns].error_ha:
            best[row.T_ns] = row
    return dict(sorted(best.items()))


def detect_transition(rows, threshold: float = 1e-8) -> float | None:
    """First duration whose (best) energy error falls below ``threshold``."""
    for T, row in best_by_duration(rows).items():
        if row.error_ha < threshold:
            return T
    return None


def sweep_summary(rows, threshold: float = 1e-8) -> dict:
    best = best_by_duration(rows)
    peak = max(best.values(), key=lambda r: r.iterations) if best else None
    return {
        "T_star_ns": detect_transition(rows, threshold),
        "threshold_ha": threshold,
        "n_rows": len(rows),
        "best_error_by_T": {str(T): r.error_ha for T, r in best.items()},
        "iteration_peak_T_ns": None if peak is None else peak.T_ns,
    }
