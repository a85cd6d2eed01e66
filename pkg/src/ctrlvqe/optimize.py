"""Penalized energy objective and a BFGS minimizer with a strong-Wolfe line search."""
from __future__ import annotations

import csv
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import evolve, measure_energy, time_grid
from .gradients import energy_and_gradient
from .model import DeviceSpec, Problem
from .pulses import PulseEnsemble


@dataclass
class OptimizerConfig:
    g_tol: float = 1e-6
    max_iterations: int = 10000
    penalty_weight: float = 1.0
    c1: float = 1e-4
    c2: float = 0.9

    def __post_init__(self):
        if not self.g_tol > 0:
            raise ValueError("g_tol must be positive")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")
        if self.penalty_weight < 0:
            raise ValueError("penalty_weight must be non-negative")
        if not 0 < self.c1 < self.c2 < 1:
            raise ValueError("line search needs 0 < c1 < c2 < 1")


@dataclass
class OptResult:
    x: np.ndarray
    fun: float
    energy: float
    penalty: float
    gradient_norm: float
    iterations: int
    f_evals: int
    g_evals: int
    converged: bool
    reason: str
    trace: list = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        return {
            "objective": self.fun,
            "energy": self.energy,
            "penalty": self.penalty,
            "gradient_linf": self.gradient_norm,
            "iterations": self.iterations,
            "f_evals": self.f_evals,
            "g_evals": self.g_evals,
            "converged": self.converged,
            "reason": self.reason,
        }


def penalty(pulse: PulseEnsemble, device: DeviceSpec, weight: float = 1.0, T: float | None = None):
    """Quadratic hinge on every grid point where ``|Omega| > omega_max``.

    ``value = weight * tau * sum_{q,i} max(0, |Omega_q(t_i)| - omega_max)^2``;
    returns ``(value, gradient)`` with the gradient over ``pulse.to_vector()``.
    """
    T = pulse.grid.T if T is None else T
    grid = time_grid(T, device.steps_per_ns)
    windows = pulse.grid.window_index(grid.times)
    modulus = np.abs(pulse.amplitudes())
    excess = np.clip(modulus[:, windows] - device.omega_max, 0.0, None)
    value = weight * grid.tau * float(np.sum(excess**2))
    grad = np.zeros(pulse.n_params)
    if value == 0.0:
        return 0.0, grad
    # d value / d|Omega_qw|, accumulated over the grid points in each window
    dmod = np.zeros_like(modulus)
    for q in range(pulse.n_qubits):
        np.add.at(dmod[q], windows, 2.0 * weight * grid.tau * excess[q])
    wp = pulse.window_params
    param = pulse.parameterization
    safe = np.where(modulus > 0, modulus, 1.0)
    if param.polar:
        amp = np.stack([np.sign(wp[..., 0]) / 2.0 * dmod, np.zeros_like(dmod)], axis=-1)
    elif param.per_window == 2:
        amp = wp / safe[..., None] * dmod[..., None]
    else:
        amp = (np.sign(wp[..., 0]) * dmod)[..., None]
    grad[: wp.size] = amp.reshape(-1)
    return value, grad


class Objective:
    """Energy of the pulse-evolved reference plus the amplitude penalty.

    Call with a parameter vector to get ``(value, gradient)``.  Recent
    evaluations are cached so that a line search asking for the value and
    gradient at the same point only propagates once.
    """

    def __init__(
        self,
        problem: Problem,
        device: DeviceSpec,
        template: PulseEnsemble,
        penalty_weight: float = 1.0,
        T: float | None = None,
        reference=None,
    ):
        if problem.n_qubits != device.n_qubits:
            raise ValueError("problem and device qubit counts differ")
        self.problem = problem
        self.device = device
        self.template = template
        self.penalty_weight = penalty_weight
        self.T = template.grid.T if T is None else T
        self.reference = problem.reference_state() if reference is None else reference
        self.f_evals = 0
        self.g_evals = 0
        self._cache: OrderedDict = OrderedDict()

    def pulse(self, x) -> PulseEnsemble:
        return self.template.with_vector(x)

    def _entry(self, x, need_grad: bool) -> dict:
        x = np.asarray(x, dtype=float)
        key = x.tobytes()
        entry = self._cache.get(key)
        if entry is None:
            entry = {}
            self._cache[key] = entry
            if len(self._cache) > 8:
                self._cache.popitem(last=False)
        else:
            self._cache.move_to_end(key)
        pulse = self.pulse(x)
        if "penalty" not in entry:
            entry["penalty"], entry["penalty_grad"] = penalty(
                pulse, self.device, self.penalty_weight, self.T
            )
        if need_grad and "grad" not in entry:
            energy, grad = energy_and_gradient(
                pulse, self.device, self.problem, self.T, self.reference
            )
            self.g_evals += 1
            entry["energy"] = energy
            entry["grad"] = grad
        elif "energy" not in entry:
            psi = evolve(self.reference, pulse, self.device, self.T)
            self.f_evals += 1
            entry["energy"] = measure_energy(psi, self.problem)
        return entry

    def value(self, x) -> float:
        e = self._entry(x, False)
        return e["energy"] + e["penalty"]

    def gradient(self, x) -> np.ndarray:
        e = self._entry(x, True)
        return e["grad"] + e["penalty_grad"]

    def __call__(self, x):
        e = self._entry(x, True)
        return e["energy"] + e["penalty"], e["grad"] + e["penalty_grad"]

    def components(self, x) -> tuple[float, float]:
        """``(energy, penalty)`` at ``x``."""
        e = self._entry(x, False)
        return e["energy"], e["penalty"]


class _FunctionWrapper:
    """Adapts a ``x -> (value, gradient)`` callable to separate f / g calls."""

    def __init__(self, fun):
        self.fun = fun
        self.f_evals = 0
        self.g_evals = 0
        self._key = None
        self._value = None

    def _eval(self, x):
        key = np.asarray(x, dtype=float).tobytes()
        if key != self._key:
            self._value = self.fun(x)
            self._key = key
            self.f_evals += 1
            self.g_evals += 1
        return self._value

    def value(self, x):
        return self._eval(x)[0]

    def gradient(self, x):
        return self._eval(x)[1]


def _cubic_min(a, fa, da, b, fb, db):
    """Minimizer of the cubic matching values and slopes at ``a`` and ``b`` (None if it has none)."""
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0:
        return None
    d2 = math.copysign(math.sqrt(disc), b - a)
    denom = db - da + 2.0 * d2
    if denom == 0:
        return None
    return b - (b - a) * (db + d2 - d1) / denom


def _quadratic_min(a, fa, da, b, fb):
    denom = 2.0 * (fb - fa - da * (b - a))
    if denom <= 0:
        return None
    return a - da * (b - a) ** 2 / denom


def strong_wolfe(phi, dphi, phi0, dphi0, alpha1=1.0, c1=1e-4, c2=0.9, maxiter=30):
    """Step length satisfying the strong Wolfe conditions, or ``(None, None)``.

    Bracketing followed by a zoom phase that places trial steps by cubic
    interpolation (quadratic when the far slope is unknown), safeguarded to
    stay inside the middle 80% of the bracket.
    """

    def zoom(lo, f_lo, d_lo, hi, f_hi, d_hi):
        for _ in range(maxiter):
            width = hi - lo
            if abs(width) < 1e-14 * max(1.0, abs(lo)):
                break
            if d_hi is None:
                trial = _quadratic_min(lo, f_lo, d_lo, hi, f_hi)
            else:
                trial = _cubic_min(lo, f_lo, d_lo, hi, f_hi, d_hi)
            left, right = min(lo, hi), max(lo, hi)
            margin = 0.1 * (right - left)
            if trial is None or not (left + margin <= trial <= right - margin):
                trial = lo + 0.5 * width
            f_t = phi(trial)
            if not math.isfinite(f_t) or f_t > phi0 + c1 * trial * dphi0 or f_t >= f_lo:
                hi, f_hi, d_hi = trial, f_t if math.isfinite(f_t) else math.inf, None
                if not math.isfinite(f_hi):
                    f_hi = f_lo + abs(d_lo) * abs(width)
                continue
            d_t = dphi(trial)
            if abs(d_t) <= -c2 * dphi0:
                return trial, f_t
            if d_t * (hi - lo) >= 0:
                hi, f_hi, d_hi = lo, f_lo, d_lo
            lo, f_lo, d_lo = trial, f_t, d_t
        return None, None

    a_prev, f_prev, d_prev = 0.0, phi0, dphi0
    a = alpha1
    for i in range(maxiter):
        f_a = phi(a)
        if not math.isfinite(f_a):
            a = a_prev + 0.5 * (a - a_prev)
            continue
        if f_a > phi0 + c1 * a * dphi0 or (i > 0 and f_a >= f_prev):
            return zoom(a_prev, f_prev, d_prev, a, f_a, None)
        d_a = dphi(a)
        if abs(d_a) <= -c2 * dphi0:
            return a, f_a
        if d_a >= 0:
            return zoom(a, f_a, d_a, a_prev, f_prev, d_prev)
        a_prev, f_prev, d_prev = a, f_a, d_a
        a = 2.0 * a
    return None, None


def bfgs_minimize(fun, x0, config: OptimizerConfig | None = None, callback=None) -> OptResult:
    """Minimize ``fun`` with BFGS.

    ``fun`` is either an :class:`Objective` or any callable returning
    ``(value, gradient)``.  Stops when ``max|gradient| <= g_tol``, after
    ``max_iterations`` iterations, or when the line search cannot make
    progress even along the steepest-descent direction.
    """
    config = OptimizerConfig() if config is None else config
    target = fun if isinstance(fun, Objective) else _FunctionWrapper(fun)
    f_start, g_start = target.f_evals, target.g_evals
    x = np.array(x0, dtype=float)
    n = x.size
    f = target.value(x)
    g = target.gradient(x)
    trace = []

    def record(k, step):
        row = {"iteration": k, "objective": f, "gradient_linf": float(np.max(np.abs(g), initial=0.0)), "step": step}
        if isinstance(target, Objective):
            row["energy"], row["penalty"] = target.components(x)
        trace.append(row)
        if callback is not None:
            callback(row, x)

    def finish(k, converged, reason):
        if isinstance(target, Objective):
            energy, pen = target.components(x)
        else:
            energy, pen = f, 0.0
        return OptResult(
            x=x,
            fun=float(f),
            energy=float(energy),
            penalty=float(pen),
            gradient_norm=float(np.max(np.abs(g), initial=0.0)),
            iterations=k,
            f_evals=target.f_evals - f_start,
            g_evals=target.g_evals - g_start,
            converged=converged,
            reason=reason,
            trace=trace,
        )

    if not (np.isfinite(f) and np.all(np.isfinite(g))):
        return finish(0, False, "non-finite objective at starting point")
    record(0, 0.0)
    H = np.eye(n)
    fresh = True  # H is (a multiple of) the identity
    old_old_f = f + np.linalg.norm(g) / 2.0
    k = 0
    while True:
        if np.max(np.abs(g), initial=0.0) <= config.g_tol:
            return finish(k, True, "gradient tolerance reached")
        if k >= config.max_iterations:
            return finish(k, False, "maximum iterations reached")
        p = -H @ g
        if g @ p >= 0:
            H, fresh = np.eye(n), True
            p = -g
        dphi0 = float(g @ p)
        alpha1 = 1.0
        if f < old_old_f:
            alpha1 = min(1.0, 1.01 * 2.0 * (f - old_old_f) / dphi0)
        alpha, f_new = strong_wolfe(
            lambda a: target.value(x + a * p),
            lambda a: float(target.gradient(x + a * p) @ p),
            f, dphi0, alpha1, config.c1, config.c2,
        )
        if alpha is None:
            if fresh:
                return finish(k, False, "line search failed to make progress")
            H, fresh = np.eye(n), True
            old_old_f = f + np.linalg.norm(g) / 2.0
            continue
        s = alpha * p
        x_new = x + s
        g_new = target.gradient(x_new)
        if not np.all(np.isfinite(g_new)):
            return finish(k, False, "non-finite gradient during line search")
        y = g_new - g
        old_old_f = f
        x, f, g = x_new, f_new, g_new
        k += 1
        record(k, float(alpha))
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if k == 1:
                H = np.eye(n) * sy / float(y @ y)
            rho = 1.0 / sy
            Hy = H @ y
            H = H - rho * (np.outer(s, Hy) + np.outer(Hy, s)) + (rho * rho * (y @ Hy) + rho) * np.outer(s, s)
            fresh = False


def write_trace(trace: list, path: str | Path, header: dict | None = None) -> None:
    columns = ["iteration", "objective", "energy", "penalty", "gradient_linf", "step"]
    with open(path, "w", newline="") as fh:
        if header:
            for key, value in header.items():
                fh.write(f"# {key}: {value}\n")
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        for row in trace:
            writer.writerow({c: row.get(c, "") for c in columns})


def minimize_energy(
    problem: Problem,
    device: DeviceSpec,
    template: PulseEnsemble,
    x0,
    config: OptimizerConfig | None = None,
    callback=None,
) -> tuple[OptResult, Objective]:
    """Build the penalized objective for ``template`` and run BFGS from ``x0``."""
    config = OptimizerConfig() if config is None else config
    objective = Objective(problem, device, template, config.penalty_weight)
    return bfgs_minimize(objective, x0, config, callback), objective
