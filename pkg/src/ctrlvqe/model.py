"""Device and problem data for a chain of coupled two-level transmons.

Conventions used throughout the package:

* angular frequencies are in rad/ns, times in ns, observables in Hartree;
  JSON device files carry frequencies in GHz and are scaled by 2*pi on load;
* qubits are labelled ``q = 1..n`` and qubit ``q`` is stored in bit ``q - 1``
  of the basis index (qubit 1 is the least-significant bit);
* each transmon is truncated to its two lowest levels, so ``a_q`` is the
  2x2 lowering operator ``[[0, 1], [0, 0]]`` acting on bit ``q - 1``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

TWO_PI = 2.0 * np.pi
HERMITIAN_ATOL = 1e-12
NORM_ATOL = 1e-10


def _ghz(omega: float) -> float:
    # strip the last-digit noise of the 2*pi round trip so files stay readable
    return round(omega / TWO_PI, 12)


class ConfigurationError(ValueError):
    """Raised for malformed device, problem, or run configuration."""


@dataclass(frozen=True)
class DeviceSpec:
    """Static description of an ``n``-qubit transmon device.

    ``couplings`` holds ``(p, q, g)`` triples with 1-based qubit labels and
    ``g`` in rad/ns.
    """

    n_qubits: int
    qubit_freqs: tuple[float, ...]
    couplings: tuple[tuple[int, int, float], ...] = ()
    omega_max: float = 0.02 * TWO_PI
    steps_per_ns: int = 20

    def __post_init__(self):
        object.__setattr__(self, "qubit_freqs", tuple(float(w) for w in self.qubit_freqs))
        object.__setattr__(
            self, "couplings", tuple((int(p), int(q), float(g)) for p, q, g in self.couplings)
        )
        if self.n_qubits < 1:
            raise ConfigurationError("n_qubits must be positive")
        if len(self.qubit_freqs) != self.n_qubits:
            raise ConfigurationError(
                f"expected {self.n_qubits} qubit frequencies, got {len(self.qubit_freqs)}"
            )
        if any(not w > 0 for w in self.qubit_freqs):
            raise ConfigurationError("qubit frequencies must be strictly positive")
        if not self.omega_max > 0:
            raise ConfigurationError("omega_max must be strictly positive")
        if int(self.steps_per_ns) != self.steps_per_ns or self.steps_per_ns < 1:
            raise ConfigurationError("steps_per_ns must be an integer >= 1")
        seen = set()
        for p, q, _ in self.couplings:
            if p == q:
                raise ConfigurationError(f"coupling ({p}, {q}) couples a qubit to itself")
            if not (1 <= p <= self.n_qubits and 1 <= q <= self.n_qubits):
                raise ConfigurationError(
                    f"coupling ({p}, {q}) out of range for {self.n_qubits} qubits"
                )
            pair = frozenset((p, q))
            if pair in seen:
                raise ConfigurationError(f"coupling pair ({p}, {q}) given twice")
            seen.add(pair)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    @property
    def tau(self) -> float:
        """Nominal Trotter step length in ns."""
        return 1.0 / self.steps_per_ns

    def to_json_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "qubit_freqs_ghz": [_ghz(w) for w in self.qubit_freqs],
            "couplings": [[p, q, _ghz(g)] for p, q, g in self.couplings],
            "omega_max_ghz": _ghz(self.omega_max),
            "steps_per_ns": self.steps_per_ns,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "DeviceSpec":
        for key in ("n_qubits", "qubit_freqs_ghz"):
            if key not in data:
                raise ConfigurationError(f"device file: missing field '{key}'")
        try:
            return cls(
                n_qubits=int(data["n_qubits"]),
                qubit_freqs=[TWO_PI * float(f) for f in data["qubit_freqs_ghz"]],
                couplings=[(p, q, TWO_PI * float(g)) for p, q, g in data.get("couplings", [])],
                omega_max=TWO_PI * float(data.get("omega_max_ghz", 0.02)),
                steps_per_ns=int(data.get("steps_per_ns", 20)),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"device file: {exc}") from exc


def default_device(n: int) -> DeviceSpec:
    """Linear chain with equally spaced qubits at (4.80 + 0.02 q) GHz, q = 1..n."""
    if n < 1:
        raise ConfigurationError("n must be positive")
    freqs = [round(4.80 + 0.02 * q, 10) * TWO_PI for q in range(1, n + 1)]
    couplings = [(q, q + 1, 0.02 * TWO_PI) for q in range(1, n)]
    return DeviceSpec(n, freqs, couplings, omega_max=0.02 * TWO_PI, steps_per_ns=20)


def lowering_operator(n_qubits: int, q: int) -> np.ndarray:
    """Dense ``a_q`` on the full register; ``q`` is 1-based."""
    if not 1 <= q <= n_qubits:
        raise ConfigurationError(f"qubit {q} out of range for {n_qubits} qubits")
    dim = 2**n_qubits
    bit = 1 << (q - 1)
    a = np.zeros((dim, dim), dtype=complex)
    for k in range(dim):
        if k & bit:
            a[k ^ bit, k] = 1.0
    return a


def number_operator(n_qubits: int) -> np.ndarray:
    """Total excitation number as a diagonal matrix."""
    k = np.arange(2**n_qubits)
    counts = np.array([bin(i).count("1") for i in k], dtype=float)
    return np.diag(counts).astype(complex)


def build_static_hamiltonian(device: DeviceSpec) -> np.ndarray:
    n = device.n_qubits
    dim = device.dim
    k = np.arange(dim)
    H = np.zeros((dim, dim), dtype=complex)
    for q, w in enumerate(device.qubit_freqs):
        H[k, k] += w * ((k >> q) & 1)
    for p, q, g in device.couplings:
        if not (1 <= p <= n and 1 <= q <= n):
            raise ConfigurationError(f"coupling ({p}, {q}) out of range")
        ap = lowering_operator(n, p)
        aq = lowering_operator(n, q)
        H += g * (ap.conj().T @ aq + aq.conj().T @ ap)
    return H


def is_hermitian(matrix: np.ndarray, atol: float = HERMITIAN_ATOL) -> bool:
    matrix = np.asarray(matrix)
    return (
        matrix.ndim == 2
        and matrix.shape[0] == matrix.shape[1]
        and np.allclose(matrix, matrix.conj().T, rtol=0.0, atol=atol)
    )


@dataclass
class Problem:
    """Observable to minimize and the basis state the pulse starts from."""

    n_qubits: int
    observable: np.ndarray
    reference_index: int = 0
    ground_energy: float | None = field(default=None, compare=False)

    def __post_init__(self):
        self.observable = np.asarray(self.observable, dtype=complex)
        dim = 2**self.n_qubits
        if self.observable.shape != (dim, dim):
            raise ConfigurationError(
                f"observable has shape {self.observable.shape}, expected ({dim}, {dim})"
            )
        if not is_hermitian(self.observable):
            raise ConfigurationError("observable is not Hermitian")
        if not 0 <= self.reference_index < dim:
            raise ConfigurationError(
                f"reference_index {self.reference_index} outside [0, {dim})"
            )

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def reference_state(self) -> np.ndarray:
        return basis_state(self.n_qubits, self.reference_index)

    def reference_energy(self) -> float:
        return float(self.observable[self.reference_index, self.reference_index].real)

    def to_json_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "reference_index": self.reference_index,
            "observable": [[[z.real, z.imag] for z in row] for row in self.observable],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "Problem":
        for key in ("n_qubits", "reference_index", "observable"):
            if key not in data:
                raise ConfigurationError(f"problem file: missing field '{key}'")
        try:
            rows = [[complex(re, im) for re, im in row] for row in data["observable"]]
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(
                "problem file: field 'observable' must be a matrix of [re, im] pairs"
            ) from exc
        return cls(int(data["n_qubits"]), np.array(rows), int(data["reference_index"]))


def exact_ground_energy(problem: Problem) -> float:
    """Smallest eigenvalue of the observable; cached on ``problem``."""
    if not is_hermitian(problem.observable):
        raise ConfigurationError("observable is not Hermitian")
    energy = float(np.linalg.eigvalsh(problem.observable)[0])
    problem.ground_energy = energy
    return energy


def basis_state(n_qubits: int, index: int) -> np.ndarray:
    psi = np.zeros(2**n_qubits, dtype=complex)
    psi[index] = 1.0
    return psi


def check_state(psi: np.ndarray, dim: int | None = None) -> np.ndarray:
    """Validate a state vector (shape and unit norm) and return it as complex."""
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1 or (dim is not None and psi.shape[0] != dim):
        raise ConfigurationError(f"state has shape {psi.shape}, expected ({dim},)")
    if abs(np.linalg.norm(psi) - 1.0) > NORM_ATOL:
        raise ConfigurationError("state is not normalized")
    return psi


def random_hermitian(dim: int, seed: int, scale: float = 1.0) -> np.ndarray:
    """Random Hermitian matrix (GUE-like) for synthetic problems."""
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * (M + M.conj().T) / 2.0


def load_device(path: str | Path) -> DeviceSpec:
    return DeviceSpec.from_json_dict(_read_json(path))


def load_problem(path: str | Path) -> Problem:
    return Problem.from_json_dict(_read_json(path))


def save_device(device: DeviceSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(device.to_json_dict(), indent=2))


def save_problem(problem: Problem, path: str | Path) -> None:
    Path(path).write_text(json.dumps(problem.to_json_dict()))


def _read_json(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: malformed JSON ({exc})") from exc
    except OSError as exc:
        raise ConfigurationError(f"{path}: {exc.strerror}") from exc


def with_steps_per_ns(device: DeviceSpec, steps_per_ns: int) -> DeviceSpec:
    return replace(device, steps_per_ns=steps_per_ns)
