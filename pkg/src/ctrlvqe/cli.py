"""Command-line entry point: ``ctrlvqe optimize | sweep | diagnose``.

Every subcommand reads a JSON run configuration (``--config``) whose fields
may be overridden from the command line.  Relative paths inside the
configuration are resolved against the configuration file's directory, and
``fixture:<name>`` refers to a data file bundled with the package.

Exit codes: 0 success, 1 non-convergence, 2 invalid input, 3 numerical error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import os
import sys
from importlib import resources
from pathlib import Path


from . import __version__
from .analysis import (
    emet_sweep,
    multistart,
    rabi_comparison,
    rabi_settings_grid,
    sweep_summary,
)
from .dynamics import NumericalError, evolve, fidelity_map, save_fidelity_map
from .gradients import quantum_fisher_rank
from .model import (
    TWO_PI,
    ConfigurationError,
    DeviceSpec,
    Problem,
    default_device,
    exact_ground_energy,
    load_device,
    load_problem,
)
from .optimize import OptimizerConfig, minimize_energy, write_trace
from .pulses import PulseEnsemble, initialize_parameters, resolve_label, window_grid

log = logging.getLogger("ctrlvqe")

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


def fixture_path(name: str) -> Path:
    """Path of a data file shipped inside the package (``problem_2q`` etc.)."""
    filename = name if name.endswith(".json") else name + ".json"
    path = resources.files("ctrlvqe") / "data" / filename
    if not path.is_file():
        raise ConfigurationError(f"no bundled fixture named '{name}'")
    return Path(str(path))


@dataclasses.dataclass
class RunConfig:
    problem: str
    device: str | None = None
    parameterization: str = "ab"
    dsmin_ns: float = 3.0
    T_ns: float | None = None
    T_range_ns: list | None = None
    init_mode: str = "zero"
    seed: int | None = None
    n_restarts: int | None = None
    detuning_range_ghz: float | None = None
    optimizer: dict = dataclasses.field(default_factory=dict)
    output_dir: str = "out"
    jobs: int | None = None
    pulses: list | None = None
    qfi_every: int = 1
    rabi_T_ns: float = 50.0

    @classmethod
    def from_dict(cls, data: dict, base: Path | None = None) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"config: unknown field(s) {', '.join(unknown)}")
        if "problem" not in data:
            raise ConfigurationError("config: missing field 'problem'")
        cfg = cls(**data)
        if base is not None:
            cfg.problem = _resolve(cfg.problem, base)
            cfg.device = None if cfg.device is None else _resolve(cfg.device, base)
            cfg.output_dir = _resolve(cfg.output_dir, base)
            if cfg.pulses is not None:
                cfg.pulses = [_resolve(p, base) for p in cfg.pulses]
        return cfg

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def optimizer_config(self) -> OptimizerConfig:
        try:
            return OptimizerConfig(**self.optimizer)
        except TypeError as exc:
            raise ConfigurationError(f"config field 'optimizer': {exc}") from exc
        except ValueError as exc:
            raise ConfigurationError(f"config field 'optimizer': {exc}") from exc

    def durations(self) -> list[float]:
        """The T values to run: ``T_range_ns = [start, stop, step]`` inclusive, else ``[T_ns]``."""
        if self.T_range_ns is not None:
            try:
                start, stop, step = (float(v) for v in self.T_range_ns)
            except (TypeError, ValueError):
                raise ConfigurationError("config field 'T_range_ns' must be [start, stop, step]") from None
            if not (start > 0 and step > 0 and stop >= start):
                raise ConfigurationError("config field 'T_range_ns' needs 0 < start <= stop and step > 0")
            count = math.floor((stop - start) / step + 1e-9) + 1
            return [round(start + k * step, 10) for k in range(count)]
        if self.T_ns is None:
            raise ConfigurationError("config: missing field 'T_ns' (or 'T_range_ns')")
        if not self.T_ns > 0:
            raise ConfigurationError("config field 'T_ns' must be positive")
        return [float(self.T_ns)]


def _resolve(path: str, base: Path) -> str:
    if path.startswith("fixture:"):
        return str(fixture_path(path.split(":", 1)[1]))
    p = Path(path)
    return str(p if p.is_absolute() else (base / p).resolve())


def _load_inputs(cfg: RunConfig) -> tuple[Problem, DeviceSpec]:
    problem = load_problem(cfg.problem)
    device = default_device(problem.n_qubits) if cfg.device is None else load_device(cfg.device)
    if device.n_qubits != problem.n_qubits:
        raise ConfigurationError(
            f"device has {device.n_qubits} qubits but the problem has {problem.n_qubits}"
        )
    exact_ground_energy(problem)
    return problem, device


def _detuning_range(cfg: RunConfig):
    return None if cfg.detuning_range_ghz is None else TWO_PI * cfg.detuning_range_ghz


def _provenance(cfg: RunConfig) -> dict:
    # where results go and how many workers compute them do not change them
    config = {k: v for k, v in cfg.to_dict().items() if k not in ("output_dir", "jobs")}
    return {"ctrlvqe_version": __version__, "config": config}


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2))


def _check_coverage(pulse: PulseEnsemble, T: float) -> None:
    if T > pulse.grid.T * (1 + 1e-12):
        raise ConfigurationError(
            f"pulse windows cover [0, {pulse.grid.T}] ns but evolution runs to {T} ns"
        )


def run_optimize(cfg: RunConfig) -> int:
    problem, device = _load_inputs(cfg)
    param, dsmin = resolve_label(cfg.parameterization, device, cfg.dsmin_ns)
    opt_config = cfg.optimizer_config()
    T = cfg.durations()[0]
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    template = PulseEnsemble.zeros(param, window_grid(T, dsmin), device)
    _check_coverage(template, T)
    x0 = initialize_parameters(template, device.omega_max, cfg.init_mode, cfg.seed, _detuning_range(cfg))
    log.info("optimizing %s pulse, T = %g ns, %d parameters", param.value, T, template.n_params)
    result, objective = minimize_energy(problem, device, template, x0, opt_config)

    prov = _provenance(cfg)
    pulse = objective.pulse(result.x)
    _write_json(out / "pulse.json", {**prov, "pulse": pulse.to_json_dict()})
    write_trace(result.trace, out / "trace.csv", {k: json.dumps(v) for k, v in prov.items()})
    state = evolve(problem.reference_state(), pulse, device, T)
    _write_json(out / "final_state.json", {**prov, "T_ns": T, "state": [[z.real, z.imag] for z in state]})
    summary = {
        **prov,
        **result.summary(),
        "T_ns": T,
        "n_windows": template.grid.n_windows,
        "ground_energy": problem.ground_energy,
        "reference_energy": problem.reference_energy(),
        "error": result.energy - problem.ground_energy,
    }
    _write_json(out / "summary.json", summary)
    log.info("energy %.12f (error %.3e), %s", result.energy, summary["error"], result.reason)
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def _csv_provenance(path: Path) -> dict:
    header = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition(": ")
            header[key] = json.loads(value)
    return header


def run_sweep(cfg: RunConfig) -> int:
    problem, device = _load_inputs(cfg)
    param, dsmin = resolve_label(cfg.parameterization, device, cfg.dsmin_ns)
    opt_config = cfg.optimizer_config()
    T_list = cfg.durations()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "sweep.csv"
    prov = _provenance(cfg)
    if csv_path.exists():
        # resume only into a file produced by the same configuration
        previous = _csv_provenance(csv_path).get("config")
        if previous != prov["config"]:
            raise ConfigurationError(f"{csv_path} was written by a different configuration")
        log.info("resuming from %s", csv_path)
    jobs = cfg.jobs or len(os.sched_getaffinity(0))
    if cfg.init_mode == "random":
        rows = multistart(
            problem, device, param, dsmin, T_list, cfg.n_restarts or 1,
            seed=0 if cfg.seed is None else cfg.seed, config=opt_config,
            detuning_range=_detuning_range(cfg), csv_path=csv_path, provenance=prov, jobs=jobs,
        )
    elif cfg.init_mode == "zero":
        rows = emet_sweep(
            problem, device, param, dsmin, T_list, "zero", opt_config,
            csv_path=csv_path, provenance=prov, jobs=jobs,
        )
    else:
        raise ConfigurationError(f"config field 'init_mode': unknown mode '{cfg.init_mode}'")
    summary = {**prov, **sweep_summary(rows), "ground_energy": problem.ground_energy}
    _write_json(out / "sweep_summary.json", summary)
    log.info("T* = %s ns", summary["T_star_ns"])
    return EXIT_OK


def _load_pulse(path: str, device: DeviceSpec) -> PulseEnsemble:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    pulse = PulseEnsemble.from_json_dict(data.get("pulse", data))
    if pulse.n_qubits != device.n_qubits:
        raise ConfigurationError(f"{path}: pulse drives {pulse.n_qubits} qubits, device has {device.n_qubits}")
    return pulse


def run_diagnostics(cfg: RunConfig, fidelity: bool, qfi: bool, rabi: bool) -> int:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    prov = _provenance(cfg)
    header = "\n".join(f"{k}: {json.dumps(v)}" for k, v in prov.items())
    status = EXIT_OK

    if fidelity:
        problem, device = _load_inputs(cfg)
        if not cfg.pulses or len(cfg.pulses) != 2:
            raise ConfigurationError("fidelity map needs exactly two pulse files ('pulses')")
        a, b = (_load_pulse(p, device) for p in cfg.pulses)
        T = cfg.T_ns if cfg.T_ns is not None else min(a.grid.T, b.grid.T)
        for pulse in (a, b):
            _check_coverage(pulse, T)
        ref = problem.reference_state()
        F = fidelity_map(evolve(ref, a, device, T, record=True), evolve(ref, b, device, T, record=True))
        save_fidelity_map(F, out / "fidelity_map.csv", header)
        log.info("fidelity map %dx%d written", *F.shape)

    if qfi:
        problem, device = _load_inputs(cfg)
        param, dsmin = resolve_label(cfg.parameterization, device, cfg.dsmin_ns)
        T = cfg.durations()[0]
        template = PulseEnsemble.zeros(param, window_grid(T, dsmin), device)
        x0 = initialize_parameters(template, device.omega_max, cfg.init_mode, cfg.seed, _detuning_range(cfg))
        ref = problem.reference_state()
        every = max(1, cfg.qfi_every)
        trace = []

        def record(row, x):
            if row["iteration"] % every == 0:
                rank = quantum_fisher_rank(template.with_vector(x), device, ref, T)
                trace.append({"iteration": row["iteration"], "objective": row["objective"], "rank": rank})

        result, _ = minimize_energy(problem, device, template, x0, cfg.optimizer_config(), callback=record)
        if not trace or trace[-1]["iteration"] != result.iterations:
            rank = quantum_fisher_rank(template.with_vector(result.x), device, ref, T)
            trace.append({"iteration": result.iterations, "objective": result.fun, "rank": rank})
        with open(out / "qfi_trace.csv", "w", newline="") as fh:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
            writer = csv.DictWriter(fh, fieldnames=["iteration", "objective", "rank"])
            writer.writeheader()
            writer.writerows(trace)
        log.info("effective quantum dimension: %d -> %d", trace[0]["rank"], trace[-1]["rank"])
        if not result.converged:
            status = EXIT_NOT_CONVERGED

    if rabi:
        rows = rabi_comparison(rabi_settings_grid(), cfg.rabi_T_ns)
        with open(out / "rabi_comparison.csv", "w", newline="") as fh:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
        worst = max(r["max_deviation"] for r in rows)
        log.info("Rabi comparison: worst deviation %.2e over %d settings", worst, len(rows))
    return status


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="run configuration (JSON)")
    common.add_argument("--T", type=float, dest="T_ns", help="pulse duration in ns")
    common.add_argument("--T-range", type=float, nargs=3, metavar=("START", "STOP", "STEP"),
                        dest="T_range_ns", help="inclusive duration range in ns")
    common.add_argument("--seed", type=int)
    common.add_argument("--param", dest="parameterization", help="parameterization label")
    common.add_argument("--out", dest="output_dir", help="output directory")
    common.add_argument("--jobs", type=int, help="parallel workers (default: available cores)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ctrlvqe", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("optimize", parents=[common], help="one optimization at fixed duration")
    sub.add_parser("sweep", parents=[common], help="optimize over a range of durations")
    diag = sub.add_parser("diagnose", parents=[common], help="fidelity map, QFI rank trace, Rabi table")
    diag.add_argument("--pulses", nargs=2, metavar="PULSE_JSON", help="pulse files for the fidelity map")
    diag.add_argument("--fidelity", action="store_true", help="write the trajectory fidelity map")
    diag.add_argument("--qfi", action="store_true", help="write the effective-dimension trace")
    diag.add_argument("--rabi", action="store_true", help="write the simulator-vs-oracle table")
    return parser


def _config_from_args(args) -> RunConfig:
    config_path = Path(args.config)
    try:
        data = json.loads(config_path.read_text())
    except OSError as exc:
        raise ConfigurationError(f"{config_path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{config_path}: malformed JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigurationError(f"{config_path}: expected a JSON object")
    cwd = Path.cwd()
    overrides = {}
    for key in ("T_ns", "T_range_ns", "seed", "parameterization", "output_dir", "jobs"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "pulses", None):
        overrides["pulses"] = [str((cwd / p).resolve()) for p in args.pulses]
    if "output_dir" in overrides:
        overrides["output_dir"] = str((cwd / overrides["output_dir"]).resolve())
    if "T_ns" in overrides:
        data.pop("T_range_ns", None)
    if "T_range_ns" in overrides:
        data.pop("T_ns", None)
    cfg = RunConfig.from_dict(data, config_path.parent.resolve())
    return dataclasses.replace(cfg, **overrides)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = _config_from_args(args)
        if args.command == "optimize":
            return run_optimize(cfg)
        if args.command == "sweep":
            return run_sweep(cfg)
        chosen = [args.fidelity, args.qfi, args.rabi]
        if not any(chosen):
            chosen = [bool(cfg.pulses), False, True]
        return run_diagnostics(cfg, *chosen)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigurationError, ValueError, KeyError, TypeError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
