"""Batch command-line interface: solve, classify, barriers, verify, sweep.

Each subcommand takes a JSON config (unknown keys are errors) and an output
directory, and writes deterministic artifacts: solution.csv, report.json,
patch_residuals.csv, sweep_summary.csv.  Exit codes: 0 ok, 2 config error,
3 solver error, 4 invariant violation (named in report.json).
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import itertools
import json
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import asymptotics, barriers, cartesian, ode
from .errors import ConfigError, RadialSigma2Error
from .lorentz import validate_dimension
from .prescriptions import (
    FAMILY_BUILDERS,
    FAMILY_PARAMS,
    DirectionalPrescription,
    RadialPrescription,
    as_directional,
    build_family,
)

THREADS_ENV = "RADIAL_SIGMA2_THREADS"
SOLUTION_COLUMNS = ["r", "s", "s_prime", "eps", "phi", "kappa_r", "kappa_t", "sigma2", "f2_residual"]
PATCH_COLUMNS = [
    "spacing",
    "interior_nodes",
    "max_rel_residual",
    "mean_rel_residual",
    "admissible_fraction",
    "worst_sigma2",
]
SWEEP_COLUMNS = [
    "family", "n", "c", "p", "q", "value",
    "classification", "phi_limit", "envelope_width", "max_f2_residual",
    "eps_beta_ratio", "error",
]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_INVARIANT = 4

_COMMON_KEYS = {"command", "dimension", "prescription", "r_max", "tol", "seed"}
_ALLOWED_KEYS = {
    "solve": _COMMON_KEYS | {"phi0", "delta", "r_probe", "threshold"},
    "classify": _COMMON_KEYS | {"r_probe", "threshold"},
    "barriers": _COMMON_KEYS | {"eps0", "delta"},
    "verify": _COMMON_KEYS | {"phi0", "spacing", "box", "corrupt_noise"},
    "sweep": {"command", "sweep", "r_max", "tol", "seed", "delta", "r_probe", "threshold"},
}
_SWEEP_KEYS = {"family", "n", "c", "p", "q", "value"}


@dataclass
class RunConfig:
    """Validated run configuration for one CLI invocation."""

    command: str
    dimension: int = 3
    prescription: Optional[dict] = None
    r_max: float = 40.0
    tol: float = 1e-10
    phi0: float = 0.0
    eps0: Optional[float] = None
    delta: float = asymptotics.DEFAULT_DELTA
    r_probe: float = asymptotics.DEFAULT_R_PROBE
    threshold: float = asymptotics.DEFAULT_THRESHOLD
    spacing: float = 0.02
    box: float = 1.0
    corrupt_noise: float = 0.0
    seed: int = 20240817
    sweep: Optional[dict] = None
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, command: str, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        allowed = _ALLOWED_KEYS[command]
        unknown = set(data) - allowed
        if unknown:
            raise ConfigError(f"unknown config keys for {command}: {sorted(unknown)}")
        if "command" in data and data["command"] != command:
            raise ConfigError(f"config says command={data['command']!r} but {command!r} was invoked")
        cfg = cls(command=command, raw=dict(data))
        for key in allowed - {"command", "prescription", "sweep"}:
            if key in data:
                setattr(cfg, key, data[key])
        cfg.prescription = data.get("prescription")
        cfg.sweep = data.get("sweep")
        cfg._validate()
        return cfg

    def _validate(self):
        try:
            self.dimension = validate_dimension(self.dimension)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not 1e-13 <= float(self.tol) <= 1e-3:
            raise ConfigError(f"tol must lie in [1e-13, 1e-3], got {self.tol}")
        if not 0.0 < float(self.r_max) <= 200.0:
            raise ConfigError(f"r_max must lie in (0, 200], got {self.r_max}")
        if self.command == "sweep":
            if not isinstance(self.sweep, dict):
                raise ConfigError("sweep command requires a 'sweep' object")
            unknown = set(self.sweep) - _SWEEP_KEYS
            if unknown:
                raise ConfigError(f"unknown sweep keys: {sorted(unknown)}")
            if "family" not in self.sweep:
                raise ConfigError("sweep needs a 'family' name")
        elif self.prescription is None:
            raise ConfigError(f"{self.command} requires a 'prescription' object")
        if self.command == "verify":
            if self.spacing <= 0.0 or self.box <= 0.0:
                raise ConfigError("spacing and box must be positive")


def load_prescription(cfg: RunConfig, directional_ok: bool = False):
    spec = cfg.prescription
    if not isinstance(spec, dict) or "family" not in spec:
        raise ConfigError("prescription must be an object with a 'family' key")
    family = spec["family"]
    params = {k: v for k, v in spec.items() if k != "family"}
    if family == "table":
        path = params.pop("path", None)
        if path is None:
            raise ConfigError("table prescription needs a 'path'")
        flat = bool(params.pop("flat_near_zero", False))
        if params:
            raise ConfigError(f"unknown table keys: {sorted(params)}")
        rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return RadialPrescription.from_table(
            cfg.dimension, rows[:, 0], rows[:, 1], flat_near_zero=flat, label=f"table({Path(path).name})"
        )
    if family not in FAMILY_BUILDERS:
        raise ConfigError(f"unknown family {family!r}; choose from {sorted(FAMILY_BUILDERS)} or 'table'")
    bad = set(params) - FAMILY_PARAMS[family]
    if bad:
        raise ConfigError(f"unknown parameters {sorted(bad)} for family {family!r}")
    built = build_family(family, cfg.dimension, **params)
    if isinstance(built, DirectionalPrescription) and not directional_ok:
        raise ConfigError(f"family {family!r} is directional; only 'barriers' accepts it")
    return built


def fmt(value) -> str:
    """Fixed 17-significant-digit decimal rendering for CSV cells."""
    if value is None or value == "":
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def write_report(path: Path, payload: dict) -> None:
    with open(path, "w") as handle:
        json.dump(_jsonable(payload), handle, indent=2, sort_keys=True)
        handle.write("\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _base_report(cfg: RunConfig) -> dict:
    return {
        "command": cfg.command,
        "config": cfg.raw,
        "dimension": cfg.dimension,
        "package_version": __version__,
        "seeds": {"sphere_directions": f"deterministic(20240+{cfg.dimension})", "config_seed": cfg.seed},
    }


@contextlib.contextmanager
def _collect_warnings(report: dict):
    """Route solver warnings into report.json instead of stderr."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        yield
    report["warnings"] = sorted({str(w.message) for w in caught})


def _solution_rows(solution: ode.RadialSolution):
    kr, kt = ode.node_curvatures(solution)
    n = solution.dimension
    sigma2 = (n - 1) * kr * kt + math.comb(n - 1, 2) * kt * kt
    residual = ode.f2_residual(solution)
    for k in range(solution.r.size):
        yield (
            solution.r[k], solution.s[k], solution.s_prime[k], solution.eps[k],
            solution.phi[k], kr[k], kt[k], sigma2[k], residual[k],
        )


def _solution_invariants(solution: ode.RadialSolution) -> dict:
    n = solution.dimension
    kr, kt = ode.node_curvatures(solution)
    sigma1 = kr + (n - 1) * kt
    sigma2 = (n - 1) * kr * kt + math.comb(n - 1, 2) * kt * kt
    admissible = float(np.mean((sigma1 > 0.0) & (sigma2 > 0.0)))
    r, s = solution.r[1:], solution.s[1:]
    q = ode.sinh_ratio(r, r - s)
    h = solution.prescription(r)
    trap_ok = bool(np.all((n - 2) * q * q <= n * h * h * (1.0 + 1e-9) + 1e-12))
    return {
        "trap_ok": trap_ok,
        "s_monotone_ok": bool(np.all(np.diff(solution.s) >= -1e-12)),
        "spacelike_ok": bool(np.all(np.abs(np.tanh(solution.eps)) <= 1.0 - 1e-12)),
        "admissible_fraction": admissible,
        "max_f2_residual": float(np.max(ode.f2_residual(solution))),
        "quad_error": solution.quad_error,
        "tolerance_achieved": solution.tolerance_achieved,
        "grid_nodes": int(solution.r.size),
    }


def _check_invariants(report: dict, invariants: dict) -> Optional[str]:
    """Name of the first violated invariant, if any."""
    checks = [
        ("trap_ok", invariants.get("trap_ok", True) is True),
        ("s_monotone_ok", invariants.get("s_monotone_ok", True) is True),
        ("spacelike_ok", invariants.get("spacelike_ok", True) is True),
        ("admissible_fraction==1.0", invariants.get("admissible_fraction", 1.0) == 1.0),
    ]
    for name, ok in checks:
        if not ok:
            report["violated_invariant"] = name
            return name
    return None


def run(cfg: RunConfig, out_dir: Path) -> int:
    """Execute one validated configuration; returns the process exit code."""
    out_dir.mkdir(parents=True, exist_ok=True)
    handler = {
        "solve": _run_solve,
        "classify": _run_classify,
        "barriers": _run_barriers,
        "verify": _run_verify,
        "sweep": _run_sweep,
    }[cfg.command]
    return handler(cfg, out_dir)


def _run_solve(cfg: RunConfig, out_dir: Path) -> int:
    prescription = load_prescription(cfg)
    report = _base_report(cfg)
    with _collect_warnings(report):
        solution = ode.solve_radial(prescription, cfg.r_max, cfg.tol, phi0=cfg.phi0)
        analysis = asymptotics.analyze(
            solution, prescription, delta=cfg.delta, r_probe=cfg.r_probe, threshold=cfg.threshold
        )
    report["prescription"] = prescription.label
    n = cfg.dimension
    report["trap_curve_coefficient"] = math.sqrt(n / (n - 2)) if n > 2 else None
    report["classification"] = analysis.classification
    report["phi_limit_estimate"] = analysis.phi_limit_estimate
    report["tail_envelope"] = analysis.tail_envelope
    report["delta_used"] = analysis.delta_used
    if analysis.tail_fit is not None:
        report["eps_beta_tail_ratio"] = analysis.tail_fit.ratio
        report["s_prime_max_dev"] = analysis.tail_fit.s_prime_max_dev

    invariants = _solution_invariants(solution)
    report["invariants"] = invariants
    write_csv(out_dir / "solution.csv", SOLUTION_COLUMNS, _solution_rows(solution))
    violated = _check_invariants(report, invariants)
    write_report(out_dir / "report.json", report)
    return EXIT_INVARIANT if violated else EXIT_OK


def _run_classify(cfg: RunConfig, out_dir: Path) -> int:
    prescription = load_prescription(cfg)
    verdict = asymptotics.classify_boundedness(prescription, r_probe=cfg.r_probe, threshold=cfg.threshold)
    report = _base_report(cfg)
    report["prescription"] = prescription.label
    report["classification"] = verdict.classification
    report["windows"] = verdict.windows
    report["increments"] = verdict.increments
    report["total"] = verdict.total
    report["remaining_estimate"] = verdict.remaining_estimate
    report["harmonic_constant"] = verdict.harmonic_constant
    write_report(out_dir / "report.json", report)
    return EXIT_OK


def _run_barriers(cfg: RunConfig, out_dir: Path) -> int:
    prescription = load_prescription(cfg, directional_ok=True)
    if isinstance(prescription, RadialPrescription):
        prescription = as_directional(prescription)
    report = _base_report(cfg)
    with _collect_warnings(report):
        pair = barriers.build_barrier_pair(
            prescription, eps0=cfg.eps0, tol=cfg.tol, r_max=cfg.r_max, delta=cfg.delta
        )
    report["prescription"] = prescription.label
    report["eps0"] = pair.eps0
    report["normalization_constants"] = list(pair.normalization_constants)
    report["diagnostics"] = pair.diagnostics
    report["tail_envelope_minus"] = pair.limit_minus.tail_envelope
    report["tail_envelope_plus"] = pair.limit_plus.tail_envelope
    report["invariants"] = {
        "barriers_ordered": bool(
            float(np.max(pair.phi_minus.phi)) <= 1e-9 and float(np.min(pair.phi_plus.phi)) >= -1e-9
        ),
        "barrier_margin_minus": pair.diagnostics["barrier_margin_minus"],
        "barrier_margin_plus": pair.diagnostics["barrier_margin_plus"],
    }
    write_csv(out_dir / "barrier_minus.csv", SOLUTION_COLUMNS, _solution_rows(pair.phi_minus))
    write_csv(out_dir / "barrier_plus.csv", SOLUTION_COLUMNS, _solution_rows(pair.phi_plus))
    violated = None
    if not report["invariants"]["barriers_ordered"]:
        violated = report["violated_invariant"] = "barriers_ordered"
    elif pair.diagnostics["barrier_margin_minus"] < 0.0 or pair.diagnostics["barrier_margin_plus"] < 0.0:
        violated = report["violated_invariant"] = "barrier_inequalities"
    write_report(out_dir / "report.json", report)
    return EXIT_INVARIANT if violated else EXIT_OK


def _run_verify(cfg: RunConfig, out_dir: Path) -> int:
    prescription = load_prescription(cfg)
    report = _base_report(cfg)
    rows = []
    worst_fraction = 1.0
    max_res = []
    with _collect_warnings(report):
        reach_needed = cfg.box * math.sqrt(cfg.dimension) * 1.05
        r_solve = min(cfg.r_max, max(3.0, math.asinh(reach_needed) + 1.0))
        solution = ode.solve_radial(prescription, r_solve, cfg.tol, phi0=cfg.phi0, max_step=0.01)
        for spacing in (cfg.spacing, cfg.spacing / 2.0, cfg.spacing / 4.0):
            patch = cartesian.to_cartesian(solution, cfg.box, spacing)
            if cfg.corrupt_noise > 0.0:
                patch = patch.corrupted(cfg.corrupt_noise)
            residual = cartesian.h2_residual_field(patch, prescription)
            fraction, worst_sigma2 = cartesian.admissibility_field(patch)
            worst_fraction = min(worst_fraction, fraction)
            max_res.append(float(np.max(residual)))
            rows.append((
                spacing, residual.size, float(np.max(residual)), float(np.mean(residual)),
                fraction, worst_sigma2,
            ))
    write_csv(out_dir / "patch_residuals.csv", PATCH_COLUMNS, rows)
    report["prescription"] = prescription.label
    report["refinement_ratios"] = [max_res[i] / max_res[i + 1] for i in range(len(max_res) - 1)]
    invariants = {
        "admissible_fraction": worst_fraction,
        "spacelike_ok": True,  # shape_spectra would have raised otherwise
        "max_rel_residual": max_res[0],
    }
    report["invariants"] = invariants
    violated = None
    if worst_fraction < 1.0:
        violated = report["violated_invariant"] = "admissibility_fraction==1.0"
    write_report(out_dir / "report.json", report)
    return EXIT_INVARIANT if violated else EXIT_OK


def _sweep_combos(cfg: RunConfig):
    spec = cfg.sweep
    family = spec["family"]
    if family not in FAMILY_BUILDERS:
        raise ConfigError(f"unknown sweep family {family!r}")

    def as_list(key, default):
        value = spec.get(key, default)
        if not isinstance(value, list):
            value = [value]
        return value

    ns = as_list("n", cfg.dimension)
    param_names = sorted(FAMILY_PARAMS[family] & _SWEEP_KEYS)
    param_lists = [as_list(name, None) for name in param_names]
    combos = []
    for n in ns:
        for values in itertools.product(*param_lists):
            params = {k: v for k, v in zip(param_names, values) if v is not None}
            combos.append((family, int(n), params))
    if len(combos) > 1000:
        raise ConfigError(f"sweep produces {len(combos)} combinations; limit is 1000")
    return combos


def _sweep_row(cfg: RunConfig, family: str, n: int, params: dict):
    row = {
        "family": family, "n": n,
        "c": params.get("c", ""), "p": params.get("p", ""),
        "q": params.get("q", ""), "value": params.get("value", ""),
        "classification": "", "phi_limit": "", "envelope_width": "",
        "max_f2_residual": "", "eps_beta_ratio": "", "error": "",
    }
    try:
        prescription = build_family(family, n, **params)
        if isinstance(prescription, DirectionalPrescription):
            raise ConfigError("sweep supports radial families only")
        solution = ode.solve_radial(prescription, cfg.r_max, cfg.tol)
        analysis = asymptotics.analyze(
            solution, prescription, delta=cfg.delta, r_probe=cfg.r_probe, threshold=cfg.threshold
        )
        row["classification"] = analysis.classification
        row["max_f2_residual"] = float(np.max(ode.f2_residual(solution)))
        if analysis.phi_limit_estimate is not None:
            row["phi_limit"] = analysis.phi_limit_estimate
            row["envelope_width"] = analysis.tail_envelope[1] - analysis.tail_envelope[0]
        if analysis.tail_fit is not None and analysis.tail_fit.ratio is not None:
            row["eps_beta_ratio"] = analysis.tail_fit.ratio
    except Exception as exc:  # per-row failures are recorded, not fatal
        row["error"] = f"{type(exc).__name__}: {exc}"
    return [row[c] for c in SWEEP_COLUMNS]


def _run_sweep(cfg: RunConfig, out_dir: Path) -> int:
    combos = _sweep_combos(cfg)
    workers = os.environ.get(THREADS_ENV)
    max_workers = max(1, int(workers)) if workers else (os.cpu_count() or 1)
    if combos:
        # the warnings filter list is process-global, so this covers the pool
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            with ThreadPoolExecutor(max_workers=max_workers) as pool:
                rows = list(pool.map(lambda args: _sweep_row(cfg, *args), combos))
    else:
        rows = []
    write_csv(out_dir / "sweep_summary.csv", SWEEP_COLUMNS, rows)
    report = _base_report(cfg)
    report["combinations"] = len(combos)
    report["workers"] = max_workers
    report["errors"] = sum(1 for row in rows if row[-1])
    write_report(out_dir / "report.json", report)
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="radial-sigma2",
        description="Spacelike radial graphs with prescribed dilation-invariant scalar curvature",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "classify", "barriers", "verify", "sweep"):
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="path to the JSON run configuration")
        cmd.add_argument("--out", required=True, help="output directory for artifacts")
    args = parser.parse_args(argv)

    try:
        with open(args.config) as handle:
            data = json.load(handle)
        cfg = RunConfig.from_dict(args.command, data)
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(args.out)
    try:
        return run(cfg, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RadialSigma2Error as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            write_report(out_dir / "report.json", {"error": f"{type(exc).__name__}: {exc}"})
        except OSError:
            pass
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
