"""Render the four diagnostic figures from solver artifacts.

Inputs are the documented artifact files only (solution.csv, report.json,
patch_residuals.csv); the solver package itself is never imported.

  1  s(r) against the diagonal, with the trap curve overlay
  2  log-scale decay of |eps| and |beta| with the stationary-ratio line
  3  phi profile with the limit estimate and its envelope band
  4  verification residual against grid spacing with an order-2 reference
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

SOLUTION_COLUMNS = ["r", "s", "s_prime", "eps", "phi", "kappa_r", "kappa_t", "sigma2", "f2_residual"]
PATCH_COLUMNS = [
    "spacing",
    "interior_nodes",
    "max_rel_residual",
    "mean_rel_residual",
    "admissible_fraction",
    "worst_sigma2",
]
FIGURE_FILES = {
    "1": "fig1_s_vs_r.png",
    "2": "fig2_tail_decay.png",
    "3": "fig3_phi_profile.png",
    "4": "fig4_residual_order.png",
}
_FLOOR = 1e-18


class ArtifactError(RuntimeError):
    """Missing or malformed input artifact."""


@dataclass
class FigureSpec:
    """One rendering request: artifact directory, selector, output directory."""

    input_dir: Path
    figure: str = "all"
    output_dir: Path = Path(".")
    dpi: int = 150

    def __post_init__(self):
        self.input_dir = Path(self.input_dir)
        self.output_dir = Path(self.output_dir)
        if self.figure not in ("all", "1", "2", "3", "4"):
            raise ArtifactError(f"figure selector must be 1..4 or 'all', got {self.figure!r}")


def _load_csv(path: Path, expected_header: list[str]) -> dict[str, np.ndarray]:
    if not path.exists():
        raise ArtifactError(f"missing artifact {path}")
    with open(path) as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ArtifactError(f"{path} is empty") from None
        if header != expected_header:
            raise ArtifactError(f"{path} header {header} does not match {expected_header}")
        try:
            rows = [[float(cell) for cell in row] for row in reader if row]
        except ValueError as exc:
            raise ArtifactError(f"{path} contains a non-numeric cell: {exc}") from exc
    if not rows:
        raise ArtifactError(f"{path} has no data rows")
    data = np.asarray(rows)
    return {name: data[:, k] for k, name in enumerate(expected_header)}


def _load_report(directory: Path) -> dict:
    path = directory / "report.json"
    if not path.exists():
        raise ArtifactError(f"missing artifact {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{path} is not valid JSON: {exc}") from exc


def _implied_h(sol: dict[str, np.ndarray], n: int) -> np.ndarray:
    """h along the run, reconstructed as e^phi sqrt(sigma2 / C(n,2))."""
    return np.exp(sol["phi"]) * np.sqrt(sol["sigma2"] / math.comb(n, 2))


def _figure_1(sol, report, path, dpi):
    r, s = sol["r"], sol["s"]
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ax.plot(r, s, color="tab:blue", lw=1.6, label="s(r)")
    ax.plot(r, r, color="black", ls="--", lw=1.0, label="diagonal s = r")
    coeff = report.get("trap_curve_coefficient")
    if coeff:
        h = _implied_h(sol, int(report["dimension"]))
        with np.errstate(over="ignore"):
            trap = np.arcsinh(coeff * h * np.sinh(r))
        ax.plot(r, trap, color="tab:red", ls=":", lw=1.2, label="trap curve C")
    ax.set_xlabel("r")
    ax.set_ylabel("s")
    ax.set_title("normal-direction distance vs radius")
    ax.legend(loc="upper left")
    fig.savefig(path, dpi=dpi)
    plt.close(fig)


def _figure_2(sol, report, path, dpi):
    n = int(report["dimension"])
    r = sol["r"]
    eps = np.abs(sol["eps"])
    h = _implied_h(sol, n)
    beta = np.abs(1.0 - h * h)
    stationary = n / (2.0 * (n - 1.0))
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    degenerate = float(np.max(beta)) < 1e-14 and float(np.max(eps)) < 1e-14
    if degenerate:
        ax.plot(r, np.full_like(r, _FLOOR), color="tab:gray", lw=1.0)
        ax.text(0.5, 0.5, "eps and beta vanish (exact solution)", transform=ax.transAxes, ha="center")
        ax.set_yscale("log")
    else:
        mask = r > 0
        ax.semilogy(r[mask], np.maximum(eps[mask], _FLOOR), color="tab:blue", lw=1.4, label="|eps| = |r - s|")
        ax.semilogy(r[mask], np.maximum(beta[mask], _FLOOR), color="tab:orange", lw=1.4, label="|beta| = |1 - h^2|")
        ax.semilogy(
            r[mask],
            np.maximum(stationary * beta[mask], _FLOOR),
            color="tab:green",
            ls="--",
            lw=1.1,
            label=f"n/(2(n-1)) beta = {stationary:.3g} beta",
        )
        ax.legend(loc="lower left")
    ax.set_xlabel("r")
    ax.set_ylabel("decay")
    ax.set_title("tail decay and stationary balance")
    fig.savefig(path, dpi=dpi)
    plt.close(fig)


def _figure_3(sol, report, path, dpi):
    r, phi = sol["r"], sol["phi"]
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ax.plot(r, phi, color="tab:blue", lw=1.6, label="phi(r)")
    estimate = report.get("phi_limit_estimate")
    envelope = report.get("tail_envelope")
    if estimate is not None:
        ax.axhline(estimate, color="tab:red", ls="--", lw=1.0, label="limit estimate")
        if envelope:
            lo = float(phi[-1]) - float(envelope[1])
            hi = float(phi[-1]) - float(envelope[0])
            ax.axhspan(lo, hi, color="tab:red", alpha=0.2, label="limit envelope")
    ax.set_xlabel("r")
    ax.set_ylabel("phi")
    ax.set_title(f"height profile ({report.get('classification', 'unclassified')})")
    ax.legend(loc="best")
    fig.savefig(path, dpi=dpi)
    plt.close(fig)


def _figure_4(patch, report, path, dpi):
    spacing = patch["spacing"]
    residual = patch["max_rel_residual"]
    order = np.argsort(spacing)
    spacing, residual = spacing[order], residual[order]
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ax.loglog(spacing, residual, "o-", color="tab:blue", lw=1.4, label="max relative residual")
    anchor = residual[-1] / spacing[-1] ** 2
    ax.loglog(spacing, anchor * spacing**2, ls="--", color="black", lw=1.0, label="order-2 reference")
    ax.set_xlabel("grid spacing")
    ax.set_ylabel("residual")
    ax.set_title("prescription residual under refinement")
    ax.legend(loc="upper left")
    fig.savefig(path, dpi=dpi)
    plt.close(fig)


def render(spec: FigureSpec) -> list[Path]:
    """Render the requested figures; returns the written files.

    With figure='all', every figure whose inputs exist in the artifact
    directory is rendered; rendering nothing at all is an error.
    """
    spec.output_dir.mkdir(parents=True, exist_ok=True)
    report = _load_report(spec.input_dir)
    solution_path = spec.input_dir / "solution.csv"
    patch_path = spec.input_dir / "patch_residuals.csv"

    wanted = ["1", "2", "3", "4"] if spec.figure == "all" else [spec.figure]
    written: list[Path] = []
    for key in wanted:
        out_path = spec.output_dir / FIGURE_FILES[key]
        if key in ("1", "2", "3"):
            if not solution_path.exists():
                if spec.figure == "all":
                    continue
                raise ArtifactError(f"figure {key} needs {solution_path}")
            sol = _load_csv(solution_path, SOLUTION_COLUMNS)
            {"1": _figure_1, "2": _figure_2, "3": _figure_3}[key](sol, report, out_path, spec.dpi)
        else:
            if not patch_path.exists():
                if spec.figure == "all":
                    continue
                raise ArtifactError(f"figure 4 needs {patch_path}")
            patch = _load_csv(patch_path, PATCH_COLUMNS)
            _figure_4(patch, report, out_path, spec.dpi)
        written.append(out_path)
    if not written:
        raise ArtifactError(f"no renderable artifacts in {spec.input_dir}")
    return written


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="radial-sigma2-figures",
        description="Render diagnostic figures from radial-sigma2 artifacts",
    )
    parser.add_argument("--in", dest="input_dir", required=True, help="artifact directory")
    parser.add_argument("--fig", default="all", help="figure number 1..4 or 'all'")
    parser.add_argument("--out", dest="output_dir", required=True, help="directory for image files")
    parser.add_argument("--dpi", type=int, default=150)
    args = parser.parse_args(argv)
    try:
        spec = FigureSpec(Path(args.input_dir), args.fig, Path(args.output_dir), args.dpi)
        written = render(spec)
    except ArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
