"""Render checks against real artifacts produced by the solver CLI.

The artifact directories mirror the solver acceptance runs: the exact
solution (criterion 1), the bounded p = 2 family (criteria 6 and 7), and a
patch verification (criterion 8).  The solver is driven strictly through its
command line; nothing from the radial_sigma2 package is imported here.
"""

import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from radial_sigma2_figures import FigureSpec, render
from radial_sigma2_figures.render import FIGURE_FILES, main


def run_solver(command, config, out_dir):
    config_path = out_dir.parent / f"{out_dir.name}_config.json"
    config_path.write_text(json.dumps(config))
    proc = subprocess.run(
        [sys.executable, "-m", "radial_sigma2.cli", command, "--config", str(config_path), "--out", str(out_dir)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    return out_dir


@pytest.fixture(scope="module")
def artifacts(tmp_path_factory):
    base = tmp_path_factory.mktemp("artifacts")
    dirs = {}
    dirs["exact"] = run_solver(
        "solve",
        {"dimension": 3, "prescription": {"family": "constant", "value": 1.0}, "r_max": 30.0, "tol": 1e-10},
        base / "exact",
    )
    dirs["bounded"] = run_solver(
        "solve",
        {
            "dimension": 3,
            "prescription": {"family": "power-deficit", "c": 0.3, "p": 2.0},
            "r_max": 40.0,
            "tol": 1e-10,
            "delta": 0.005,
        },
        base / "bounded",
    )
    dirs["patch"] = run_solver(
        "verify",
        {
            "dimension": 2,
            "prescription": {"family": "even-deficit", "c": 0.3, "p": 2.0},
            "spacing": 0.04,
            "box": 0.8,
            "tol": 1e-10,
        },
        base / "patch",
    )
    return dirs


class TestRenderAll:
    def test_solve_artifacts_render_figures_1_to_3(self, artifacts, tmp_path):
        for name in ("exact", "bounded"):
            out = tmp_path / f"figs_{name}"
            written = render(FigureSpec(artifacts[name], "all", out))
            files = {p.name for p in written}
            assert files == {FIGURE_FILES[k] for k in ("1", "2", "3")}
            for path in written:
                assert path.stat().st_size > 5_000  # a real image, not a stub

    def test_verify_artifacts_render_figure_4(self, artifacts, tmp_path):
        out = tmp_path / "figs_patch"
        written = render(FigureSpec(artifacts["patch"], "all", out))
        assert {p.name for p in written} == {FIGURE_FILES["4"]}
        assert written[0].stat().st_size > 5_000

    def test_all_four_figures_across_the_acceptance_artifacts(self, artifacts, tmp_path):
        rendered = set()
        for name in ("exact", "bounded", "patch"):
            out = tmp_path / f"sweep_{name}"
            rendered |= {p.name for p in render(FigureSpec(artifacts[name], "all", out))}
        assert rendered == set(FIGURE_FILES.values())


class TestFigureContent:
    def test_exact_run_sits_on_the_diagonal(self, artifacts, tmp_path):
        # "zero visible deviation": the plotted s data deviates from the
        # diagonal by orders of magnitude less than a pixel
        with open(artifacts["exact"] / "solution.csv") as handle:
            reader = csv.reader(handle)
            header = next(reader)
            rows = np.asarray([[float(v) for v in row] for row in reader])
        r = rows[:, header.index("r")]
        s = rows[:, header.index("s")]
        assert np.max(np.abs(s - r)) < 1e-6
        written = render(FigureSpec(artifacts["exact"], "1", tmp_path / "diag"))
        assert written[0].exists()

    def test_bounded_run_envelope_band_present(self, artifacts):
        report = json.loads((artifacts["bounded"] / "report.json").read_text())
        assert report["classification"] == "Bounded"
        assert report["phi_limit_estimate"] is not None
        lo, hi = report["tail_envelope"]
        assert hi - lo < 1e-4

    def test_patch_residuals_slope_is_second_order(self, artifacts):
        with open(artifacts["patch"] / "patch_residuals.csv") as handle:
            reader = csv.reader(handle)
            header = next(reader)
            rows = np.asarray([[float(v) for v in row] for row in reader])
        spacing = rows[:, header.index("spacing")]
        residual = rows[:, header.index("max_rel_residual")]
        slope = np.polyfit(np.log(spacing), np.log(residual), 1)[0]
        assert slope == pytest.approx(2.0, abs=0.3)


class TestCliEntryPoint:
    def test_renders_via_argv(self, artifacts, tmp_path):
        out = tmp_path / "cli_out"
        code = main(["--in", str(artifacts["bounded"]), "--fig", "3", "--out", str(out)])
        assert code == 0
        assert (out / FIGURE_FILES["3"]).exists()

    def test_missing_inputs_fail(self, artifacts, tmp_path):
        code = main(["--in", str(artifacts["exact"]), "--fig", "4", "--out", str(tmp_path / "x")])
        assert code == 1
        code = main(["--in", str(tmp_path / "nowhere"), "--fig", "all", "--out", str(tmp_path / "y")])
        assert code == 1

    def test_malformed_csv_fails(self, artifacts, tmp_path):
        broken = tmp_path / "broken"
        broken.mkdir()
        (broken / "report.json").write_text((artifacts["exact"] / "report.json").read_text())
        (broken / "solution.csv").write_text("r,s\n0,not-a-number\n")
        code = main(["--in", str(broken), "--fig", "1", "--out", str(tmp_path / "z")])
        assert code == 1

    def test_deterministic_output(self, artifacts, tmp_path):
        out1 = tmp_path / "d1"
        out2 = tmp_path / "d2"
        main(["--in", str(artifacts["bounded"]), "--fig", "2", "--out", str(out1)])
        main(["--in", str(artifacts["bounded"]), "--fig", "2", "--out", str(out2)])
        assert (out1 / FIGURE_FILES["2"]).read_bytes() == (out2 / FIGURE_FILES["2"]).read_bytes()
