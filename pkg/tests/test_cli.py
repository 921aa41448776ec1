"""Exit codes, report schemas, and determinism of the command-line driver."""

import json

import numpy as np
import pytest

from minsurf import cli


def run(argv):
    return cli.main(argv)


def load(path):
    with open(path) as fh:
        return json.load(fh)


class TestOde:
    def test_happy_path(self, tmp_path):
        out = tmp_path / "r.json"
        assert run(["ode", "--v0", "0", "--out", str(out)]) == 0
        rep = load(out)
        assert rep["schema"] == "minsurf-report/1"
        assert rep["passed"] is True
        assert rep["first_integral_residual"] <= rep["residual_bound"]
        assert rep["length_check"]["ok"] is True

    def test_tolerance_scales_residual(self, tmp_path):
        out = tmp_path / "r.json"
        assert run(["ode", "--v0", "0", "--tol", "1e-12",
                    "--out", str(out)]) == 0
        assert load(out)["first_integral_residual"] <= 1e-10

    def test_negative_v0_is_usage_error(self):
        assert run(["ode", "--v0", "-1"]) == 64

    def test_integrating_past_blowup_reports_divergence(self, tmp_path):
        assert run(["ode", "--v0", "0", "--x-frac", "1.05",
                    "--out", str(tmp_path / "r.json")]) == 2

    def test_csv_export(self, tmp_path):
        csv = tmp_path / "samples.csv"
        assert run(["ode", "--v0", "0.5", "--csv", str(csv),
                    "--out", str(tmp_path / "r.json")]) == 0
        data = np.loadtxt(csv, delimiter=",", skiprows=1)
        assert data.shape[1] == 3
        assert data[0, 1] == pytest.approx(0.5)  # g(0) = v0


class TestSolve:
    def test_happy_path_with_csv(self, tmp_path):
        out, csv = tmp_path / "r.json", tmp_path / "u.csv"
        rc = run(["solve", "--width", "0.8", "--nx", "33", "--ny", "32",
                  "--out", str(out), "--csv", str(csv)])
        assert rc == 0
        rep = load(out)
        assert rep["residual"] <= 1e-10
        from minsurf.fields import ScalarField
        u = ScalarField.from_csv(csv)
        assert u.spec.nx == 33 and u.spec.ny == 32

    def test_width_beyond_maximal_strip_is_usage_error(self, tmp_path):
        assert run(["solve", "--width", "3.0",
                    "--out", str(tmp_path / "r.json")]) == 64


@pytest.fixture(scope="module")
def solved_csv(tmp_path_factory):
    d = tmp_path_factory.mktemp("zl")
    csv = d / "u.csv"
    assert run(["solve", "--width", "0.8", "--nx", "33", "--ny", "32",
                "--out", str(d / "r.json"), "--csv", str(csv)]) == 0
    return csv


class TestZlocus:
    def test_detects_axis_curve_at_discretization_tolerance(
            self, solved_csv, tmp_path):
        out = tmp_path / "z.json"
        # the solved chart sits O(h^2) off the continuum profile, so the
        # locus thickness tolerance must scale with it
        assert run(["zlocus", "--input", str(solved_csv), "--tol-z", "1e-4",
                    "--out", str(out)]) == 0
        rep = load(out)
        assert len(rep["components"]) == 1
        comp = rep["components"][0]
        assert comp["kind"] == "Curve" and comp["closed"]
        assert comp["generic"] is False

    def test_strict_tolerance_sees_nothing(self, solved_csv, tmp_path):
        out = tmp_path / "z.json"
        assert run(["zlocus", "--input", str(solved_csv),
                    "--out", str(out)]) == 0
        assert load(out)["components"] == []

    def test_corrupted_input_names_the_invariant(self, solved_csv,
                                                 tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        text = solved_csv.read_text().splitlines()
        head, rows = text[:2], text[2:]
        parts = rows[40].split(",")
        parts[-1] = "nan"
        rows[40] = ",".join(parts)
        bad.write_text("\n".join(head + rows) + "\n")
        assert run(["zlocus", "--input", str(bad)]) == 64
        assert "non-finite" in capsys.readouterr().err


class TestDeform:
    def test_straight_curve_is_skipped_not_fatal(self, tmp_path):
        out = tmp_path / "d.json"
        assert run(["deform", "--out", str(out)]) == 0
        rep = load(out)
        assert rep["components"], "invariant chart must expose its axis"
        assert all(c["status"] == "skipped" for c in rep["components"])
        assert all(c["error"] == "NonGenericCurve"
                   for c in rep["components"])

    def test_manual_bump_writes_field(self, tmp_path):
        out, csv = tmp_path / "d.json", tmp_path / "f.csv"
        rc = run(["deform", "--bump-center", "0.0,0.5", "--bump-r", "0.45",
                  "--field-csv", str(csv), "--out", str(out)])
        assert rc == 0
        from minsurf.fields import ScalarField
        f = ScalarField.from_csv(csv)
        assert f.sup() > 0.0


class TestFlow:
    def test_reports_contracted_curvatures(self, tmp_path):
        out = tmp_path / "f.json"
        assert run(["flow", "--t", "1e-3", "--out", str(out)]) == 0
        rep = load(out)
        assert rep["constraint_drift"] <= 1e-9
        assert rep["lambda_plus"]["plateau_max"] < 1.0

    def test_negative_time_opens_curvatures(self, tmp_path):
        out = tmp_path / "f.json"
        # "=" form keeps argparse from reading the negative value as a flag
        assert run(["flow", "--t=-1e-3", "--out", str(out)]) == 0
        assert load(out)["lambda_plus"]["plateau_max"] > 1.0


class TestVerify:
    def test_single_criterion(self, tmp_path):
        out = tmp_path / "v.json"
        assert run(["verify", "--only", "01-ode-first-integral",
                    "--out", str(out)]) == 0
        rep = load(out)
        assert rep["all_passed"] is True
        assert len(rep["criteria"]) == 1
        assert rep["criteria"][0]["passed"] is True

    def test_unknown_criterion_is_usage_error(self):
        assert run(["verify", "--only", "bogus-name"]) == 64

    def test_reports_are_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for p in (a, b):
            assert run(["verify", "--only", "01-ode-first-integral",
                        "--only", "09-moment-conditions",
                        "--out", str(p)]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestDemo:
    def test_demo_passes_at_reduced_resolution(self, tmp_path):
        out = tmp_path / "demo.json"
        assert run(["demo", "--fine", "64", "--out", str(out)]) == 0
        rep = load(out)
        assert rep["passed"] is True
        assert rep["center_error_vs_1_minus_t"] <= rep["center_tolerance"]
        assert abs(rep["slope_dlambda_dt"] + 1.0) <= rep["slope_tolerance"]


class TestUsage:
    def test_no_arguments(self):
        assert run([]) == 64

    def test_unknown_subcommand(self):
        assert run(["frobnicate"]) == 64
