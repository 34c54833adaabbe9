import io
import json

import numpy as np
import pandas as pd
import pytest

from threshold_lab import cli
from threshold_lab.errors import InternalInconsistencyError

LOG2_OVER_2PI = np.log(2.0) / (2 * np.pi)


@pytest.fixture
def swave_run(write_json):
    return write_json("swave.json", {"centres": [[0, 0], [1, 0]], "alphas": [1.0, -1.0]})


@pytest.fixture
def single_run(write_json):
    return write_json("single.json", {"centres": [[0, 0]], "alphas": [0.0]})


def _json_out(capsys):
    return json.loads(capsys.readouterr().out)


class TestClassify:
    def test_reports_case(self, swave_run, capsys):
        assert cli.main(["classify", swave_run]) == 0
        payload = _json_out(capsys)
        assert payload["case"] == "s-wave"
        assert payload["metadata"]["command"] == "classify"
        assert payload["metadata"]["tolerance"] == 1e-10

    def test_tolerance_flag(self, swave_run, capsys):
        assert cli.main(["classify", swave_run, "--tolerance", "1e-6"]) == 0
        assert _json_out(capsys)["metadata"]["tolerance"] == 1e-6

    def test_output_file(self, swave_run, tmp_path, capsys):
        target = tmp_path / "out" / "classify.json"
        assert cli.main(["classify", swave_run, "-o", str(target)]) == 0
        assert json.loads(target.read_text())["case"] == "s-wave"
        assert "wrote report" in capsys.readouterr().err

    def test_missing_file_is_input_error(self, tmp_path, capsys):
        assert cli.main(["classify", str(tmp_path / "absent.json")]) == 2
        assert "Error:" in capsys.readouterr().err

    def test_invalid_tolerance(self, swave_run):
        assert cli.main(["classify", swave_run, "--tolerance", "2"]) == 2


class TestSpectrum:
    def test_single_centre_csv(self, single_run, capsys):
        assert cli.main(["spectrum", single_run, "--points-per-decade", "16"]) == 0
        out = capsys.readouterr().out
        assert out.startswith("# command=spectrum; tolerance=")
        frame = pd.read_csv(io.StringIO(out), comment="#")
        assert list(frame.columns) == ["kappa", "energy", "multiplicity", "c_1"]
        assert frame["kappa"].iloc[0] == pytest.approx(1.1229189, rel=1e-7)
        assert frame["multiplicity"].iloc[0] == 1

    def test_bad_argument(self, single_run):
        assert cli.main(["spectrum", single_run, "--kappa-min", "-1"]) == 2


class TestZeroMode:
    def test_run_file(self, write_json, capsys):
        path = write_json("zero.json", {"centres": [[0, 0], [1, 0], [2, 0]],
                                        "alphas": [-LOG2_OVER_2PI, 0.0, -LOG2_OVER_2PI]})
        assert cli.main(["zero-mode", path]) == 0
        (mode,) = _json_out(capsys)["zero_modes"]
        assert abs(np.dot(mode, [1, -2, 1])) / np.sqrt(6) == pytest.approx(1.0, abs=1e-10)

    def test_design(self, write_json, capsys):
        path = write_json("centres.json", {"centres": [[0, 0], [1, 0], [2, 0]]})
        assert cli.main(["zero-mode", "--design", path]) == 0
        design = _json_out(capsys)["design"]
        np.testing.assert_allclose(design["alpha"], [-LOG2_OVER_2PI, 0.0, -LOG2_OVER_2PI], atol=1e-14)

    def test_no_design_possible(self, write_json, capsys):
        path = write_json("centres.json", {"centres": [[0, 0], [1, 0], [0, 1]]})
        assert cli.main(["zero-mode", "--design", path]) == 0
        assert _json_out(capsys)["design"] == "none"

    def test_obstructed_design(self, write_json, capsys):
        path = write_json("centres.json", {"centres": [[0, 0], [1, 0], [2, 0], [0, 5]]})
        assert cli.main(["zero-mode", "--design", path]) == 2

    def test_needs_an_input(self):
        assert cli.main(["zero-mode"]) == 2


class TestResolventGrid:
    def test_regular_configuration(self, write_json, tmp_path):
        path = write_json("regular.json", {"centres": [[0, 0], [float(np.e), 0]], "alphas": [0.0, 0.0]})
        target = tmp_path / "grid.csv"
        argv = ["resolvent-grid", path, "--x", "0.3", "0.2", "--y", "-0.4", "1.1", "-o", str(target)]
        assert cli.main(argv) == 0
        lines = target.read_text().splitlines()
        assert lines[0].startswith("# command=resolvent-grid;")
        assert len(pd.read_csv(target, comment="#")) == 29

    def test_resonant_configuration_is_input_error(self, swave_run, capsys):
        argv = ["resolvent-grid", swave_run, "--x", "0.3", "0.2", "--y", "-0.4", "1.1"]
        assert cli.main(argv) == 2
        assert "validate-asymptotics" in capsys.readouterr().err

    def test_points_are_required(self, swave_run):
        assert cli.main(["resolvent-grid", swave_run]) == 2


class TestValidateAsymptotics:
    def test_summary_and_table(self, swave_run, tmp_path, capsys):
        table = tmp_path / "sweep.csv"
        argv = ["validate-asymptotics", swave_run, "--lambda-min", "1e-8", "--lambda-max", "1e-3",
                "--points-per-decade", "2", "--csv", str(table)]
        assert cli.main(argv) == 0
        summary = _json_out(capsys)
        assert summary["case"] == "s-wave"
        assert summary["points"] == 11
        assert len(pd.read_csv(table, comment="#")) == 11


class TestExitCodes:
    def test_numerical_failure(self, single_run, capsys):
        argv = ["wave-probe", single_run, "--operator", "K", "--r-max", "2", "--n-r", "64", "--n-theta", "8",
                "--corpus-size", "1"]
        assert cli.main(argv) == 1
        assert "Numerical failure" in capsys.readouterr().err

    def test_internal_inconsistency(self, swave_run, monkeypatch):
        def broken(*args, **kwargs):
            raise InternalInconsistencyError("mixed threshold structure")

        monkeypatch.setattr(cli, "classify", broken)
        assert cli.main(["classify", swave_run]) == 3

    def test_mixed_structure_exits_with_internal_code(self, write_json, capsys):
        logs = np.log([1.0, 2.0, np.hypot(1.0, 2.0)]) / (2 * np.pi)
        alphas = [logs[0] + logs[1] - logs[2], logs[0] + logs[2] - logs[1], logs[1] + logs[2] - logs[0]]
        path = write_json("mixed.json", {"centres": [[0, 0], [1, 0], [0, 2]], "alphas": alphas})
        assert cli.main(["classify", path]) == 3
        assert "u 1^t + 1 u^t" in capsys.readouterr().err

    def test_unknown_command(self):
        assert cli.main(["frobnicate"]) == 2
