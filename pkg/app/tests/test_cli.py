"""
Command-line entry point, problem files and output writers
"""
import csv
import json
from pathlib import Path

import numpy as np
import pytest

from app.config.problem_loader import load_problem, parse_problem
from app.core.exceptions import CoefficientError, ConfigError
from app.main import main
from app.schemas.band_edges import EdgeSide
from app.schemas.perturbation import PerturbationKind
from app.utils.csv_writer import eps_tag, format_value, write_csv

CONFIGS = Path(__file__).resolve().parents[2] / "configs"


def _read_csv(path: Path):
    with path.open(encoding="utf-8") as handle:
        return list(csv.reader(handle))


def _write_toml(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "problem.toml"
    path.write_text(text, encoding="utf-8")
    return path


class TestProblemLoader:

    def test_shipped_configs_load(self):
        for path in sorted(CONFIGS.glob("*.toml")):
            config = load_problem(path)
            assert config.run.lambda_max > 0.0 or config.perturbation.kind == PerturbationKind.EMBEDDED_EXAMPLE

    def test_square_well_fields(self):
        config = load_problem(CONFIGS / "square_well.toml")
        assert config.perturbation.kind == PerturbationKind.DIFFERENTIAL
        assert config.run.epsilons == [0.2, 0.1, 0.05]
        assert config.run.edges[0].side == EdgeSide.PLUS
        assert config.oracle.h == pytest.approx(1.0 / 64.0)

    def test_syntax_error_reports_line(self, tmp_path):
        path = _write_toml(tmp_path, "[run]\nepsilons = [0.1,\nlambda_max = = 3\n")
        with pytest.raises(ConfigError) as info:
            load_problem(path)
        assert info.value.details["line"] is not None

    def test_invalid_field_reports_path(self):
        with pytest.raises(ConfigError) as info:
            parse_problem({"run": {"epsilons": [0.1, -0.2]}})
        assert info.value.details["field"].startswith("run.epsilons")

    def test_bad_coefficients_rejected(self):
        data = {"coefficients": {"p": [{"kind": "constant", "value": 2.0}]}}
        with pytest.raises(CoefficientError):
            parse_problem(data)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_problem(tmp_path / "absent.toml")


class TestWriters:

    def test_format_value(self):
        assert format_value(None) == ""
        assert format_value(True) == "true"
        assert format_value(np.bool_(False)) == "false"
        assert format_value(3) == "3"
        assert format_value(0.1) == "1.0000000000000001e-01"
        assert format_value(EdgeSide.MINUS) == "minus"

    def test_write_csv(self, tmp_path):
        path = write_csv(tmp_path / "nested" / "table.csv", ["a", "b"], [(1, 0.5), (2, None)])
        assert _read_csv(path) == [["a", "b"], ["1", "5.0000000000000000e-01"], ["2", ""]]

    def test_eps_tag(self):
        assert eps_tag(0.2) == "0.2"
        assert eps_tag(1e-3) == "0.001"


class TestCommands:

    def test_bands(self, tmp_path):
        code = main(["bands", "--config", str(CONFIGS / "cos_potential.toml"), "--out", str(tmp_path), "--quiet"])
        assert code == 0
        bands = _read_csv(tmp_path / "bands.csv")
        assert bands[0] == ["lambda", "ReD", "ImD", "in_band"]
        assert all(float(row[0]) <= 25.0 for row in bands[1:])
        edges = _read_csv(tmp_path / "edges.csv")
        assert edges[0] == ["n", "side", "parity", "mu", "ddot", "degenerate"]
        assert edges[1][:2] == ["0", "plus"]
        mus = [float(row[3]) for row in edges[1:]]
        assert mus == sorted(mus)

    def test_lambda_max_override(self, tmp_path):
        args = ["bands", "--config", str(CONFIGS / "cos_potential.toml"), "--out", str(tmp_path),
                "--lambda-max", "5", "--quiet"]
        assert main(args) == 0
        assert all(float(row[0]) <= 5.0 for row in _read_csv(tmp_path / "bands.csv")[1:])

    def test_gap_eig_square_well(self, tmp_path, square_well_k):
        code = main(["gap-eig", "--config", str(CONFIGS / "square_well.toml"), "--out", str(tmp_path), "--quiet"])
        assert code == 0
        report = json.loads((tmp_path / "report_n0_plus_eps0.2.json").read_text(encoding="utf-8"))
        assert report["exists"] == "yes"
        assert report["k1"]["re"] == pytest.approx(1.0, abs=1e-6)
        assert report["lambda_exact"]["re"] == pytest.approx(-square_well_k(0.2) ** 2, abs=1e-8)
        assert (tmp_path / "report_n0_plus_eps0.05.txt").read_text(encoding="utf-8").startswith("n = 0")
        assert _read_csv(tmp_path / "eigenfunction_n0_plus_eps0.1.csv")[0] == ["x", "Re psi", "Im psi"]
        assert (tmp_path / "kernel_edge_n0_plus_eps0.2.csv").exists()

    def test_gap_eig_parallel_matches_serial(self, tmp_path):
        serial, parallel = tmp_path / "serial", tmp_path / "parallel"
        config = str(CONFIGS / "square_well.toml")
        assert main(["gap-eig", "--config", config, "--out", str(serial), "--jobs", "1", "--quiet"]) == 0
        assert main(["gap-eig", "--config", config, "--out", str(parallel), "--jobs", "2", "--quiet"]) == 0
        for name in ("report_n0_plus_eps0.2.txt", "report_n0_plus_eps0.05.txt"):
            assert (serial / name).read_text(encoding="utf-8") == (parallel / name).read_text(encoding="utf-8")

    def test_missing_config(self, tmp_path, capsys):
        assert main(["gap-eig", "--out", str(tmp_path), "--quiet"]) == 2
        assert capsys.readouterr().err.startswith("ERROR code=2 kind=ConfigError")

    def test_bad_toml(self, tmp_path, capsys):
        path = _write_toml(tmp_path, "[run\nlambda_max = 1\n")
        assert main(["bands", "--config", str(path), "--out", str(tmp_path), "--quiet"]) == 2
        line = capsys.readouterr().err.strip().splitlines()[-1]
        assert line.startswith("ERROR code=2 kind=ConfigError")
        assert "line=" in line

    def test_zero_jobs(self, tmp_path):
        args = ["bands", "--config", str(CONFIGS / "cos_potential.toml"), "--out", str(tmp_path), "--jobs", "0"]
        assert main(args) == 2

    def test_embedded_demo_without_oracle(self, tmp_path):
        assert main(["embedded-demo", "--out", str(tmp_path), "--skip-oracle", "--quiet"]) == 0
        witness = _read_csv(tmp_path / "embedded_witness.csv")
        assert witness[0] == ["x", "Re psi", "Im psi"]
        report = json.loads((tmp_path / "report_embedded.json").read_text(encoding="utf-8"))
        assert report["passed"] is True
        assert report["lambda_e"] == pytest.approx((np.pi / 0.18) ** 2)


@pytest.mark.slow
class TestVerify:

    def test_square_well_against_oracle(self, tmp_path):
        path = _write_toml(tmp_path, "\n".join([
            "[perturbation]",
            'kind = "differential"',
            "q_lo = -1.0",
            "q_hi = 1.0",
            'b0 = { kind = "indicator", lo = -1.0, hi = 1.0 }',
            "[run]",
            "epsilons = [0.2]",
            'edges = [{ n = 0, side = "plus" }]',
            "lambda_max = 1.0",
            "[oracle]",
            "R = 30.0",
            "h = 0.03125",
            "refinements = 3",
            "",
        ]))
        out = tmp_path / "out"
        assert main(["verify", "--config", str(path), "--out", str(out), "--quiet"]) == 0
        rows = _read_csv(out / "verify.csv")
        assert len(rows[0]) == 16
        assert rows[1][4] == "1"
        assert rows[1][14] == "true"
        assert (out / "oracle_n0_plus_eps0.2.csv").exists()

    def test_embedded_demo_with_oracle(self, tmp_path):
        assert main(["embedded-demo", "--out", str(tmp_path), "--quiet"]) == 0
        report = json.loads((tmp_path / "report_embedded.json").read_text(encoding="utf-8"))
        assert report["passed"] is True
        assert report["lambda_e"] == pytest.approx(304.6174, abs=1e-3)
        assert report["oracle_error"] <= 1e-3
        assert report["oracle_tail_mass"] <= 1e-4
        assert len(_read_csv(tmp_path / "oracle_embedded.csv")) == 3

    def test_verify_embedded_config(self, tmp_path):
        config = str(CONFIGS / "embedded_demo.toml")
        assert main(["verify", "--config", config, "--out", str(tmp_path), "--quiet"]) == 0
        report = json.loads((tmp_path / "report_embedded.json").read_text(encoding="utf-8"))
        assert report["oracle_error"] <= 1e-3
