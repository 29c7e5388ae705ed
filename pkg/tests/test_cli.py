"""Tests for the lowdeg command line."""

import io
import json
from pathlib import Path
from typing import Any
from unittest.mock import Mock, patch

import pytest

from app.cli import EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, build_parser, config_from_args, main
from app.config import settings
from app.core.poly import MultiPoly, table_of
from app.schemas.experiments import CensusReport
from app.schemas.run import Command


def _json(capsys: pytest.CaptureFixture[str]) -> dict[str, Any]:
    return json.loads(capsys.readouterr().out)


@pytest.mark.unit
class TestArguments:
    """Test cases for argument translation."""

    def test_defaults(self) -> None:
        """Test the configuration built from bare arguments."""
        config = config_from_args(build_parser().parse_args(["params"]))

        assert config.command is Command.PARAMS
        assert (config.p, config.s, config.m, config.d) == (5, 1, 2, 1)

    def test_pairs_and_points(self) -> None:
        """Test the A:B list syntax."""
        args = build_parser().parse_args(
            ["self-correct", "--corrupt-point", "40:0", "--pairs", "2:2,3:2"]
        )
        config = config_from_args(args)

        assert (config.corrupt_point, config.corrupt_value) == (40, 0)
        assert config.pairs == [(2, 2), (3, 2)]

    def test_rational_corruption(self) -> None:
        """Test fractions are accepted as decimals or num/den."""
        for text in ("0.05", "1/20"):
            config = config_from_args(build_parser().parse_args(["lowdeg-mc", "--corrupt", text]))
            assert config.corrupt * 20 == 1

    def test_input_routing(self, tmp_path: Path, linear_gf5: MultiPoly) -> None:
        """Test --input feeds the table of table commands."""
        path = tmp_path / "table.txt"
        path.write_text(table_of(linear_gf5).to_text())
        config = config_from_args(build_parser().parse_args(["char-check", "--input", str(path)]))

        assert config.table == path.read_text()
        assert config.codeword is None


@pytest.mark.unit
class TestMain:
    """Test cases for main()."""

    def test_char_census(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test the GF(3) census prints a JSON report."""
        code = main(["char-census", "--p", "3", "--m", "2", "--d", "1"])

        assert code == EXIT_OK
        data = _json(capsys)
        assert data["report"]["passing_count"] == 27
        assert data["report"]["degree_le_d_count"] == 27

    def test_counterexample(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test the GF(5) counterexample has total degree 5."""
        code = main(["counterexample", "--p", "5", "--d", "4"])

        assert code == EXIT_OK
        assert _json(capsys)["report"]["total_deg"] == 5

    def test_output_is_deterministic(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test identical invocations print identical bytes."""
        argv = ["lowdeg-mc", "--p", "7", "--d", "1", "--corrupt", "0.1", "--trials", "3000"]
        main([*argv, "--workers", "1"])
        first = capsys.readouterr().out
        main([*argv, "--workers", "3"])

        assert capsys.readouterr().out == first

    def test_workers_do_not_outlive_the_run(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test --workers applies to one run and stays out of the report."""
        before = settings.max_workers
        config = config_from_args(build_parser().parse_args(["params", "--workers", "3"]))

        assert config.workers == 3
        assert main(["params", "--workers", "3"]) == EXIT_OK
        assert settings.max_workers == before
        assert "workers" not in _json(capsys)["config"]

    def test_unknown_command(self) -> None:
        """Test argparse errors exit with the usage code."""
        assert main(["lowdeg-everything"]) == EXIT_USAGE

    def test_help(self) -> None:
        """Test --help exits cleanly."""
        assert main(["--help"]) == EXIT_OK

    def test_budget(self) -> None:
        """Test a budget overflow exits with the usage code."""
        assert main(["lowdeg-exact", "--budget", "10"]) == EXIT_USAGE

    def test_invalid_config(self) -> None:
        """Test pydantic validation errors exit with the usage code."""
        assert main(["char-census", "--format", "csv"]) == EXIT_USAGE

    def test_input_for_a_command_without_input(self, tmp_path: Path) -> None:
        """Test --input is refused where it has no meaning."""
        path = tmp_path / "x.txt"
        path.write_text("1\n")

        assert main(["params", "--input", str(path)]) == EXIT_USAGE

    def test_violation_exit_code(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test a failed guaranteed property exits with 1 after printing the report."""
        report = CensusReport(
            functions=1, passing_count=1, degree_le_d_count=0, equal=False, hypothesis_holds=True
        )
        handler = Mock(return_value=(report, ["characterization"]))
        with patch.dict("app.services.experiment_service.HANDLERS", {Command.CHAR_CENSUS: handler}):
            code = main(["char-census"])

        assert code == EXIT_VIOLATION
        assert _json(capsys)["violations"] == ["characterization"]

    def test_binom_csv(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test the binomial sweep as CSV."""
        code = main(["binom-sweep", "--pairs", "2:2,3:2", "--format", "csv"])

        assert code == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "p,s,pairs_checked,nonzero,all_nonzero,lucas_mismatches"
        assert lines[1].startswith("2,2,2,2,True,")
        assert len(lines) == 3

    def test_encode_then_test_through_a_file(
        self, tmp_path: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        """Test an encoded word read back by plcode-test and plcode-decode."""
        word = tmp_path / "word.txt"
        assert main(["plcode-encode", "--seed", "3", "--output", str(word)]) == EXIT_OK
        assert word.read_text().startswith("5 1 2 1\n")

        assert main(["plcode-test", "--input", str(word), "--trials", "2000"]) == EXIT_OK
        assert _json(capsys)["report"]["rejections"] == 0

        assert main(["plcode-decode", "--input", str(word)]) == EXIT_OK
        assert _json(capsys)["report"]["success"] is True

    def test_input_from_stdin(
        self,
        monkeypatch: pytest.MonkeyPatch,
        capsys: pytest.CaptureFixture[str],
        linear_gf5: MultiPoly,
    ) -> None:
        """Test '-' reads the table from stdin."""
        monkeypatch.setattr("sys.stdin", io.StringIO(table_of(linear_gf5).to_text()))

        assert main(["lowdeg-exact", "--input", "-"]) == EXIT_OK
        assert _json(capsys)["report"]["exact_delta"] == "0/1"
