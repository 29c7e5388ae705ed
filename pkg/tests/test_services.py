"""Tests for the experiment service."""

from unittest.mock import Mock, patch

import pytest

from app.config import settings
from app.core.bivariate import random_family
from app.core.field import FieldSpec
from app.core.poly import MultiPoly, table_of
from app.core.sampling import stream
from app.exceptions import BudgetExceededError, InvariantViolationError, PreconditionError
from app.schemas.experiments import CensusReport
from app.schemas.run import Command, RunConfig, RunResponse
from app.services.experiment_service import HANDLERS, ExperimentService, ensure_holds


def _failed_census() -> CensusReport:
    return CensusReport(
        functions=1,
        passing_count=1,
        degree_le_d_count=0,
        equal=False,
        hypothesis_holds=True,
    )


@pytest.mark.unit
class TestExperimentServiceSingleton:
    """Test cases for the singleton behaviour."""

    def test_singleton_behavior(self, fresh_service: ExperimentService) -> None:
        """Test that ExperimentService follows singleton pattern."""
        assert ExperimentService() is fresh_service
        assert ExperimentService.get_instance() is fresh_service

    def test_commands(self, fresh_service: ExperimentService) -> None:
        """Test every command is listed with a description."""
        commands = fresh_service.commands()

        assert [c.name for c in commands] == list(Command)
        assert all(c.description for c in commands)

    def test_every_command_has_a_handler(self) -> None:
        """Test the dispatch table is complete."""
        assert set(HANDLERS) == set(Command)


@pytest.mark.unit
class TestExperimentServiceRun:
    """Test cases for running commands."""

    def test_char_census(self, fresh_service: ExperimentService) -> None:
        """Test the GF(3) census through the service."""
        response = fresh_service.run(RunConfig(command="char-census", p=3, m=2, d=1))

        assert response.report["passing_count"] == 27
        assert response.report["equal"] is True
        assert response.violations == []
        assert response.config.p == 3

    def test_counterexample(self, fresh_service: ExperimentService) -> None:
        """Test the GF(4) counterexample through the service."""
        response = fresh_service.run(RunConfig(command="counterexample", p=2, s=2, d=2))

        assert response.report["total_deg"] == 4
        assert response.violations == []

    def test_params(self, fresh_service: ExperimentService) -> None:
        """Test code parameters serialise with exact rationals."""
        report = fresh_service.run(RunConfig(command="params")).report

        assert report["n"] == 625
        assert report["a"] == 6
        assert report["k_letters"] == "3/2"
        assert report["measured_letter_distance"] == "24/25"
        assert report["distance_exhaustive"] is True

    def test_char_check_needs_input(self, fresh_service: ExperimentService) -> None:
        """Test char-check without a table or a polynomial."""
        with pytest.raises(PreconditionError):
            fresh_service.run(RunConfig(command="char-check"))

    def test_char_check_with_poly(self, fresh_service: ExperimentService) -> None:
        """Test char-check of x1^2 at d = 1."""
        config = RunConfig(command="char-check", d=1, poly=[{"exps": [2, 0], "coeff": 1}])
        report = fresh_service.run(config).report

        assert report["passes_line_test"] is False
        assert report["total_deg"] == 2

    def test_self_correct_single_point(self, fresh_service: ExperimentService) -> None:
        """Test one bad point over GF(17) is corrected."""
        config = RunConfig(
            command="self-correct",
            p=17,
            d=2,
            poly=[{"exps": [2, 0], "coeff": 1}, {"exps": [0, 1], "coeff": 5}],
            corrupt_point=40,
            corrupt_value=0,
        )
        response = fresh_service.run(config)

        assert response.report["corr_equals_g"] is True
        assert response.violations == []

    def test_lowdeg_exact_clean(self, fresh_service: ExperimentService) -> None:
        """Test completeness on a generated clean table."""
        response = fresh_service.run(RunConfig(command="lowdeg-exact", p=7, d=2, seed=3))

        assert response.report["exact_delta"] == "0/1"
        assert response.violations == []

    def test_bivariate_family(self, fresh_service: ExperimentService, gf17: FieldSpec) -> None:
        """Test a supplied family with two bad rows."""
        fam, _ = random_family(gf17, 2, 2, 0, stream(4, 0))
        config = RunConfig(command="bivariate-check", p=17, d=2, family=fam.to_json())
        response = fresh_service.run(config)

        assert response.report["bad_row_fraction"] == "2/17"
        assert response.report["conclusion_ok"] is True
        assert response.violations == []

    def test_plcode_encode(self, fresh_service: ExperimentService) -> None:
        """Test the encoded word comes back as text."""
        config = RunConfig(command="plcode-encode", corrupt="1/5", seed=3)
        report = fresh_service.run(config).report

        assert report["n"] == 625
        assert report["corrupted_letters"] == 125
        assert report["codeword"].startswith("5 1 2 1\n0 1\n")

    def test_plcode_decode_round_trip(self, fresh_service: ExperimentService) -> None:
        """Test a generated clean word decodes to its message."""
        response = fresh_service.run(RunConfig(command="plcode-decode", seed=9))

        assert response.report["success"] is True
        assert response.violations == []

    def test_table_check_config(
        self, fresh_service: ExperimentService, linear_gf5: MultiPoly
    ) -> None:
        """Test an uploaded table becomes a char-check run."""
        config = fresh_service.table_check_config(table_of(linear_gf5).to_text(), 1)

        assert config.command is Command.CHAR_CHECK
        assert (config.p, config.s, config.m, config.d) == (5, 1, 2, 1)
        assert fresh_service.run(config).report["passes_line_test"] is True

    def test_budget_override_is_restored(self, fresh_service: ExperimentService) -> None:
        """Test a per-run budget applies to that run only."""
        before = settings.line_budget

        with pytest.raises(BudgetExceededError):
            fresh_service.run(RunConfig(command="lowdeg-exact", budget=10))

        assert settings.line_budget == before

    def test_worker_override_is_restored(self, fresh_service: ExperimentService) -> None:
        """Test a per-run worker count is used during the run and dropped afterwards."""
        before = settings.max_workers
        seen: list[int] = []

        def handler(_: RunConfig) -> tuple[CensusReport, list[str]]:
            seen.append(settings.max_workers)
            return _failed_census(), []

        with patch.dict(HANDLERS, {Command.CHAR_CENSUS: handler}):
            response = fresh_service.run(RunConfig(command="char-census", workers=2))

        assert seen == [2]
        assert settings.max_workers == before
        assert "workers" not in response.model_dump()["config"]

    def test_violations_are_reported(self, fresh_service: ExperimentService) -> None:
        """Test a failed guaranteed property lands in violations."""
        with patch(
            "app.services.experiment_service.characterization_census",
            Mock(return_value=_failed_census()),
        ):
            response = fresh_service.run(RunConfig(command="char-census", p=3))

        assert response.violations == ["characterization"]
        with pytest.raises(InvariantViolationError) as exc_info:
            ensure_holds(response)
        assert exc_info.value.name == "characterization"

    async def test_run_async(self, fresh_service: ExperimentService) -> None:
        """Test the async entry point returns the same report."""
        config = RunConfig(command="binom-sweep", pairs=[(2, 2), (3, 2)])
        response = await fresh_service.run_async(config)

        assert isinstance(response, RunResponse)
        assert response == fresh_service.run(config)
        assert len(response.report["rows"]) == 2
