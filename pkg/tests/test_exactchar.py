"""Tests for the exact characterization of total degree."""

from math import comb
from unittest.mock import patch

import numpy as np
import pytest

from app.config import settings
from app.core.exactchar import (
    binom_mod_p,
    binom_report,
    build_counterexample,
    characterization_census,
    characterization_check,
    hypothesis_holds,
    lemma_binom_sweep,
    lucas_mismatches,
    passes_exact_line_test,
    random_characterization_search,
)
from app.core.field import FieldSpec, element_from_index
from app.core.lines import Line, fit_line_poly, restrict
from app.core.poly import (
    FunctionTable,
    MultiPoly,
    interpolate_uni,
    random_poly,
    table_of,
    uni_eval,
)
from app.core.sampling import stream
from app.exceptions import BudgetExceededError, InvalidDegreeError, PreconditionError


@pytest.mark.unit
class TestLineTest:
    """Test cases for the exact line test."""

    def test_linear_passes(self, linear_gf5: MultiPoly) -> None:
        """Test a degree-1 table passes at d = 1."""
        verdict = characterization_check(table_of(linear_gf5), 1)

        assert verdict.passes_line_test is True
        assert verdict.witness is None
        assert verdict.total_deg == 1
        assert verdict.theorem_consistent is True

    def test_witness_is_a_failing_line(self, quadratic_table: FunctionTable) -> None:
        """Test the witness points at a line whose restriction is not degree 1."""
        passes, witness = passes_exact_line_test(quadratic_table, 1)

        assert passes is False
        assert witness is not None
        spec = quadratic_table.spec
        values = restrict(quadratic_table, Line(spec, tuple(witness.x), tuple(witness.h)))
        fit = fit_line_poly(values, 1)
        assert fit.agreement < spec.q

    def test_witness_above_exact_fit_limit(self) -> None:
        """Test a random table over GF(37) gets a witness rather than a budget error."""
        gf37 = FieldSpec.of(37)
        table = FunctionTable(gf37, 1, stream(0, 0).integers(0, 37, size=37))
        verdict = characterization_check(table, 2)

        assert verdict.passes_line_test is False
        witness = verdict.witness
        assert witness is not None
        values = restrict(table, Line(gf37, tuple(witness.x), tuple(witness.h)))
        start = interpolate_uni([element_from_index(gf37, t) for t in range(3)], values[:3])
        assert witness.t > 2
        assert uni_eval(start, element_from_index(gf37, witness.t)) != values[witness.t]
        assert all(
            uni_eval(start, element_from_index(gf37, t)) == values[t] for t in range(witness.t)
        )

    @pytest.mark.parametrize(("p", "s", "d"), [(5, 1, 1), (5, 1, 2), (2, 2, 1), (7, 1, 3)])
    def test_low_degree_tables_pass(self, p: int, s: int, d: int) -> None:
        """Test every table of a total-degree-<=d polynomial passes at d."""
        spec = FieldSpec.of(p, s)
        for seed in range(5):
            g = random_poly(spec, 2, d, stream(seed, 0))

            assert passes_exact_line_test(table_of(g), d) == (True, None)

    def test_zero_function(self, gf5: FieldSpec) -> None:
        """Test the zero table reports no degree."""
        verdict = characterization_check(table_of(MultiPoly(gf5, 2)), 0)

        assert verdict.passes_line_test is True
        assert verdict.total_deg is None

    def test_hypothesis(self) -> None:
        """Test q - q/p - 1 >= d."""
        assert hypothesis_holds(FieldSpec.of(3), 1) is True
        assert hypothesis_holds(FieldSpec.of(2, 2), 1) is True
        assert hypothesis_holds(FieldSpec.of(2, 2), 2) is False
        assert hypothesis_holds(FieldSpec.of(5), 4) is False


@pytest.mark.unit
class TestCensus:
    """Test cases for the exhaustive census."""

    def test_gf3_census(self, gf3: FieldSpec) -> None:
        """Test every function GF(3)^2 -> GF(3) at d = 1."""
        report = characterization_census(gf3, 2, 1)

        assert report.functions == 3**9
        assert report.passing_count == 27
        assert report.degree_le_d_count == 27
        assert report.equal is True
        assert report.hypothesis_holds is True

    def test_gf2_univariate(self, gf2: FieldSpec) -> None:
        """Test all four functions GF(2) -> GF(2) have degree <= 1."""
        report = characterization_census(gf2, 1, 1)

        assert report.functions == 4
        assert report.passing_count == 4
        assert report.equal is True

    def test_census_budget(self, gf3: FieldSpec) -> None:
        """Test the census refuses more functions than its budget."""
        with (
            patch.object(settings, "census_budget", 1000),
            pytest.raises(BudgetExceededError) as exc_info,
        ):
            characterization_census(gf3, 2, 1)

        assert exc_info.value.requested == 3**9

    def test_supplied_candidates(self, gf4: FieldSpec) -> None:
        """Test a census restricted to supplied tables over GF(4)."""
        counterexample = build_counterexample(gf4, 2)
        linear = table_of(MultiPoly.from_terms(gf4, 2, {(1, 0): 1, (0, 1): 2}))
        candidates = np.stack([counterexample.values, linear.values])
        report = characterization_census(gf4, 2, 2, candidates)

        assert report.functions == 2
        assert report.passing_count == 2
        assert report.degree_le_d_count == 1
        assert report.equal is False
        assert report.hypothesis_holds is False

    @pytest.mark.slow
    def test_random_search_finds_nothing_under_hypothesis(self, gf5: FieldSpec) -> None:
        """Test sampled high-degree tables over GF(5) all fail the d = 2 line test."""
        report = random_characterization_search(gf5, 2, 2, 30, 1)

        assert report.hypothesis_holds is True
        assert report.passing_high_degree == 0


@pytest.mark.unit
class TestCounterexample:
    """Test cases for the tightness counterexample."""

    def test_gf4(self, gf4: FieldSpec) -> None:
        """Test (x1 x2)^2 over GF(4) passes at d = 2 with total degree 4."""
        verdict = characterization_check(build_counterexample(gf4, 2), 2)

        assert verdict.passes_line_test is True
        assert verdict.total_deg == 4
        assert verdict.hypothesis_holds is False
        assert verdict.theorem_consistent is True

    def test_gf5(self, gf5: FieldSpec) -> None:
        """Test x1^4 x2 over GF(5) passes at d = 4 with total degree 5."""
        verdict = characterization_check(build_counterexample(gf5, 4), 4)

        assert verdict.passes_line_test is True
        assert verdict.total_deg == 5

    def test_needs_d_above_the_bound(self, gf4: FieldSpec) -> None:
        """Test d must exceed q - q/p - 1."""
        with pytest.raises(PreconditionError):
            build_counterexample(gf4, 1)
        with pytest.raises(InvalidDegreeError):
            build_counterexample(gf4, 4)


@pytest.mark.unit
class TestBinomials:
    """Test cases for Lucas and the divisibility sweep."""

    @pytest.mark.parametrize(("n", "r", "p"), [(10, 3, 3), (5, 2, 2), (12, 5, 7), (0, 0, 2)])
    def test_lucas_matches_comb(self, n: int, r: int, p: int) -> None:
        """Test Lucas against the big-integer binomial."""
        assert binom_mod_p(n, r, p) == comb(n, r) % p

    def test_lucas_domain(self) -> None:
        """Test r must lie in [0, n] and p must be prime."""
        with pytest.raises(PreconditionError):
            binom_mod_p(3, 4, 2)
        with pytest.raises(PreconditionError):
            binom_mod_p(3, 1, 4)

    def test_sweep(self) -> None:
        """Test C(n, k p^(s-1)) is never divisible by p."""
        row = lemma_binom_sweep(2, 2)

        assert row.pairs_checked == 2
        assert row.nonzero == 2
        assert row.all_nonzero is True

    def test_report(self) -> None:
        """Test the default sweep and the Lucas cross-check."""
        report = binom_report([(2, 3), (3, 2), (5, 2)], limit=40)

        assert all(row.all_nonzero for row in report.rows)
        assert report.lucas_mismatches == 0
        assert lucas_mismatches(60) == 0

    def test_sweep_budget(self) -> None:
        """Test sweeps above the budget are refused."""
        with (
            patch.object(settings, "binom_budget", 100),
            pytest.raises(BudgetExceededError),
        ):
            lemma_binom_sweep(5, 3)
