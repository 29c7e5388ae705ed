"""Pydantic schemas for experiment inputs and reports.

Exact quantities are :data:`Rational` and serialise as ``"num/den"``. Reports carry
no timestamps, so the same inputs always serialise to the same bytes.
"""

from enum import StrEnum
from fractions import Fraction
from typing import Any, Self

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.sampling import MAX_SEED
from app.schemas.common import Rational


class CorruptionMode(StrEnum):
    """How a clean table is damaged."""

    RANDOM_POINTS = "random_points"
    SINGLE_POINT = "single_point"
    ADVERSARIAL = "adversarial"


class CorruptionSpec(BaseModel):
    """Recipe for turning the table of a polynomial into a test input."""

    model_config = ConfigDict(frozen=True)

    mode: CorruptionMode = Field(
        default=CorruptionMode.RANDOM_POINTS, description="Corruption mode"
    )
    fraction: Rational = Field(
        default=Fraction(0), description="Fraction of points replaced (random_points)"
    )
    point: int | None = Field(default=None, ge=0, description="Point index (single_point)")
    value: int | None = Field(default=None, ge=0, description="New value index (single_point)")
    points: list[tuple[int, int]] = Field(
        default_factory=list, description="(point index, value index) pairs (adversarial)"
    )
    seed: int = Field(default=0, ge=0, le=MAX_SEED, description="Seed for random_points")

    @model_validator(mode="after")
    def _check_mode(self) -> Self:
        if not 0 <= self.fraction <= 1:
            raise ValueError(f"fraction must lie in [0, 1], got {self.fraction}")
        if self.mode is CorruptionMode.SINGLE_POINT and (self.point is None or self.value is None):
            raise ValueError("single_point corruption needs both point and value")
        if any(i < 0 or v < 0 for i, v in self.points):
            raise ValueError("adversarial point and value indices must be non-negative")
        return self


class TestReport(BaseModel):
    """Outcome of a Monte-Carlo rejection measurement."""

    __test__ = False

    trials: int = Field(..., ge=1, description="Number of sampled trials")
    rejections: int = Field(..., ge=0, description="Number of rejecting trials")
    estimate: float = Field(..., description="rejections / trials")
    exact: Rational | None = Field(default=None, description="Exact value when enumerable")
    stddev_bound: float = Field(..., description="Binomial one-sigma half width")
    within_3sigma: bool | None = Field(
        default=None, description="Whether the exact value lies within 3 stddev of the estimate"
    )
    seed: int = Field(..., description="Seed of the counter-based generator")
    h_zero_mass: Rational = Field(..., description="Probability of sampling a degenerate line")
    params: dict[str, Any] = Field(default_factory=dict, description="Echo of the parameters")

    @model_validator(mode="after")
    def _check_counts(self) -> Self:
        if self.rejections > self.trials:
            raise ValueError("rejections cannot exceed trials")
        return self


class ContractionReport(BaseModel):
    """Self-correction of a corrupted polynomial table."""

    params: dict[str, Any] = Field(default_factory=dict)
    delta_f_before: Rational = Field(..., description="delta_f of the corrupted table f")
    delta_f_after: Rational = Field(..., description="delta_f of Corr_f")
    exact_delta: Rational = Field(..., description="Line-point rejection probability of f")
    dist_f_g: Rational = Field(..., description="d(f, g) for the uncorrupted polynomial g")
    dist_f_corr: Rational = Field(..., description="d(f, Corr_f)")
    dist_corr_g: Rational = Field(..., description="d(Corr_f, g)")
    corr_equals_g: bool
    plurality_disagreement: Rational = Field(
        ..., description="Pr over x, h1, h2 that the two line values at x differ"
    )
    corr_vote_disagreement: Rational = Field(
        ..., description="Pr over x, h that Corr_f(x) differs from the line value at x"
    )
    epsilon: Rational = Field(..., description="1/8 - delta_f")
    alpha: float | None = Field(default=None, description="4 / (epsilon^2 q), when epsilon > 0")
    field_hypothesis_holds: bool = Field(..., description="epsilon > 0 and q > 16 / epsilon^2")
    contraction: bool | None = Field(default=None, description="delta_f_after < delta_f_before")
    two_delta_f_bound: bool = Field(..., description="d(f, Corr_f) <= 2 delta_f")
    delta_ge_delta_f: bool = Field(..., description="exact_delta >= delta_f")
    game_inequality: bool = Field(
        ..., description="corr_vote_disagreement <= plurality_disagreement"
    )
    quarter_distance: bool | None = Field(
        default=None, description="Corr_f == g, evaluated when d(f, g) < 1/4 - 1/q"
    )
    theorem_bound: bool | None = Field(
        default=None, description="d(f, g) <= 2 exact_delta, evaluated when exact_delta <= 1/8"
    )
    bounds_ok: bool = Field(..., description="Every evaluated flag holds")
    violations: list[str] = Field(
        default_factory=list, description="Guaranteed properties that failed on this instance"
    )
    h_zero_mass: Rational


class PlaneReport(BaseModel):
    """Aggregate of random affine planes {x + i h1 + j h2 + i j h3}."""

    params: dict[str, Any] = Field(default_factory=dict)
    planes: int = Field(..., ge=1)
    seed: int
    delta_f: Rational | None = Field(default=None, description="Exact delta_f when enumerable")
    epsilon: Rational | None = None
    alpha: float | None = None
    event_bound: float | None = Field(
        default=None, description="alpha * delta_f * (1 - delta_f) bounding each event"
    )
    mean_row_delta: float
    mean_col_delta: float
    mean_rowcol_disagreement: float = Field(..., description="Mean Pr_ij[r_i(j) != c_j(i)]")
    row_mean_event: float = Field(..., description="Frequency of mean row delta >= 1/8 - eps/2")
    col_mean_event: float = Field(..., description="Frequency of mean col delta >= 1/8 - eps/2")
    row_zero_event: float = Field(
        ..., description="Frequency of #{i : r_i(0) != m(i,0)} >= (1/8 - eps/2) q"
    )
    col_zero_event: float = Field(
        ..., description="Frequency of #{j : c_j(0) != m(0,j)} >= (1/8 - eps/2) q"
    )
    origin_disagreement: float = Field(
        ..., description="Frequency of c_0(0) != r_0(0), the two line values at x"
    )


class Witness(BaseModel):
    """A line and parameter where the line restriction is not a degree-d function."""

    x: list[int]
    h: list[int]
    t: int


class CharVerdict(BaseModel):
    """Exact characterization check of one table."""

    passes_line_test: bool
    witness: Witness | None = None
    total_deg: int | None = Field(..., description="Total degree; None for the zero function")
    hypothesis_holds: bool = Field(..., description="q - q/p - 1 >= d")
    theorem_consistent: bool
    params: dict[str, Any] = Field(default_factory=dict)


class CensusReport(BaseModel):
    """Counts over every function F^m -> F."""

    functions: int
    passing_count: int
    degree_le_d_count: int
    equal: bool
    hypothesis_holds: bool
    params: dict[str, Any] = Field(default_factory=dict)


class SearchReport(BaseModel):
    """Randomized search for high-degree tables that pass the line test."""

    samples: int
    passing_high_degree: int = Field(..., description="Tables of degree > d passing the test")
    hypothesis_holds: bool
    seed: int
    params: dict[str, Any] = Field(default_factory=dict)


class BinomSweepRow(BaseModel):
    """One (p, s) sweep."""

    p: int
    s: int
    pairs_checked: int
    nonzero: int
    all_nonzero: bool


class BinomSweepReport(BaseModel):
    """Binomial divisibility sweeps and the Lucas cross-check."""

    rows: list[BinomSweepRow]
    lucas_checked_up_to: int
    lucas_mismatches: int


class StrengthenReport(BaseModel):
    """Bad-row and bad-column measurement for one row/column family."""

    q: int
    d: int
    disagreement: Rational
    epsilon: Rational
    hypothesis_holds: bool = Field(..., description="disagreement <= 1/4 - epsilon")
    bad_row_fraction: Rational | None = Field(default=None, description="None when no candidate")
    bad_col_fraction: Rational | None = None
    chain_lower_bound: Rational | None = Field(
        default=None, description="x(1 - y - d/q) + y(1 - x - d/q)"
    )
    chain_ok: bool | None = Field(default=None, description="chain_lower_bound <= disagreement")
    conclusion_ok: bool | None = Field(
        default=None, description="Both bad fractions <= 1/4, evaluated under the hypothesis"
    )


class BivariateSweepReport(BaseModel):
    """Many generated row/column families."""

    instances: int
    hypothesis_met: int
    conclusion_failures: int
    chain_failures: int
    max_bad_row_fraction: Rational
    max_bad_col_fraction: Rational
    seed: int
    params: dict[str, Any] = Field(default_factory=dict)


class CodeParams(BaseModel):
    """Parameters of a polynomial-line code."""

    k_elems: int = Field(..., description="Message length in field elements, C(m+d, d)")
    k_letters: Rational = Field(..., description="Message length in letters, C(m+d, d)/(d+1)")
    n: int = Field(..., description="Number of letters, q^(2m)")
    a: int = Field(..., description="Bits per letter, (d+1) * ceil(log2 q)")
    relative_distance_bound: Rational = Field(..., description="max(0, 1 - 2d/q)")
    measured_letter_distance: Rational | None = Field(
        default=None, description="Least letter distance between encodings of distinct messages"
    )
    distance_exhaustive: bool | None = Field(
        default=None, description="Whether every message was enumerated rather than sampled pairs"
    )
    params: dict[str, Any] = Field(default_factory=dict)


class DecodeReport(BaseModel):
    """Result of decoding a word."""

    success: bool
    message: list[dict[str, Any]] | None = Field(
        default=None, description="Decoded polynomial as [{'exps': [...], 'coeff': index}]"
    )
    total_deg: int | None = None
    letter_agreement: Rational | None = Field(
        default=None, description="Fraction of letters equal to the re-encoded message"
    )
    error: str | None = None
    params: dict[str, Any] = Field(default_factory=dict)


class DeltaReport(BaseModel):
    """Exact rejection quantities of one table."""

    params: dict[str, Any] = Field(default_factory=dict)
    exact_delta: Rational
    delta_f: Rational
    dist_f_corr: Rational = Field(..., description="d(f, Corr_f)")
    dist_f_g: Rational | None = Field(
        default=None, description="d(f, g) when the uncorrupted polynomial is known"
    )
    two_delta_f_bound: bool = Field(..., description="d(f, Corr_f) <= 2 delta_f")
    delta_ge_delta_f: bool = Field(..., description="exact_delta >= delta_f")
    theorem_bound: bool | None = Field(
        default=None, description="d(f, g) <= 2 exact_delta, evaluated when exact_delta <= 1/8"
    )
    violations: list[str] = Field(default_factory=list)
    h_zero_mass: Rational


class CodewordReport(BaseModel):
    """An encoded (and possibly corrupted) word in the codeword text format."""

    params: dict[str, Any] = Field(default_factory=dict)
    n: int
    corrupted_letters: int = Field(default=0, description="Letters replaced by the noise channel")
    codeword: str = Field(..., description="Header, modulus and one letter per line")
