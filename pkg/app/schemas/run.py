"""Pydantic schemas for running experiments from the CLI and the /run endpoint."""

from enum import StrEnum
from fractions import Fraction
from typing import Any, Self

from pydantic import BaseModel, Field, model_validator

from app.core.field import FieldSpec
from app.core.lines import Backend
from app.core.sampling import MAX_SEED
from app.schemas.common import Rational
from app.schemas.experiments import CorruptionMode, CorruptionSpec


class Command(StrEnum):
    """Every experiment the toolkit can run."""

    CHAR_CENSUS = "char-census"
    COUNTEREXAMPLE = "counterexample"
    CHAR_CHECK = "char-check"
    BINOM_SWEEP = "binom-sweep"
    LOWDEG_EXACT = "lowdeg-exact"
    LOWDEG_MC = "lowdeg-mc"
    SELF_CORRECT = "self-correct"
    PLANE_DIAG = "plane-diag"
    BIVARIATE_CHECK = "bivariate-check"
    PLCODE_ENCODE = "plcode-encode"
    PLCODE_TEST = "plcode-test"
    PLCODE_DECODE = "plcode-decode"
    PARAMS = "params"


class OutputFormat(StrEnum):
    """Report encodings."""

    JSON = "json"
    CSV = "csv"
    TEXT = "text"


SWEEP_COMMANDS = frozenset({Command.BINOM_SWEEP, Command.BIVARIATE_CHECK})
DEFAULT_BINOM_PAIRS = [(2, 2), (2, 3), (3, 2), (5, 2)]


class RunConfig(BaseModel):
    """A fully specified experiment run."""

    command: Command = Field(..., description="Experiment to run")
    p: int = Field(default=5, ge=2, description="Field characteristic")
    s: int = Field(default=1, ge=1, description="Extension degree")
    modulus: list[int] | None = Field(
        default=None, description="Modulus coefficients low-to-high; built-in when omitted"
    )
    m: int = Field(default=2, ge=1, description="Number of variables")
    d: int = Field(default=1, ge=0, description="Degree bound")
    trials: int = Field(
        default=10_000, ge=1, description="Monte-Carlo trials, planes or generated instances"
    )
    seed: int = Field(default=0, ge=0, le=MAX_SEED, description="64-bit seed")
    corrupt: Rational = Field(
        default=Fraction(0), description="Fraction of points (or letters) corrupted"
    )
    corrupt_mode: CorruptionMode = Field(default=CorruptionMode.RANDOM_POINTS)
    corrupt_point: int | None = Field(default=None, ge=0, description="Point index (single_point)")
    corrupt_value: int | None = Field(default=None, ge=0, description="Value index (single_point)")
    corrupt_points: list[tuple[int, int]] = Field(
        default_factory=list, description="(point, value) pairs (adversarial)"
    )
    backend: Backend = Field(default=Backend.EXACT, description="Line-fit strategy")
    budget: int | None = Field(
        default=None, ge=1, description="Override of the line/letter enumeration budget"
    )
    workers: int | None = Field(
        default=None, ge=1, exclude=True, description="Worker threads for this run only"
    )
    samples: int = Field(
        default=0, ge=0, description="char-census: sample this many polynomials instead"
    )
    pairs: list[tuple[int, int]] = Field(
        default_factory=lambda: list(DEFAULT_BINOM_PAIRS), description="(p, s) pairs to sweep"
    )
    epsilon: Rational | None = Field(
        default=None, description="bivariate-check epsilon; max(d, 1)/q when omitted"
    )
    c1: float | None = Field(default=None, gt=1, description="Code regime d = Theta(m^c1)")
    c2: float | None = Field(default=None, ge=1, description="Code regime q = Theta(d^c2)")
    poly: list[dict[str, Any]] | None = Field(
        default=None, description="Polynomial as [{'exps': [...], 'coeff': index}]"
    )
    table: str | None = Field(default=None, description="FunctionTable in its text format")
    codeword: str | None = Field(default=None, description="Codeword in its text format")
    family: list[list[int]] | None = Field(
        default=None, description="Row then column coefficient lists"
    )
    format: OutputFormat | None = Field(default=None, description="Report encoding")
    output: str | None = Field(default=None, description="Output path; stdout when omitted")

    model_config = {
        "json_schema_extra": {
            "examples": [
                {"command": "char-census", "p": 3, "s": 1, "m": 2, "d": 1},
                {
                    "command": "lowdeg-mc",
                    "p": 17,
                    "m": 2,
                    "d": 2,
                    "corrupt": "1/20",
                    "trials": 100000,
                    "seed": 7,
                },
            ]
        }
    }

    @model_validator(mode="after")
    def _check_format(self) -> Self:
        fmt = self.format
        if fmt is OutputFormat.CSV and self.command not in SWEEP_COMMANDS:
            raise ValueError(f"CSV output is only available for {sorted(SWEEP_COMMANDS)}")
        if fmt is OutputFormat.TEXT and self.command is not Command.PLCODE_ENCODE:
            raise ValueError("Text output is only available for plcode-encode")
        if not 0 <= self.corrupt <= 1:
            raise ValueError(f"corrupt must lie in [0, 1], got {self.corrupt}")
        return self

    @property
    def output_format(self) -> OutputFormat:
        """Explicit format, else text for plcode-encode and JSON otherwise."""
        if self.format is not None:
            return self.format
        return OutputFormat.TEXT if self.command is Command.PLCODE_ENCODE else OutputFormat.JSON

    def field_spec(self) -> FieldSpec:
        """The configured field."""
        return FieldSpec(p=self.p, s=self.s, modulus=self.modulus)

    def corruption(self) -> CorruptionSpec:
        """The configured corruption, seeded with the run seed."""
        mode = self.corrupt_mode
        if self.corrupt_point is not None and mode is CorruptionMode.RANDOM_POINTS:
            mode = CorruptionMode.SINGLE_POINT
        if self.corrupt_points and mode is CorruptionMode.RANDOM_POINTS:
            mode = CorruptionMode.ADVERSARIAL
        return CorruptionSpec(
            mode=mode,
            fraction=self.corrupt,
            point=self.corrupt_point,
            value=self.corrupt_value,
            points=self.corrupt_points,
            seed=self.seed,
        )


class RunResponse(BaseModel):
    """Report of one run with the configuration that produced it."""

    command: Command
    config: RunConfig
    report: dict[str, Any] = Field(..., description="Command-specific report")
    violations: list[str] = Field(
        default_factory=list, description="Guaranteed properties that failed"
    )


class CommandInfo(BaseModel):
    """Name and summary of a command."""

    name: Command
    description: str
