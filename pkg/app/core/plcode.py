"""The polynomial-line code: encoder, two-query local tester, noise channel and decoder.

A message is an m-variate polynomial of total degree <= d. Its codeword has one letter
per line (x, h) of F^m, h = 0 included, in canonical line order; the letter is the d+1
coefficients of the restriction t -> f(x + t h). There are q^(2m) letters.

The local test picks a point y and two lines through it, l_i = l_{y - t_i h_i, h_i},
and accepts when both letters give the same value at y.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.config import settings
from app.core.field import FieldElement, FieldSpec, IndexArray, get_field
from app.core.lines import (
    LINE_CHUNK,
    Line,
    check_degree,
    check_line_budget,
    line_coords,
    line_count,
    lines_at,
    restrict_lines,
)
from app.core.poly import (
    FunctionTable,
    MultiPoly,
    UniPoly,
    horner,
    interpolate_table,
    interpolation_matrix,
    monomials,
    point_index,
    table_of,
    total_degree,
    uni_eval,
)
from app.core.sampling import parallel_map, run_trials, stddev_bound, stream
from app.exceptions import (
    ArityMismatchError,
    DecodeFailureError,
    FieldMismatchError,
    PreconditionError,
)
from app.schemas.common import degree_or_none
from app.schemas.experiments import CodeParams, DecodeReport, TestReport

logger = logging.getLogger(__name__)

LetterOracle = Callable[[Line], UniPoly]

ONE_HALF = Fraction(1, 2)
DISTANCE_PAIRS = 100
DISTANCE_CELLS = 1 << 22


class PLCodeSpec(BaseModel):
    """Parameters of one polynomial-line code."""

    model_config = ConfigDict(frozen=True)

    spec: FieldSpec
    m: int = Field(..., ge=1, description="Number of variables")
    d: int = Field(..., ge=0, description="Total degree bound of messages")
    c1: float | None = Field(default=None, gt=1, description="Regime d = Theta(m^c1)")
    c2: float | None = Field(default=None, ge=1, description="Regime q = Theta(d^c2)")

    @model_validator(mode="after")
    def _check_degree(self) -> Self:
        if self.d >= self.spec.q:
            raise ValueError(f"d={self.d} must be below q={self.spec.q}")
        return self

    @property
    def k_elems(self) -> int:
        """Message length in field elements, C(m+d, d)."""
        return math.comb(self.m + self.d, self.d)

    @property
    def k_letters(self) -> Fraction:
        """Message length in letters."""
        return Fraction(self.k_elems, self.d + 1)

    @property
    def n(self) -> int:
        """Number of letters."""
        return line_count(self.spec, self.m)

    @property
    def alphabet_bits(self) -> int:
        """(d+1) * ceil(log2 q)."""
        return (self.d + 1) * (self.spec.q - 1).bit_length()

    def params(self) -> dict[str, Any]:
        """Parameter echo for reports."""
        return {
            "p": self.spec.p,
            "s": self.spec.s,
            "modulus": list(self.spec.modulus),
            "m": self.m,
            "d": self.d,
            "c1": self.c1,
            "c2": self.c2,
        }


@dataclass(frozen=True, eq=False)
class Codeword:
    """A word over the alphabet F^(d+1), one letter per line in canonical order."""

    code: PLCodeSpec
    letters: IndexArray

    def __post_init__(self) -> None:
        letters = np.array(self.letters, dtype=np.int64)
        shape = (self.code.n, self.code.d + 1)
        if letters.shape != shape:
            raise PreconditionError(f"A word needs letter array shape {shape}, got {letters.shape}")
        if letters.size and (letters.min() < 0 or letters.max() >= self.code.spec.q):
            raise PreconditionError(f"Letter coefficients outside {self.code.spec}")
        letters.setflags(write=False)
        object.__setattr__(self, "letters", letters)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Codeword):
            return NotImplemented
        return self.code == other.code and bool(np.array_equal(self.letters, other.letters))

    __hash__ = None  # type: ignore[assignment]

    def letter(self, line: Line) -> UniPoly:
        """The letter of ``line`` as a polynomial."""
        if line.spec != self.code.spec:
            raise FieldMismatchError(self.code.spec, line.spec)
        if line.m != self.code.m:
            raise ArityMismatchError(self.code.m, line.m)
        return UniPoly(line.spec, tuple(int(c) for c in self.letters[line.index]))

    def to_text(self) -> str:
        """Text format: ``p s m d``, the modulus, then one letter of d+1 indices per line."""
        spec = self.code.spec
        header = [
            f"{spec.p} {spec.s} {self.code.m} {self.code.d}",
            " ".join(str(c) for c in spec.modulus),
        ]
        body = [" ".join(str(int(c)) for c in letter) for letter in self.letters]
        return "\n".join(header + body) + "\n"

    @classmethod
    def from_text(cls, text: str) -> Codeword:
        """Parse the text format written by :meth:`to_text`."""
        lines = [line.strip() for line in text.strip().splitlines() if line.strip()]
        if len(lines) < 2:  # noqa: PLR2004
            raise PreconditionError("Codeword text needs a header and a modulus line")
        try:
            p, s, m, d = (int(v) for v in lines[0].split())
            modulus = tuple(int(v) for v in lines[1].split())
            rows = [[int(v) for v in line.split()] for line in lines[2:]]
        except ValueError as e:
            raise PreconditionError(f"Malformed codeword text: {e}") from e
        if any(len(row) != d + 1 for row in rows):
            raise PreconditionError(f"Every letter needs {d + 1} coefficients")
        code = PLCodeSpec(spec=FieldSpec(p=p, s=s, modulus=modulus), m=m, d=d)
        return cls(code, np.array(rows, dtype=np.int64).reshape(-1, d + 1))


@dataclass(frozen=True)
class LocalTestSample:
    """A point y and two lines through it, y = x_i + t_i h_i."""

    spec: FieldSpec
    y: tuple[int, ...]
    h1: tuple[int, ...]
    t1: int
    h2: tuple[int, ...]
    t2: int

    def _line(self, h: tuple[int, ...], t: int) -> Line:
        field = get_field(self.spec)
        x = field.sub(np.array(self.y), field.mul(np.int64(t), np.array(h)))
        return Line(self.spec, tuple(int(c) for c in x), h)

    @property
    def line1(self) -> Line:
        """First queried line."""
        return self._line(self.h1, self.t1)

    @property
    def line2(self) -> Line:
        """Second queried line."""
        return self._line(self.h2, self.t2)


def _check_message(message: MultiPoly, code: PLCodeSpec) -> None:
    if message.spec != code.spec:
        raise FieldMismatchError(code.spec, message.spec)
    if message.m != code.m:
        raise ArityMismatchError(code.m, message.m)
    degree = total_degree(message)
    if degree > code.d:
        raise PreconditionError(f"Message has total degree {degree} > d = {code.d}")


def encode(message: MultiPoly, code: PLCodeSpec) -> Codeword:
    """Letters = coefficients of the restriction of the message to every line."""
    _check_message(message, code)
    check_line_budget(code.n, "letters")
    table = table_of(message)
    field = get_field(code.spec)
    to_coeffs = interpolation_matrix(code.spec, tuple(range(code.d + 1))).T

    def encode_chunk(start: int) -> IndexArray:
        xs, hs = lines_at(code.spec, code.m, np.arange(start, min(start + LINE_CHUNK, code.n)))
        rows = restrict_lines(table, xs, hs)
        return field.dot(rows[:, : code.d + 1], to_coeffs)

    letters = np.concatenate(parallel_map(encode_chunk, range(0, code.n, LINE_CHUNK)))
    logger.debug(f"Encoded a message into {code.n} letters over {code.spec}")
    return Codeword(code, letters)


def codeword_oracle(word: Codeword) -> LetterOracle:
    """Letter oracle reading from a stored word."""
    return word.letter


def sample_local_test(code: PLCodeSpec, rng: np.random.Generator) -> LocalTestSample:
    """Draw y, h1, h2 uniformly from F^m and t1, t2 uniformly from F."""
    q, m = code.spec.q, code.m
    y, h1, h2 = (tuple(int(c) for c in rng.integers(0, q, size=m)) for _ in range(3))
    t1, t2 = (int(t) for t in rng.integers(0, q, size=2))
    return LocalTestSample(code.spec, y, h1, t1, h2, t2)


def local_test_once(word: LetterOracle, code: PLCodeSpec, rng: np.random.Generator) -> bool:
    """Two letter queries; True means accept."""
    sample = sample_local_test(code, rng)
    first = word(sample.line1)
    second = word(sample.line2)
    t1 = FieldElement(code.spec, sample.t1)
    t2 = FieldElement(code.spec, sample.t2)
    return uni_eval(first, t1) == uni_eval(second, t2)


def local_test(
    word: Codeword, trials: int, seed: int, *, exact: Fraction | None = None
) -> TestReport:
    """Monte-Carlo rejection rate of the local test on a stored word."""
    code = word.code
    q, m = code.spec.q, code.m
    field = get_field(code.spec)
    q_m = q**m

    def query(rng_draws: tuple[IndexArray, IndexArray, IndexArray]) -> IndexArray:
        y, h, t = rng_draws
        x = field.sub(y, field.mul(t[:, None], h))
        index = point_index(code.spec, x) + q_m * point_index(code.spec, h)
        return horner(field, word.letters[index], t)

    def block(rng: np.random.Generator, size: int) -> int:
        y = rng.integers(0, q, size=(size, m))
        h1, h2 = rng.integers(0, q, size=(size, m)), rng.integers(0, q, size=(size, m))
        t1, t2 = rng.integers(0, q, size=size), rng.integers(0, q, size=size)
        return int(np.count_nonzero(query((y, h1, t1)) != query((y, h2, t2))))

    logger.info(f"Local test over {code.spec}, m={m}, d={code.d} with {trials} trials")
    rejections = run_trials(trials, seed, block)
    estimate = rejections / trials
    sigma = stddev_bound(rejections, trials)
    within = None
    if exact is not None:
        within = abs(float(exact) - estimate) <= 3 * max(sigma, 1 / trials)
    return TestReport(
        trials=trials,
        rejections=rejections,
        estimate=estimate,
        exact=exact,
        stddev_bound=sigma,
        within_3sigma=within,
        seed=seed,
        h_zero_mass=Fraction(1, q_m),
        params=code.params(),
    )


def point_votes(word: Codeword) -> IndexArray:
    """counts[y, v] = #{(h, t) : letter of l_{y - t h, h} evaluated at t equals v}."""
    code = word.code
    q = code.spec.q
    check_line_budget(code.n * q, "line parameters")
    field = get_field(code.spec)
    points = q**code.m

    def count_chunk(start: int) -> IndexArray:
        indices = np.arange(start, min(start + LINE_CHUNK, code.n))
        xs, hs = lines_at(code.spec, code.m, indices)
        ys = point_index(code.spec, line_coords(code.spec, xs, hs))
        values = horner(field, word.letters[indices][:, None, :], field.elements()[None, :])
        return np.bincount((ys * q + values).ravel(), minlength=points * q)

    counts = sum(parallel_map(count_chunk, range(0, code.n, LINE_CHUNK)))
    return np.asarray(counts, dtype=np.int64).reshape(points, q)


def exact_local_rejection(word: Codeword) -> Fraction:
    """Exact rejection probability of the local test, enumerating every (y, h1, t1, h2, t2)."""
    counts = point_votes(word)
    per_point = word.code.n // counts.shape[0] * word.code.spec.q
    collisions = int(np.sum(counts * counts))
    return 1 - Fraction(collisions, counts.shape[0] * per_point**2)


def letter_distance(a: Codeword, b: Codeword) -> Fraction:
    """Fraction of letters where two words differ."""
    if a.code != b.code:
        raise PreconditionError("Words belong to different codes")
    differ = np.any(a.letters != b.letters, axis=1)
    return Fraction(int(np.count_nonzero(differ)), a.code.n)


def decode(word: Codeword) -> MultiPoly:
    """Plurality point values, interpolation, then a degree check and a distance check.

    Raises:
        DecodeFailureError: If the interpolant has total degree > d or its encoding
            agrees with the word on at most half of the letters.

    """
    code = word.code
    values = np.argmax(point_votes(word), axis=1)
    candidate = interpolate_table(FunctionTable(code.spec, code.m, values))
    degree = total_degree(candidate)
    if degree > code.d:
        raise DecodeFailureError(f"Reconstructed table has total degree {degree} > d = {code.d}")
    agreement = 1 - letter_distance(encode(candidate, code), word)
    if agreement <= ONE_HALF:
        raise DecodeFailureError(f"Re-encoded message agrees on only {agreement} of the letters")
    return candidate


def decode_report(word: Codeword) -> DecodeReport:
    """:func:`decode` with failures reported instead of raised."""
    code = word.code
    try:
        message = decode(word)
    except DecodeFailureError as e:
        logger.info(f"Decoding failed: {e}")
        return DecodeReport(success=False, error=str(e), params=code.params())
    return DecodeReport(
        success=True,
        message=message.to_json(),
        total_deg=degree_or_none(total_degree(message)),
        letter_agreement=1 - letter_distance(encode(message, code), word),
        params=code.params(),
    )


def rounded_count(fraction: Fraction, n: int) -> int:
    """round(fraction * n) with halves rounded up."""
    return math.floor(Fraction(fraction) * n + ONE_HALF)


def corrupt_codeword(word: Codeword, fraction: Fraction, seed: int) -> Codeword:
    """Replace exactly round(fraction * n) distinct letters by different random letters."""
    fraction = Fraction(fraction)
    if not 0 <= fraction <= 1:
        raise PreconditionError(f"fraction must lie in [0, 1], got {fraction}")
    code = word.code
    count = rounded_count(fraction, code.n)
    rng = stream(seed, 0)
    chosen = np.sort(rng.choice(code.n, size=count, replace=False))
    letters = word.letters.copy()
    fresh = rng.integers(0, code.spec.q, size=(count, code.d + 1))
    same = np.all(fresh == letters[chosen], axis=1)
    while np.any(same):
        fresh[same] = rng.integers(0, code.spec.q, size=(int(np.count_nonzero(same)), code.d + 1))
        same = np.all(fresh == letters[chosen], axis=1)
    letters[chosen] = fresh
    return Codeword(code, letters)


def _message_basis(code: PLCodeSpec) -> IndexArray:
    """Flattened codewords of the monomials, one row per monomial in :func:`monomials` order."""
    spec, m = code.spec, code.m
    words = [
        encode(MultiPoly.from_terms(spec, m, {exps: 1}), code).letters.reshape(-1)
        for exps in monomials(m, code.d)
    ]
    return np.stack(words)


def _difference_vectors(code: PLCodeSpec, seed: int) -> tuple[IndexArray, bool]:
    """Coefficient vectors of nonzero message differences, and whether they are all of them."""
    q, k = code.spec.q, code.k_elems
    if q**k * code.n <= settings.line_budget:
        weights = q ** np.arange(k, dtype=np.int64)
        return (np.arange(1, q**k, dtype=np.int64)[:, None] // weights) % q, True
    field = get_field(code.spec)
    rng = stream(seed, 0)
    first = rng.integers(0, q, size=(DISTANCE_PAIRS, k))
    second = rng.integers(0, q, size=(DISTANCE_PAIRS, k))
    same = np.all(first == second, axis=1)
    while np.any(same):
        second[same] = rng.integers(0, q, size=(int(np.count_nonzero(same)), k))
        same = np.all(first == second, axis=1)
    return field.sub(first, second), False


def min_letter_distance(code: PLCodeSpec, seed: int = 0) -> tuple[Fraction, bool]:
    """Least letter distance between encodings of distinct messages.

    Encoding is linear, so this is the least weight of the encoding of a nonzero message.
    Every message is enumerated when q^k * n fits the line budget; otherwise
    ``DISTANCE_PAIRS`` seeded random pairs are compared. The flag tells which.
    """
    check_degree(code.d, code.spec.q)
    basis = _message_basis(code)
    vectors, exhaustive = _difference_vectors(code, seed)
    field = get_field(code.spec)
    rows = max(1, DISTANCE_CELLS // basis.shape[1])
    least = code.n
    for start in range(0, len(vectors), rows):
        words = field.dot(vectors[start : start + rows], basis)
        nonzero = np.any(words.reshape(len(words), code.n, code.d + 1) != 0, axis=2)
        least = min(least, int(nonzero.sum(axis=1).min()))
    logger.debug(f"Least letter distance over {len(vectors)} differences: {least}/{code.n}")
    return Fraction(least, code.n), exhaustive


def code_params(code: PLCodeSpec, *, measure: bool = True, seed: int = 0) -> CodeParams:
    """Exact code parameters, with the measured letter distance when the letters fit the budget."""
    check_degree(code.d, code.spec.q)
    measured, exhaustive = None, None
    if measure and code.n <= settings.line_budget:
        measured, exhaustive = min_letter_distance(code, seed)
    return CodeParams(
        k_elems=code.k_elems,
        k_letters=code.k_letters,
        n=code.n,
        a=code.alphabet_bits,
        relative_distance_bound=max(Fraction(0), 1 - Fraction(2 * code.d, code.spec.q)),
        measured_letter_distance=measured,
        distance_exhaustive=exhaustive,
        params=code.params(),
    )
