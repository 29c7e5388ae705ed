"""Row/column polynomial families and their bivariate fits.

A family is q row polynomials r_i and q column polynomials c_j, all of degree <= d.
When r_i(j) = c_j(i) on most cells, some Q(X, Y) of degree <= d in each variable
explains most rows and most columns. The fit searches for that Q by interpolating
(d+1)-subsets of rows, most consistent rows first.
"""

from __future__ import annotations

import logging
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, islice

import numpy as np

from app.config import settings
from app.core.field import FieldSpec, IndexArray, get_field
from app.core.lines import check_degree, evaluation_matrix
from app.core.poly import UniPoly, interpolation_matrix
from app.core.sampling import parallel_map, stream
from app.exceptions import FieldMismatchError, NoCandidateError, PreconditionError
from app.schemas.experiments import BivariateSweepReport, StrengthenReport

logger = logging.getLogger(__name__)

SUBSET_WINDOW = 64
ONE_HALF = Fraction(1, 2)
ONE_QUARTER = Fraction(1, 4)


def _coefficient_block(spec: FieldSpec, d: int, data: Sequence[Sequence[int]]) -> IndexArray:
    block = np.zeros((len(data), d + 1), dtype=np.int64)
    for i, raw in enumerate(data):
        coeffs = [int(c) for c in raw]
        if any(not 0 <= c < spec.q for c in coeffs):
            raise PreconditionError(f"Coefficient out of range for {spec}: {coeffs}")
        while coeffs and coeffs[-1] == 0:
            coeffs.pop()
        if len(coeffs) > d + 1:
            raise PreconditionError(f"Polynomial {i} has degree {len(coeffs) - 1} > {d}")
        block[i, : len(coeffs)] = coeffs
    block.setflags(write=False)
    return block


@dataclass(frozen=True, eq=False)
class RowColFamily:
    """q row polynomials and q column polynomials as padded coefficient rows."""

    spec: FieldSpec
    d: int
    rows: IndexArray
    cols: IndexArray

    def __post_init__(self) -> None:
        check_degree(self.d, self.spec.q)
        shape = (self.spec.q, self.d + 1)
        for name in ("rows", "cols"):
            block = _coefficient_block(self.spec, self.d, getattr(self, name))
            if block.shape != shape:
                raise PreconditionError(f"{name} must have shape {shape}, got {block.shape}")
            object.__setattr__(self, name, block)

    @classmethod
    def from_polys(
        cls, rows: Sequence[UniPoly], cols: Sequence[UniPoly], d: int
    ) -> RowColFamily:
        """Build a family from univariate polynomials over one field."""
        if not rows:
            raise PreconditionError("A family needs at least one row")
        spec = rows[0].spec
        for p in (*rows, *cols):
            if p.spec != spec:
                raise FieldMismatchError(spec, p.spec)
        return cls(spec, d, [list(p.coeffs) for p in rows], [list(p.coeffs) for p in cols])

    def row_values(self) -> IndexArray:
        """R[i, j] = r_i(j)."""
        return get_field(self.spec).dot(self.rows, evaluation_matrix(self.spec, self.d).T)

    def col_values(self) -> IndexArray:
        """C[j, i] = c_j(i)."""
        return get_field(self.spec).dot(self.cols, evaluation_matrix(self.spec, self.d).T)

    def mismatch(self) -> IndexArray:
        """Boolean (q, q) grid of cells where r_i(j) != c_j(i), indexed [i, j]."""
        return self.row_values() != self.col_values().T

    def to_json(self) -> list[list[int]]:
        """Coefficient lists of the rows followed by those of the columns."""
        return [[int(c) for c in row] for row in (*self.rows, *self.cols)]

    @classmethod
    def from_json(cls, spec: FieldSpec, d: int, data: Sequence[Sequence[int]]) -> RowColFamily:
        """Inverse of :meth:`to_json`."""
        if len(data) != 2 * spec.q:
            raise PreconditionError(f"Expected {2 * spec.q} coefficient lists, got {len(data)}")
        return cls(spec, d, data[: spec.q], data[spec.q :])


@dataclass(frozen=True, eq=False)
class BivariatePoly:
    """Q(X, Y) with coefficient of X^a Y^b at ``coeffs[a, b]``."""

    spec: FieldSpec
    coeffs: IndexArray

    def __post_init__(self) -> None:
        coeffs = np.array(self.coeffs, dtype=np.int64)
        if coeffs.ndim != 2 or coeffs.shape[0] != coeffs.shape[1]:  # noqa: PLR2004
            raise PreconditionError(f"Coefficients must be square, got shape {coeffs.shape}")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BivariatePoly):
            return NotImplemented
        return self.spec == other.spec and np.array_equal(self.coeffs, other.coeffs)

    __hash__ = None  # type: ignore[assignment]

    @property
    def d(self) -> int:
        """Degree bound in each variable."""
        return self.coeffs.shape[0] - 1

    def row_sections(self) -> IndexArray:
        """Coefficients in Y of Q(i, Y) for every i."""
        return get_field(self.spec).dot(evaluation_matrix(self.spec, self.d), self.coeffs)

    def col_sections(self) -> IndexArray:
        """Coefficients in X of Q(X, j) for every j."""
        return get_field(self.spec).dot(evaluation_matrix(self.spec, self.d), self.coeffs.T)

    def family(self) -> RowColFamily:
        """The clean family whose rows and columns are all sections of Q."""
        return RowColFamily(self.spec, self.d, self.row_sections(), self.col_sections())


def rowcol_disagreement(fam: RowColFamily) -> Fraction:
    """Exact fraction of the q^2 cells with r_i(j) != c_j(i)."""
    return Fraction(int(np.count_nonzero(fam.mismatch())), fam.spec.q**2)


def bad_fractions(fam: RowColFamily, poly: BivariatePoly) -> tuple[Fraction, Fraction]:
    """Fractions of rows with r_i != Q(i, .) and of columns with c_j != Q(., j)."""
    q = fam.spec.q
    bad_rows = np.any(poly.row_sections() != fam.rows, axis=1)
    bad_cols = np.any(poly.col_sections() != fam.cols, axis=1)
    return (
        Fraction(int(np.count_nonzero(bad_rows)), q),
        Fraction(int(np.count_nonzero(bad_cols)), q),
    )


def _ranked_subsets(fam: RowColFamily) -> Iterator[tuple[int, ...]]:
    # rows that disagree least with the columns come first; ties keep index order
    per_row = np.count_nonzero(fam.mismatch(), axis=1)
    order = [int(i) for i in np.argsort(per_row, kind="stable")]
    return islice(combinations(order, fam.d + 1), settings.subset_cap)


def _candidate(fam: RowColFamily, subset: tuple[int, ...]) -> BivariatePoly:
    ordered = tuple(sorted(subset))
    matrix = interpolation_matrix(fam.spec, ordered)
    coeffs = get_field(fam.spec).dot(matrix, fam.rows[list(ordered)])
    return BivariatePoly(fam.spec, coeffs)


def fit_bivariate(fam: RowColFamily) -> tuple[BivariatePoly, Fraction, Fraction]:
    """Q minimising x + y over the candidate subsets, with its bad-row and bad-column fractions.

    Ties go to the earliest candidate. Two distinct Q share their sections on at most d
    rows and at most d columns, so a Q with x + y < 1 - d/q beats every other Q and the
    search stops there.

    Raises:
        PreconditionError: If q < 2(d + 1).
        NoCandidateError: If no candidate has x <= 1/2 and y <= 1/2.

    """
    q, d = fam.spec.q, fam.d
    if q < 2 * (d + 1):
        raise PreconditionError(f"The bivariate fit needs q >= 2(d+1), got q={q}, d={d}")

    def score(subset: tuple[int, ...]) -> tuple[BivariatePoly, Fraction, Fraction]:
        poly = _candidate(fam, subset)
        return (poly, *bad_fractions(fam, poly))

    best: tuple[BivariatePoly, Fraction, Fraction] | None = None
    certified = 1 - Fraction(d, q)
    subsets = _ranked_subsets(fam)
    tried = 0
    size = 1
    while window := list(islice(subsets, size)):
        tried += len(window)
        size = SUBSET_WINDOW
        for poly, x, y in parallel_map(score, window):
            if best is None or x + y < best[1] + best[2]:
                best = (poly, x, y)
        if best is not None and best[1] + best[2] < certified:
            break

    logger.debug(f"Bivariate fit over {fam.spec}, d={d}: {tried} candidates")
    if best is None or best[1] > ONE_HALF or best[2] > ONE_HALF:
        raise NoCandidateError(
            f"None of {tried} candidates has bad fractions <= 1/2 (cap {settings.subset_cap})"
        )
    return best


def chain_lower_bound(x: Fraction, y: Fraction, d: int, q: int) -> Fraction:
    """x(1 - y - d/q) + y(1 - x - d/q), a lower bound on the disagreement for any Q."""
    slack = Fraction(d, q)
    return x * (1 - y - slack) + y * (1 - x - slack)


def strengthen_check(fam: RowColFamily, epsilon: Fraction) -> StrengthenReport:
    """Measure the fitted Q against the quarter bound on bad rows and bad columns."""
    q, d = fam.spec.q, fam.d
    epsilon = Fraction(epsilon)
    if epsilon < Fraction(d, q):
        raise PreconditionError(f"epsilon must be >= d/q = {d}/{q}, got {epsilon}")
    disagreement = rowcol_disagreement(fam)
    hypothesis = disagreement <= ONE_QUARTER - epsilon
    try:
        _, x, y = fit_bivariate(fam)
    except NoCandidateError as e:
        logger.info(f"No bivariate candidate: {e}")
        return StrengthenReport(
            q=q,
            d=d,
            disagreement=disagreement,
            epsilon=epsilon,
            hypothesis_holds=hypothesis,
            conclusion_ok=False if hypothesis else None,
        )
    bound = chain_lower_bound(x, y, d, q)
    conclusion = (x <= ONE_QUARTER and y <= ONE_QUARTER) if hypothesis else None
    if conclusion is False:
        logger.error(f"Bad fractions x={x}, y={y} exceed 1/4 at disagreement {disagreement}")
    return StrengthenReport(
        q=q,
        d=d,
        disagreement=disagreement,
        epsilon=epsilon,
        hypothesis_holds=hypothesis,
        bad_row_fraction=x,
        bad_col_fraction=y,
        chain_lower_bound=bound,
        chain_ok=bound <= disagreement,
        conclusion_ok=conclusion,
    )


def _different(rng: np.random.Generator, q: int, original: IndexArray) -> IndexArray:
    while True:
        candidate = rng.integers(0, q, size=original.shape, dtype=np.int64)
        if not np.array_equal(candidate, original):
            return candidate


def random_family(
    spec: FieldSpec, d: int, bad_rows: int, bad_cols: int, rng: np.random.Generator
) -> tuple[RowColFamily, BivariatePoly]:
    """Sections of a random Q0 with ``bad_rows`` rows and ``bad_cols`` columns replaced."""
    q = spec.q
    if not (0 <= bad_rows <= q and 0 <= bad_cols <= q):
        raise PreconditionError(f"Replaced counts must lie in [0, {q}]")
    q0 = BivariatePoly(spec, rng.integers(0, q, size=(d + 1, d + 1), dtype=np.int64))
    rows = q0.row_sections().copy()
    cols = q0.col_sections().copy()
    for block, count in ((rows, bad_rows), (cols, bad_cols)):
        for i in rng.choice(q, size=count, replace=False):
            block[i] = _different(rng, q, block[i])
    return RowColFamily(spec, d, rows, cols), q0


def bivariate_sweep(spec: FieldSpec, d: int, instances: int, seed: int) -> BivariateSweepReport:
    """Generated families at epsilon = max(d, 1)/q with few enough replaced lines.

    Each replaced row or column spoils at most q cells, so replacing at most
    q/4 - q*epsilon of them keeps the disagreement within the quarter hypothesis.
    """
    if instances < 1:
        raise PreconditionError(f"instances must be >= 1, got {instances}")
    q = spec.q
    epsilon = Fraction(max(d, 1), q)
    max_bad = max(0, int((ONE_QUARTER - epsilon) * q))
    logger.info(f"Bivariate sweep over {spec}, d={d}: {instances} instances, <= {max_bad} bad")

    met = conclusion_failures = chain_failures = 0
    max_x = max_y = Fraction(0)
    for k in range(instances):
        rng = stream(seed, k)
        total_bad = int(rng.integers(0, max_bad + 1))
        bad_rows = int(rng.integers(0, total_bad + 1))
        fam, _ = random_family(spec, d, bad_rows, total_bad - bad_rows, rng)
        report = strengthen_check(fam, epsilon)
        met += report.hypothesis_holds
        conclusion_failures += report.conclusion_ok is False
        chain_failures += report.chain_ok is False
        if report.bad_row_fraction is not None:
            max_x = max(max_x, report.bad_row_fraction)
            max_y = max(max_y, report.bad_col_fraction)
    return BivariateSweepReport(
        instances=instances,
        hypothesis_met=met,
        conclusion_failures=conclusion_failures,
        chain_failures=chain_failures,
        max_bad_row_fraction=max_x,
        max_bad_col_fraction=max_y,
        seed=seed,
        params={"p": spec.p, "s": spec.s, "modulus": list(spec.modulus), "d": d},
    )
