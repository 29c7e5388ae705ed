"""Lines in F^m, restrictions of tables to lines, and degree-d line fits.

A line ``(x, h)`` has canonical index ``idx(x) + q**m * idx(h)``, where ``idx`` is
the point index of :mod:`app.core.poly`. Degenerate lines (``h = 0``) are part of the
index space.

Fitting works on batches of restrictions (one row of q values per line):

1. Interpolate a fixed set of (d+1)-subsets of positions. A candidate agreeing on
   more than (q+d)/2 positions is the unique best fit, and most lines stop here.
2. Run Berlekamp-Welch on the remaining lines; a success is again certified.
3. The exact backend then enumerates every (d+1)-subset (q <= exact_fit_max_q) and
   keeps the maximum-agreement polynomial with the lexicographically smallest
   coefficient vector. The decode backend raises :class:`NoUniqueFitError` instead.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import StrEnum
from functools import lru_cache
from itertools import combinations

import numpy as np

from app.config import settings
from app.core.field import FieldElement, FieldSpec, GaloisField, IndexArray, get_field
from app.core.poly import (
    FunctionTable,
    UniPoly,
    horner,
    interpolation_matrix,
    point_index,
    uni_divmod,
)
from app.core.sampling import parallel_map
from app.exceptions import (
    ArityMismatchError,
    BudgetExceededError,
    FieldMismatchError,
    InvalidDegreeError,
    NoUniqueFitError,
    PreconditionError,
)

logger = logging.getLogger(__name__)

LINE_CHUNK = 1 << 15
FAST_PATH_CANDIDATES = 48


class Backend(StrEnum):
    """Line-fit strategy."""

    EXACT = "exact"
    DECODE = "decode"


@dataclass(frozen=True)
class Line:
    """The line l_{x,h} = {x + t*h : t in F}, coordinates as canonical indices."""

    spec: FieldSpec
    x: tuple[int, ...]
    h: tuple[int, ...]

    def __post_init__(self) -> None:
        """Check arity and coordinate range."""
        if len(self.x) != len(self.h):
            raise ArityMismatchError(len(self.x), len(self.h))
        if any(not 0 <= c < self.spec.q for c in (*self.x, *self.h)):
            raise PreconditionError(f"Line coordinates outside {self.spec}")

    @classmethod
    def from_elements(cls, x: Sequence[FieldElement], h: Sequence[FieldElement]) -> Line:
        """Build from field elements."""
        if not x:
            raise PreconditionError("A line needs at least one coordinate")
        spec = x[0].spec
        for e in (*x, *h):
            if e.spec != spec:
                raise FieldMismatchError(spec, e.spec)
        return cls(spec, tuple(e.index for e in x), tuple(e.index for e in h))

    @property
    def m(self) -> int:
        """Dimension of the ambient space."""
        return len(self.x)

    @property
    def index(self) -> int:
        """Canonical line index."""
        return line_index(self)


@dataclass(frozen=True)
class LineFit:
    """Best degree-d polynomial on a line and the number of parameters it agrees on."""

    poly: UniPoly
    agreement: int
    d: int


def check_degree(d: int, q: int) -> None:
    """Require 0 <= d <= q - 1."""
    if not 0 <= d <= q - 1:
        raise InvalidDegreeError(d, q)


def line_count(spec: FieldSpec, m: int) -> int:
    """Number of (x, h) pairs, q^(2m)."""
    return spec.q ** (2 * m)


def check_line_budget(requested: int, what: str = "lines") -> None:
    """Refuse exhaustive enumerations above the configured line budget."""
    if requested > settings.line_budget:
        logger.warning(f"Refusing to enumerate {requested} {what} (budget {settings.line_budget})")
        raise BudgetExceededError(what, requested, settings.line_budget)


def line_point(line: Line, t: FieldElement) -> tuple[FieldElement, ...]:
    """The point x + t*h."""
    if t.spec != line.spec:
        raise FieldMismatchError(line.spec, t.spec)
    field = get_field(line.spec)
    coords = field.add(np.array(line.x), field.mul(np.int64(t.index), np.array(line.h)))
    return tuple(FieldElement(line.spec, int(c)) for c in coords)


def line_index(line: Line) -> int:
    """Canonical index idx(x) + q^m * idx(h)."""
    q_m = line.spec.q**line.m
    return int(point_index(line.spec, np.array(line.x))) + q_m * int(
        point_index(line.spec, np.array(line.h))
    )


def lines_at(spec: FieldSpec, m: int, indices: IndexArray) -> tuple[IndexArray, IndexArray]:
    """Coordinates (x, h), each of shape (L, m), of the lines with the given indices."""
    q = spec.q
    indices = np.asarray(indices, dtype=np.int64)
    weights = q ** np.arange(m, dtype=np.int64)
    x_idx, h_idx = indices % q**m, indices // q**m
    return (x_idx[:, None] // weights) % q, (h_idx[:, None] // weights) % q


def all_lines(spec: FieldSpec, m: int) -> tuple[IndexArray, IndexArray]:
    """Every line of F^m in canonical order."""
    count = line_count(spec, m)
    check_line_budget(count)
    return lines_at(spec, m, np.arange(count, dtype=np.int64))


def line_coords(spec: FieldSpec, xs: IndexArray, hs: IndexArray) -> IndexArray:
    """Points x + t*h for every line and every t, shape (L, q, m)."""
    field = get_field(spec)
    ts = field.elements()
    return field.add(xs[:, None, :], field.mul(ts[None, :, None], hs[:, None, :]))


def restrict_lines(f: FunctionTable, xs: IndexArray, hs: IndexArray) -> IndexArray:
    """Restrictions of f to a batch of lines, shape (L, q)."""
    if xs.shape[-1] != f.m:
        raise ArityMismatchError(f.m, xs.shape[-1])
    return f.values[point_index(f.spec, line_coords(f.spec, xs, hs))]


def restrict(f: FunctionTable, line: Line) -> list[FieldElement]:
    """Values f(x + t*h) for t in canonical order."""
    if line.spec != f.spec:
        raise FieldMismatchError(f.spec, line.spec)
    if line.m != f.m:
        raise ArityMismatchError(f.m, line.m)
    row = restrict_lines(f, np.array([line.x]), np.array([line.h]))[0]
    return [FieldElement(f.spec, int(v)) for v in row]


@lru_cache(maxsize=64)
def evaluation_matrix(spec: FieldSpec, d: int) -> IndexArray:
    """V[t, e] = t**e over all of F, mapping d+1 coefficients to q values."""
    field = get_field(spec)
    matrix = field.vandermonde(field.elements(), d + 1)
    matrix.setflags(write=False)
    return matrix


@lru_cache(maxsize=64)
def _candidate_subsets(q: int, d: int) -> tuple[tuple[int, ...], ...]:
    size = d + 1
    found: dict[tuple[int, ...], None] = {}
    for step in (s for s in range(1, q) if math.gcd(s, q) == 1):
        for start in range(0, q, size):
            subset = tuple(sorted((start + k * step) % q for k in range(size)))
            if step == 1 and start + size > q:
                continue
            found.setdefault(subset)
            if len(found) == FAST_PATH_CANDIDATES:
                return tuple(found)
    return tuple(found)


def _fit_candidates(
    field: GaloisField, values: IndexArray, d: int
) -> tuple[IndexArray, IndexArray]:
    q = field.q
    spec = field.spec
    lines = values.shape[0]
    best_coeffs = np.zeros((lines, d + 1), dtype=np.int64)
    best_agreement = np.zeros(lines, dtype=np.int64)
    evaluate = evaluation_matrix(spec, d).T
    pending = np.arange(lines)
    for subset in _candidate_subsets(q, d):
        if pending.size == 0:
            break
        rows = values[pending]
        coeffs = field.dot(rows[:, list(subset)], interpolation_matrix(spec, subset).T)
        agreement = np.count_nonzero(field.dot(coeffs, evaluate) == rows, axis=1)
        better = agreement > best_agreement[pending]
        best_coeffs[pending[better]] = coeffs[better]
        best_agreement[pending[better]] = agreement[better]
        pending = pending[2 * agreement <= q + d]
    return best_coeffs, best_agreement


def berlekamp_welch(field: GaloisField, values: IndexArray, d: int) -> IndexArray | None:
    """Unique degree-<=d polynomial agreeing with ``values`` on more than (q+d)/2 positions.

    Returns the padded coefficient vector, or None when no such polynomial exists.
    """
    q = field.q
    errors = (q - d - 1) // 2
    ts = field.elements()
    values = np.asarray(values, dtype=np.int64)
    numerator_terms = errors + d + 1
    system = np.concatenate(
        [
            field.vandermonde(ts, numerator_terms),
            field.neg(field.mul(values[:, None], field.vandermonde(ts, errors))),
        ],
        axis=1,
    )
    solution = field.solve(system, field.mul(values, field.power(ts, errors)))
    if solution is None:
        return None
    numerator = UniPoly(field.spec, tuple(solution[:numerator_terms]))
    locator = UniPoly(field.spec, (*solution[numerator_terms:], 1))
    quotient, remainder = uni_divmod(numerator, locator)
    if remainder.coeffs or quotient.degree > d:
        return None
    coeffs = quotient.padded(d + 1)
    agreement = int(np.count_nonzero(horner(field, coeffs, ts) == values))
    if 2 * agreement <= q + d:
        return None
    return coeffs


@lru_cache(maxsize=8)
def _lagrange_basis(spec: FieldSpec, d: int) -> tuple[IndexArray, IndexArray]:
    q = spec.q
    if q > settings.exact_fit_max_q:
        raise BudgetExceededError(
            "field elements for subset enumeration", q, settings.exact_fit_max_q
        )
    subset_count = math.comb(q, d + 1)
    check_line_budget(subset_count, "interpolation subsets")
    field = get_field(spec)
    ts = field.elements()
    subsets = np.array(list(combinations(range(q), d + 1)), dtype=np.int64)
    basis = np.empty((subset_count, d + 1, q), dtype=np.int64)
    for i in range(d + 1):
        numerator = np.ones((subset_count, q), dtype=np.int64)
        denominator = np.ones(subset_count, dtype=np.int64)
        for j in range(d + 1):
            if j != i:
                numerator = field.mul(numerator, field.sub(ts[None, :], subsets[:, j, None]))
                denominator = field.mul(denominator, field.sub(subsets[:, i], subsets[:, j]))
        basis[:, i, :] = field.mul(numerator, field.inv(denominator)[:, None])
    subsets.setflags(write=False)
    basis.setflags(write=False)
    return subsets, basis


def _exhaustive_fit(field: GaloisField, values: IndexArray, d: int) -> tuple[IndexArray, int]:
    subsets, basis = _lagrange_basis(field.spec, d)
    predictions = np.zeros((subsets.shape[0], field.q), dtype=np.int64)
    for i in range(d + 1):
        predictions = field.add(predictions, field.mul(values[subsets[:, i], None], basis[:, i, :]))
    agreement = np.count_nonzero(predictions == values[None, :], axis=1)
    best = int(agreement.max())
    winners = np.unique(predictions[agreement == best], axis=0)
    coeffs = field.dot(
        winners[:, : d + 1], interpolation_matrix(field.spec, tuple(range(d + 1))).T
    )
    first = np.lexsort(coeffs.T[::-1])[0]
    return coeffs[first], best


def fit_lines(
    spec: FieldSpec, values: IndexArray, d: int, backend: Backend = Backend.EXACT
) -> tuple[IndexArray, IndexArray]:
    """Fit every row of ``values`` (shape (L, q)); returns coefficients (L, d+1) and agreements."""
    check_degree(d, spec.q)
    field = get_field(spec)
    values = np.asarray(values, dtype=np.int64)
    coeffs, agreement = _fit_candidates(field, values, d)
    uncertified = np.nonzero(2 * agreement <= spec.q + d)[0]
    if uncertified.size:
        logger.debug(f"{uncertified.size} of {values.shape[0]} lines need a slow fit")
    for i in uncertified:
        decoded = berlekamp_welch(field, values[i], d)
        if decoded is not None:
            coeffs[i] = decoded
            agreement[i] = np.count_nonzero(horner(field, decoded, field.elements()) == values[i])
        elif backend is Backend.DECODE:
            raise NoUniqueFitError(
                f"No degree-{d} polynomial agrees with more than (q+d)/2 = {(spec.q + d) / 2} "
                f"of the values {values[i].tolist()}"
            )
        else:
            coeffs[i], agreement[i] = _exhaustive_fit(field, values[i], d)
    return coeffs, agreement


def fit_line_poly(
    values: Sequence[FieldElement], d: int, backend: Backend = Backend.EXACT
) -> LineFit:
    """Maximum-agreement degree-<=d polynomial for the values on one line."""
    if not values:
        raise PreconditionError("Line values must not be empty")
    spec = values[0].spec
    for v in values:
        if v.spec != spec:
            raise FieldMismatchError(spec, v.spec)
    if len(values) != spec.q:
        raise PreconditionError(f"A line over {spec} has {spec.q} values, got {len(values)}")
    coeffs, agreement = fit_lines(spec, np.array([[v.index for v in values]]), d, backend)
    return LineFit(UniPoly(spec, tuple(coeffs[0])), int(agreement[0]), d)


def line_poly(f: FunctionTable, line: Line, d: int, backend: Backend = Backend.EXACT) -> LineFit:
    """Line polynomial of f on ``line``."""
    return fit_line_poly(restrict(f, line), d, backend)


def fit_all_lines(
    f: FunctionTable, d: int, backend: Backend = Backend.EXACT
) -> tuple[IndexArray, IndexArray]:
    """Fits for every line of F^m in canonical order: coefficients (N, d+1), agreements (N,)."""
    check_degree(d, f.spec.q)
    count = line_count(f.spec, f.m)
    check_line_budget(count)

    def fit_chunk(start: int) -> tuple[IndexArray, IndexArray]:
        xs, hs = lines_at(f.spec, f.m, np.arange(start, min(start + LINE_CHUNK, count)))
        return fit_lines(f.spec, restrict_lines(f, xs, hs), d, backend)

    parts = parallel_map(fit_chunk, range(0, count, LINE_CHUNK))
    return (
        np.concatenate([c for c, _ in parts]),
        np.concatenate([a for _, a in parts]),
    )
