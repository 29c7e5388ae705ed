"""Univariate and multivariate polynomial algebra over GF(p^s).

Coefficients are canonical field indices throughout. ``UniPoly`` is dense
(low-to-high), ``MultiPoly`` is a sparse map from exponent vectors to
coefficients, and ``FunctionTable`` is the dense value table of a function
F^m -> F indexed by ``sum(idx(x_j) * q**j)``.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Any

import numpy as np

from app.config import settings
from app.core.field import FieldElement, FieldSpec, GaloisField, IndexArray, get_field
from app.exceptions import (
    ArityMismatchError,
    BudgetExceededError,
    DivisionByZeroError,
    DuplicatePointsError,
    FieldMismatchError,
    PreconditionError,
)

NEG_INF = -math.inf

Degree = int | float


def _check_spec(left: FieldSpec, right: FieldSpec) -> None:
    if left != right:
        raise FieldMismatchError(left, right)


def horner(field: GaloisField, coeffs: IndexArray, t: IndexArray) -> IndexArray:
    """Evaluate coefficient rows (last axis, low-to-high) at ``t`` (broadcast over leading axes)."""
    coeffs = np.asarray(coeffs, dtype=np.int64)
    t = np.asarray(t, dtype=np.int64)
    acc = np.broadcast_to(coeffs[..., -1], np.broadcast_shapes(coeffs.shape[:-1], t.shape))
    for i in range(coeffs.shape[-1] - 2, -1, -1):
        acc = field.add(field.mul(acc, t), coeffs[..., i])
    return np.asarray(acc, dtype=np.int64)


def trim(coeffs: Iterable[int]) -> tuple[int, ...]:
    """Drop trailing zero coefficients."""
    out = [int(c) for c in coeffs]
    while out and out[-1] == 0:
        out.pop()
    return tuple(out)


@dataclass(frozen=True)
class UniPoly:
    """Univariate polynomial with normalised coefficients (no trailing zero)."""

    spec: FieldSpec
    coeffs: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        """Normalise the coefficient vector."""
        object.__setattr__(self, "coeffs", trim(self.coeffs))
        if any(not 0 <= c < self.spec.q for c in self.coeffs):
            raise PreconditionError(f"Coefficients {self.coeffs} outside {self.spec}")

    @classmethod
    def from_elements(cls, spec: FieldSpec, coeffs: Sequence[FieldElement]) -> UniPoly:
        """Build from field elements, low-to-high."""
        for c in coeffs:
            _check_spec(spec, c.spec)
        return cls(spec, tuple(c.index for c in coeffs))

    @property
    def degree(self) -> Degree:
        """Degree, or -inf for the zero polynomial."""
        return len(self.coeffs) - 1 if self.coeffs else NEG_INF

    def coefficient(self, i: int) -> FieldElement:
        """Coefficient of t**i."""
        return FieldElement(self.spec, self.coeffs[i] if i < len(self.coeffs) else 0)

    def padded(self, length: int) -> IndexArray:
        """Coefficient vector zero-padded to ``length``."""
        if len(self.coeffs) > length:
            raise PreconditionError(f"Degree {self.degree} does not fit {length} coefficients")
        out = np.zeros(length, dtype=np.int64)
        out[: len(self.coeffs)] = self.coeffs
        return out


def uni_eval(p: UniPoly, t: FieldElement) -> FieldElement:
    """Horner evaluation of p at t."""
    _check_spec(p.spec, t.spec)
    if not p.coeffs:
        return FieldElement(p.spec, 0)
    field = get_field(p.spec)
    return FieldElement(p.spec, int(horner(field, np.array(p.coeffs), np.int64(t.index))))


def uni_divmod(a: UniPoly, b: UniPoly) -> tuple[UniPoly, UniPoly]:
    """Quotient and remainder of a / b."""
    _check_spec(a.spec, b.spec)
    if not b.coeffs:
        raise DivisionByZeroError("Division by the zero polynomial")
    field = get_field(a.spec)
    rem = list(a.coeffs)
    lead_inv = int(field.inv(np.int64(b.coeffs[-1])))
    quot = [0] * max(len(rem) - len(b.coeffs) + 1, 0)
    for shift in range(len(quot) - 1, -1, -1):
        c = int(field.mul(rem[shift + len(b.coeffs) - 1], lead_inv))
        quot[shift] = c
        if c:
            for i, bc in enumerate(b.coeffs):
                rem[shift + i] = int(field.sub(rem[shift + i], field.mul(c, bc)))
    return UniPoly(a.spec, tuple(quot)), UniPoly(a.spec, tuple(rem))


@lru_cache(maxsize=256)
def interpolation_matrix(spec: FieldSpec, points: tuple[int, ...]) -> IndexArray:
    """Inverse Vandermonde matrix mapping values at ``points`` to coefficients."""
    field = get_field(spec)
    matrix = field.inverse(field.vandermonde(np.array(points, dtype=np.int64), len(points)))
    matrix.setflags(write=False)
    return matrix


def interpolate_uni(points: Sequence[FieldElement], values: Sequence[FieldElement]) -> UniPoly:
    """Unique polynomial of degree < len(points) through the given pairs."""
    if len(points) != len(values):
        raise PreconditionError(f"{len(points)} points but {len(values)} values")
    if not points:
        raise PreconditionError("At least one point is required")
    spec = points[0].spec
    for e in (*points, *values):
        _check_spec(spec, e.spec)
    xs = tuple(p.index for p in points)
    if len(set(xs)) != len(xs):
        raise DuplicatePointsError(f"Interpolation points are not distinct: {list(xs)}")
    field = get_field(spec)
    coeffs = field.dot(interpolation_matrix(spec, xs), np.array([v.index for v in values]))
    return UniPoly(spec, tuple(int(c) for c in coeffs))


@dataclass(frozen=True)
class MultiPoly:
    """Sparse m-variate polynomial: exponent vector -> nonzero coefficient index."""

    spec: FieldSpec
    m: int
    terms: tuple[tuple[tuple[int, ...], int], ...] = ()

    @classmethod
    def from_terms(
        cls,
        spec: FieldSpec,
        m: int,
        terms: Mapping[tuple[int, ...], int] | Iterable[tuple[tuple[int, ...], int]],
    ) -> MultiPoly:
        """Build from (exponents, coefficient) pairs, merging repeats and dropping zeros."""
        field = get_field(spec)
        items = terms.items() if isinstance(terms, Mapping) else terms
        merged: dict[tuple[int, ...], int] = {}
        for exps, coeff in items:
            key = tuple(int(e) for e in exps)
            if len(key) != m:
                raise ArityMismatchError(m, len(key))
            if any(e < 0 for e in key):
                raise PreconditionError(f"Negative exponent in {key}")
            coeff_index = coeff.index if isinstance(coeff, FieldElement) else int(coeff) % spec.q
            merged[key] = int(field.add(merged.get(key, 0), coeff_index))
        return cls(spec, m, tuple(sorted((k, v) for k, v in merged.items() if v)))

    def as_dict(self) -> dict[tuple[int, ...], int]:
        """Terms as a mapping."""
        return dict(self.terms)

    def to_json(self) -> list[dict[str, Any]]:
        """Wire form: ``[{"exps": [...], "coeff": index}, ...]``."""
        return [{"exps": list(exps), "coeff": coeff} for exps, coeff in self.terms]

    @classmethod
    def from_json(
        cls, spec: FieldSpec, data: list[dict[str, Any]], m: int | None = None
    ) -> MultiPoly:
        """Parse the wire form; ``m`` is needed only for the zero polynomial."""
        if m is None:
            if not data:
                raise PreconditionError("Arity is required for an empty term list")
            m = len(data[0]["exps"])
        return cls.from_terms(spec, m, [(tuple(t["exps"]), int(t["coeff"])) for t in data])


def evaluate_points(g: MultiPoly, coords: IndexArray) -> IndexArray:
    """Evaluate g at every row of ``coords`` (shape (N, m))."""
    coords = np.asarray(coords, dtype=np.int64)
    if coords.shape[-1] != g.m:
        raise ArityMismatchError(g.m, coords.shape[-1])
    field = get_field(g.spec)
    acc = np.zeros(coords.shape[:-1], dtype=np.int64)
    for exps, coeff in g.terms:
        term = np.full(coords.shape[:-1], coeff, dtype=np.int64)
        for j, e in enumerate(exps):
            if e:
                term = field.mul(term, field.power(coords[..., j], e))
        acc = field.add(acc, term)
    return acc


def multi_eval(g: MultiPoly, point: Sequence[FieldElement]) -> FieldElement:
    """Value of g at a point of F^m."""
    if len(point) != g.m:
        raise ArityMismatchError(g.m, len(point))
    for x in point:
        _check_spec(g.spec, x.spec)
    value = evaluate_points(g, np.array([[x.index for x in point]], dtype=np.int64))
    return FieldElement(g.spec, int(value[0]))


def total_degree(g: MultiPoly) -> Degree:
    """Largest exponent sum over the stored terms; -inf for zero."""
    return max((sum(exps) for exps, _ in g.terms), default=NEG_INF)


def max_degree(g: MultiPoly) -> Degree:
    """Largest single exponent over the stored terms; -inf for zero."""
    return max((max(exps, default=0) for exps, _ in g.terms), default=NEG_INF)


def _reduce_exponent(e: int, q: int) -> int:
    # t^q = t as functions, so positive exponents fold into [1, q-1] and 0 stays 0
    return e if e < q else (e - 1) % (q - 1) + 1


def reduce(g: MultiPoly) -> MultiPoly:
    """Equivalent polynomial (as a function on F^m) with every exponent <= q - 1."""
    q = g.spec.q
    return MultiPoly.from_terms(
        g.spec, g.m, [(tuple(_reduce_exponent(e, q) for e in exps), c) for exps, c in g.terms]
    )


def monomials(m: int, d: int) -> list[tuple[int, ...]]:
    """Exponent vectors of total degree <= d in lexicographic order."""
    return [e for e in product(range(d + 1), repeat=m) if sum(e) <= d]


def random_poly(spec: FieldSpec, m: int, d: int, rng: np.random.Generator) -> MultiPoly:
    """Uniformly random polynomial of total degree <= d (d < q)."""
    if not 0 <= d < spec.q:
        raise PreconditionError(f"Degree bound d={d} must lie in [0, {spec.q - 1}]")
    exps = monomials(m, d)
    coeffs = rng.integers(0, spec.q, size=len(exps))
    return MultiPoly.from_terms(spec, m, zip(exps, (int(c) for c in coeffs), strict=True))


@dataclass(frozen=True, eq=False)
class FunctionTable:
    """Dense table of a function F^m -> F."""

    spec: FieldSpec
    m: int
    values: IndexArray = field(repr=False)

    def __post_init__(self) -> None:
        """Validate shape and range and freeze the value array."""
        values = np.array(self.values, dtype=np.int64).reshape(-1)
        if values.size != self.spec.q**self.m:
            raise PreconditionError(
                f"Table for m={self.m} over {self.spec} needs {self.spec.q**self.m} values, "
                f"got {values.size}"
            )
        if values.size and (values.min() < 0 or values.max() >= self.spec.q):
            raise PreconditionError(f"Table values outside {self.spec}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __eq__(self, other: object) -> bool:
        """Tables are equal when they describe the same function."""
        if not isinstance(other, FunctionTable):
            return NotImplemented
        return (
            self.spec == other.spec
            and self.m == other.m
            and bool(np.array_equal(self.values, other.values))
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def size(self) -> int:
        """Number of points q^m."""
        return self.spec.q**self.m

    def value_at(self, point: Sequence[FieldElement]) -> FieldElement:
        """f(point)."""
        if len(point) != self.m:
            raise ArityMismatchError(self.m, len(point))
        idx = point_index(self.spec, np.array([x.index for x in point], dtype=np.int64))
        return FieldElement(self.spec, int(self.values[int(idx)]))

    def with_values(self, values: IndexArray) -> FunctionTable:
        """Same domain, new values."""
        return FunctionTable(self.spec, self.m, values)

    def to_text(self) -> str:
        """Text format: ``p s m``, the modulus, then one value index per line."""
        header = [
            f"{self.spec.p} {self.spec.s} {self.m}",
            " ".join(str(c) for c in self.spec.modulus),
        ]
        return "\n".join(header + [str(int(v)) for v in self.values]) + "\n"

    @classmethod
    def from_text(cls, text: str) -> FunctionTable:
        """Parse the text format written by :meth:`to_text`."""
        lines = [line.strip() for line in text.strip().splitlines() if line.strip()]
        if len(lines) < 2:  # noqa: PLR2004
            raise PreconditionError("FunctionTable text needs a header and a modulus line")
        try:
            p, s, m = (int(v) for v in lines[0].split())
            modulus = tuple(int(v) for v in lines[1].split())
            values = np.array([int(v) for v in lines[2:]], dtype=np.int64)
        except ValueError as e:
            raise PreconditionError(f"Malformed FunctionTable text: {e}") from e
        return cls(FieldSpec(p=p, s=s, modulus=modulus), m, values)


def point_index(spec: FieldSpec, coords: IndexArray) -> IndexArray:
    """Canonical point index sum(idx(x_j) * q**j) over the last axis."""
    coords = np.asarray(coords, dtype=np.int64)
    weights = spec.q ** np.arange(coords.shape[-1], dtype=np.int64)
    return coords @ weights


def all_points(spec: FieldSpec, m: int) -> IndexArray:
    """Coordinates of every point of F^m in canonical order, shape (q^m, m)."""
    q = spec.q
    return (np.arange(q**m, dtype=np.int64)[:, None] // q ** np.arange(m, dtype=np.int64)) % q


def table_of(g: MultiPoly) -> FunctionTable:
    """Dense value table of g."""
    return FunctionTable(g.spec, g.m, evaluate_points(g, all_points(g.spec, g.m)))


def interpolate_tables(spec: FieldSpec, m: int, values: IndexArray) -> IndexArray:
    """Reduced coefficient tensors of many tables at once.

    ``values`` has shape (F, q^m); the result has the same shape, entry ``n`` being
    the coefficient of the monomial whose exponent vector has base-q digits ``n``.
    """
    q = spec.q
    n = q**m
    if n * q > settings.line_budget:
        raise BudgetExceededError("interpolation cells", n * q, settings.line_budget)
    field = get_field(spec)
    to_coeffs = interpolation_matrix(spec, tuple(range(q))).T
    values = np.asarray(values, dtype=np.int64)
    tensor = values.reshape((values.shape[0],) + (q,) * m)
    for axis in range(1, m + 1):
        moved = np.moveaxis(tensor, axis, -1)
        tensor = np.moveaxis(field.dot(moved, to_coeffs), -1, axis)
    return tensor.reshape(values.shape[0], n)


def interpolate_table(f: FunctionTable) -> MultiPoly:
    """The unique reduced polynomial (deg_max <= q - 1) agreeing with f everywhere."""
    coeffs = interpolate_tables(f.spec, f.m, f.values[None, :])[0]
    exps = all_points(f.spec, f.m)
    nonzero = np.nonzero(coeffs)[0]
    return MultiPoly.from_terms(
        f.spec, f.m, [(tuple(int(e) for e in exps[i]), int(coeffs[i])) for i in nonzero]
    )


def degree_mask(spec: FieldSpec, m: int, d: int) -> IndexArray:
    """Boolean mask over coefficient positions whose monomial has total degree > d."""
    return all_points(spec, m).sum(axis=1) > d


def distance(f: FunctionTable, g: FunctionTable) -> Fraction:
    """Exact fraction of points where f and g differ."""
    _check_spec(f.spec, g.spec)
    if f.m != g.m:
        raise ArityMismatchError(f.m, g.m)
    return Fraction(int(np.count_nonzero(f.values != g.values)), f.size)
