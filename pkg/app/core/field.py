"""Exact arithmetic in GF(p^s).

Elements are identified with their canonical index: the polynomial-basis
coordinates c_0..c_{s-1} (low-to-high) read as base-p digits, so
``index = sum(c_i * p**i)``. Prime fields use residue arithmetic directly;
extension fields (q <= 64) use precomputed addition and multiplication tables.

Every higher module works on numpy arrays of canonical indices through
:class:`GaloisField`; :class:`FieldElement` is the scalar value type.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from sympy import isprime
from sympy.polys.domains import ZZ
from sympy.polys.galoistools import gf_irreducible_p

from app.exceptions import (
    DivisionByZeroError,
    FieldMismatchError,
    PreconditionError,
    UnsupportedFieldError,
)

logger = logging.getLogger(__name__)

MAX_FIELD_ORDER = 2**20
MAX_TABLE_FIELD_ORDER = 64

# Conway polynomials, coefficients low-to-high, for every p^s <= 64 with s >= 2.
BUILTIN_MODULI: dict[tuple[int, int], tuple[int, ...]] = {
    (2, 2): (1, 1, 1),
    (2, 3): (1, 1, 0, 1),
    (2, 4): (1, 1, 0, 0, 1),
    (2, 5): (1, 0, 1, 0, 0, 1),
    (2, 6): (1, 1, 0, 1, 1, 0, 1),
    (3, 2): (2, 2, 1),
    (3, 3): (1, 2, 0, 1),
    (5, 2): (2, 4, 1),
    (7, 2): (3, 6, 1),
}

IndexArray = np.ndarray[Any, np.dtype[np.int64]]


class FieldSpec(BaseModel):
    """Description of GF(p^s): characteristic, extension degree and modulus.

    Serialises as ``{"p": 2, "s": 2, "modulus": [1, 1, 1]}``. The modulus may be
    omitted, in which case the built-in table (or ``x`` for prime fields) is used.
    """

    model_config = ConfigDict(frozen=True)

    p: int = Field(..., ge=2, description="Prime characteristic")
    s: int = Field(default=1, ge=1, description="Extension degree")
    modulus: tuple[int, ...] = Field(
        ..., description="Monic irreducible modulus over Z_p, coefficients low-to-high"
    )

    @model_validator(mode="before")
    @classmethod
    def _fill_modulus(cls, data: Any) -> Any:  # noqa: ANN401
        if not isinstance(data, dict) or data.get("modulus") is not None:
            return data
        p, s = int(data.get("p", 0)), int(data.get("s", 1))
        if s == 1:
            return {**data, "modulus": (0, 1)}
        if (p, s) not in BUILTIN_MODULI:
            raise UnsupportedFieldError(
                f"No built-in modulus for GF({p}^{s}); supported extension fields: "
                f"{sorted(BUILTIN_MODULI)}"
            )
        return {**data, "modulus": BUILTIN_MODULI[(p, s)]}

    @model_validator(mode="after")
    def _check_field(self) -> Self:
        if not isprime(self.p):
            raise ValueError(f"p={self.p} is not prime")
        order = self.p**self.s
        if order > MAX_FIELD_ORDER:
            raise UnsupportedFieldError(f"q={order} exceeds the maximum {MAX_FIELD_ORDER}")
        if self.s > 1 and order > MAX_TABLE_FIELD_ORDER:
            raise UnsupportedFieldError(
                f"Extension fields are supported up to q={MAX_TABLE_FIELD_ORDER}, got q={order}"
            )
        if len(self.modulus) != self.s + 1 or self.modulus[-1] != 1:
            raise ValueError(f"modulus {list(self.modulus)} is not monic of degree {self.s}")
        if any(not 0 <= c < self.p for c in self.modulus):
            raise ValueError(f"modulus coefficients must lie in [0, {self.p})")
        if self.s > 1 and not gf_irreducible_p(list(reversed(self.modulus)), self.p, ZZ):
            raise ValueError(f"modulus {list(self.modulus)} is reducible over Z_{self.p}")
        return self

    @classmethod
    def of(cls, p: int, s: int = 1) -> FieldSpec:
        """Spec with the built-in modulus."""
        return cls(p=p, s=s)

    @property
    def q(self) -> int:
        """Order of the field."""
        return self.p**self.s

    @property
    def subfield_index(self) -> int:
        """The exact quotient q/p = p^(s-1)."""
        return self.p ** (self.s - 1)

    def __str__(self) -> str:
        """Render as GF(q)."""
        return f"GF({self.q})"


class GaloisField:
    """Vectorised arithmetic over canonical indices of one field."""

    def __init__(self, spec: FieldSpec) -> None:
        """Build the arithmetic engine, precomputing tables for extension fields."""
        self.spec = spec
        self.p = spec.p
        self.s = spec.s
        self.q = spec.q
        self.is_prime = spec.s == 1
        if not self.is_prime:
            self._build_tables()

    def _build_tables(self) -> None:
        p, s, q = self.p, self.s, self.q
        weights = p ** np.arange(s, dtype=np.int64)
        digits = (np.arange(q, dtype=np.int64)[:, None] // weights) % p

        self._add = ((digits[:, None, :] + digits[None, :, :]) % p) @ weights
        self._neg = ((-digits) % p) @ weights

        product = np.zeros((q, q, 2 * s - 1), dtype=np.int64)
        for i in range(s):
            for j in range(s):
                product[:, :, i + j] += digits[:, None, i] * digits[None, :, j]
        modulus = np.array(self.spec.modulus, dtype=np.int64)
        # x^s = -(m_0 + m_1 x + ... + m_{s-1} x^{s-1})
        for k in range(2 * s - 2, s - 1, -1):
            top = product[:, :, k] % p
            product[:, :, k - s : k] -= top[:, :, None] * modulus[None, None, :s]
            product[:, :, k] = 0
        self._mul = (product[:, :, :s] % p) @ weights

        self._inv = np.argmax(self._mul == 1, axis=1).astype(np.int64)
        self._inv[0] = 0
        logger.debug(f"Built arithmetic tables for {self.spec}")

    def elements(self) -> IndexArray:
        """All canonical indices in order."""
        return np.arange(self.q, dtype=np.int64)

    def add(self, a: IndexArray, b: IndexArray) -> IndexArray:
        """Elementwise sum."""
        if self.is_prime:
            return (np.asarray(a) + b) % self.p
        return self._add[a, b]

    def neg(self, a: IndexArray) -> IndexArray:
        """Elementwise additive inverse."""
        if self.is_prime:
            return (-np.asarray(a)) % self.p
        return self._neg[a]

    def sub(self, a: IndexArray, b: IndexArray) -> IndexArray:
        """Elementwise difference."""
        if self.is_prime:
            return (np.asarray(a) - b) % self.p
        return self._add[a, self._neg[b]]

    def mul(self, a: IndexArray, b: IndexArray) -> IndexArray:
        """Elementwise product."""
        if self.is_prime:
            return (np.asarray(a, dtype=np.int64) * b) % self.p
        return self._mul[a, b]

    def inv(self, a: IndexArray) -> IndexArray:
        """Elementwise multiplicative inverse; zero entries are an error."""
        a = np.asarray(a, dtype=np.int64)
        if np.any(a == 0):
            raise DivisionByZeroError(f"Zero has no inverse in {self.spec}")
        if self.is_prime:
            return self.power(a, self.q - 2)
        return self._inv[a]

    def power(self, a: IndexArray, e: int) -> IndexArray:
        """Elementwise a**e by repeated squaring, with 0**0 = 1."""
        if e < 0:
            raise PreconditionError(f"Exponent must be non-negative, got {e}")
        base = np.asarray(a, dtype=np.int64)
        result = np.ones_like(base)
        while e:
            if e & 1:
                result = self.mul(result, base)
            base = self.mul(base, base)
            e >>= 1
        return result

    def dot(self, a: IndexArray, b: IndexArray) -> IndexArray:
        """Field matrix product contracting the last axis of ``a`` with the first of ``b``."""
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        if self.is_prime:
            # entries < 2^20, so inner sums stay below 2^63 for inner dims < 2^23
            return (a @ b) % self.p
        expand = (Ellipsis,) + (None,) * (b.ndim - 1)
        acc = np.zeros(a.shape[:-1] + b.shape[1:], dtype=np.int64)
        for k in range(a.shape[-1]):
            acc = self._add[acc, self._mul[a[..., k][expand], b[k]]]
        return acc

    def vandermonde(self, points: IndexArray, columns: int) -> IndexArray:
        """Matrix V[i, e] = points[i]**e for e < columns."""
        points = np.asarray(points, dtype=np.int64)
        out = np.ones((points.size, columns), dtype=np.int64)
        for e in range(1, columns):
            out[:, e] = self.mul(out[:, e - 1], points)
        return out

    def _row_reduce(self, augmented: IndexArray, columns: int) -> tuple[IndexArray, list[int]]:
        m = np.array(augmented, dtype=np.int64, copy=True)
        pivots: list[int] = []
        row = 0
        for col in range(columns):
            if row == m.shape[0]:
                break
            nonzero = np.nonzero(m[row:, col])[0]
            if nonzero.size == 0:
                continue
            pivot = row + int(nonzero[0])
            if pivot != row:
                m[[row, pivot]] = m[[pivot, row]]
            m[row] = self.mul(m[row], self.inv(m[row, col]))
            others = np.nonzero(m[:, col])[0]
            others = others[others != row]
            if others.size:
                m[others] = self.sub(m[others], self.mul(m[others, col][:, None], m[row][None, :]))
            pivots.append(col)
            row += 1
        return m, pivots

    def solve(self, a: IndexArray, b: IndexArray) -> IndexArray | None:
        """One solution of ``a @ x = b`` (free variables set to zero), or None if inconsistent."""
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        columns = a.shape[1]
        reduced, pivots = self._row_reduce(np.concatenate([a, b[:, None]], axis=1), columns)
        if np.any(reduced[len(pivots) :, columns] != 0):
            return None
        x = np.zeros(columns, dtype=np.int64)
        for row, col in enumerate(pivots):
            x[col] = reduced[row, columns]
        return x

    def inverse(self, a: IndexArray) -> IndexArray:
        """Inverse of a square matrix."""
        a = np.asarray(a, dtype=np.int64)
        n = a.shape[0]
        reduced, pivots = self._row_reduce(
            np.concatenate([a, np.eye(n, dtype=np.int64)], axis=1), n
        )
        if len(pivots) != n:
            raise DivisionByZeroError("Matrix is singular")
        return reduced[:, n:]


@lru_cache(maxsize=64)
def get_field(spec: FieldSpec) -> GaloisField:
    """Shared arithmetic engine for a spec."""
    return GaloisField(spec)


@dataclass(frozen=True, slots=True)
class FieldElement:
    """An immutable element of GF(p^s), stored by canonical index."""

    spec: FieldSpec
    index: int

    def __post_init__(self) -> None:
        """Validate the index range."""
        if not 0 <= self.index < self.spec.q:
            raise PreconditionError(f"Index {self.index} outside [0, {self.spec.q})")

    @property
    def coeffs(self) -> tuple[int, ...]:
        """Polynomial-basis coordinates, low-to-high."""
        return tuple((self.index // self.spec.p**i) % self.spec.p for i in range(self.spec.s))

    def __int__(self) -> int:
        """Canonical index."""
        return self.index

    def __add__(self, other: FieldElement) -> FieldElement:
        """Field addition."""
        return fe_add(self, other)

    def __sub__(self, other: FieldElement) -> FieldElement:
        """Field subtraction."""
        return fe_sub(self, other)

    def __mul__(self, other: FieldElement) -> FieldElement:
        """Field multiplication."""
        return fe_mul(self, other)

    def __truediv__(self, other: FieldElement) -> FieldElement:
        """Field division."""
        return fe_div(self, other)

    def __neg__(self) -> FieldElement:
        """Additive inverse."""
        return fe_neg(self)

    def __pow__(self, e: int) -> FieldElement:
        """Non-negative power."""
        return fe_pow(self, e)

    def __repr__(self) -> str:
        """Compact representation."""
        return f"{self.spec}[{self.index}]"


def _check_same(a: FieldElement, b: FieldElement) -> GaloisField:
    if a.spec != b.spec:
        raise FieldMismatchError(a.spec, b.spec)
    return get_field(a.spec)


def fe_add(a: FieldElement, b: FieldElement) -> FieldElement:
    """Sum of two elements of the same field."""
    field = _check_same(a, b)
    return FieldElement(a.spec, int(field.add(a.index, b.index)))


def fe_sub(a: FieldElement, b: FieldElement) -> FieldElement:
    """Difference of two elements of the same field."""
    field = _check_same(a, b)
    return FieldElement(a.spec, int(field.sub(a.index, b.index)))


def fe_neg(a: FieldElement) -> FieldElement:
    """Additive inverse."""
    field = get_field(a.spec)
    return FieldElement(a.spec, int(field.neg(a.index)))


def fe_mul(a: FieldElement, b: FieldElement) -> FieldElement:
    """Product of two elements, reduced by the modulus."""
    field = _check_same(a, b)
    return FieldElement(a.spec, int(field.mul(a.index, b.index)))


def fe_inv(a: FieldElement) -> FieldElement:
    """Multiplicative inverse; raises DivisionByZeroError on zero."""
    field = get_field(a.spec)
    return FieldElement(a.spec, int(field.inv(np.asarray(a.index))))


def fe_div(a: FieldElement, b: FieldElement) -> FieldElement:
    """Quotient a / b."""
    return fe_mul(a, fe_inv(b))


def fe_pow(a: FieldElement, e: int) -> FieldElement:
    """a**e for e >= 0 (0**0 = 1)."""
    field = get_field(a.spec)
    return FieldElement(a.spec, int(field.power(np.asarray(a.index), e)))


def element_from_index(spec: FieldSpec, index: int) -> FieldElement:
    """Element with the given canonical index."""
    return FieldElement(spec, index)


def element_from_coeffs(spec: FieldSpec, coeffs: tuple[int, ...] | list[int]) -> FieldElement:
    """Element from polynomial-basis coordinates (low-to-high)."""
    if len(coeffs) != spec.s or any(not 0 <= c < spec.p for c in coeffs):
        raise PreconditionError(f"{list(coeffs)} is not a coordinate vector of {spec}")
    return FieldElement(spec, sum(c * spec.p**i for i, c in enumerate(coeffs)))


def canonical_index(e: FieldElement) -> int:
    """Wire form of an element."""
    return e.index


def enumerate_field(spec: FieldSpec) -> list[FieldElement]:
    """All q elements in canonical-index order."""
    return [FieldElement(spec, i) for i in range(spec.q)]
