"""Tests for GF(p^s) arithmetic."""

import numpy as np
import pytest
from pydantic import ValidationError

from app.core.field import (
    BUILTIN_MODULI,
    FieldElement,
    FieldSpec,
    canonical_index,
    element_from_coeffs,
    element_from_index,
    enumerate_field,
    fe_inv,
    fe_pow,
    get_field,
)
from app.core.sampling import stream
from app.exceptions import DivisionByZeroError, FieldMismatchError, UnsupportedFieldError


@pytest.mark.unit
class TestFieldSpec:
    """Test cases for FieldSpec."""

    def test_prime_field(self) -> None:
        """Test a prime field gets the modulus x."""
        spec = FieldSpec.of(17)

        assert spec.q == 17
        assert spec.modulus == (0, 1)
        assert spec.subfield_index == 1
        assert str(spec) == "GF(17)"

    def test_builtin_modulus(self) -> None:
        """Test extension fields pick up the built-in modulus."""
        spec = FieldSpec.of(5, 2)

        assert spec.q == 25
        assert spec.modulus == BUILTIN_MODULI[(5, 2)]
        assert spec.subfield_index == 5

    def test_serialises(self) -> None:
        """Test the wire form."""
        assert FieldSpec.of(2, 2).model_dump() == {"p": 2, "s": 2, "modulus": (1, 1, 1)}

    def test_rejects_composite_characteristic(self) -> None:
        """Test p must be prime."""
        with pytest.raises(ValidationError):
            FieldSpec(p=6, modulus=(0, 1))

    def test_rejects_reducible_modulus(self) -> None:
        """Test x^2 + 1 = (x + 1)^2 over Z_2 is refused."""
        with pytest.raises(ValidationError) as exc_info:
            FieldSpec(p=2, s=2, modulus=(1, 0, 1))

        assert "reducible" in str(exc_info.value)

    def test_rejects_non_monic_modulus(self) -> None:
        """Test the modulus must be monic of degree s."""
        with pytest.raises(ValidationError):
            FieldSpec(p=3, s=2, modulus=(2, 2, 2))

    def test_unsupported_extension(self) -> None:
        """Test extension fields above q = 64 are refused."""
        with pytest.raises(UnsupportedFieldError):
            FieldSpec.of(3, 4)

    def test_spec_is_hashable(self) -> None:
        """Test specs can key caches."""
        assert hash(FieldSpec.of(2, 2)) == hash(FieldSpec(p=2, s=2, modulus=(1, 1, 1)))


@pytest.mark.unit
class TestFieldElement:
    """Test cases for scalar arithmetic."""

    def test_gf4_multiplication(self, gf4: FieldSpec) -> None:
        """Test x * x = x + 1 modulo x^2 + x + 1."""
        x = element_from_coeffs(gf4, (0, 1))

        assert (x * x).coeffs == (1, 1)
        assert (x * x * x).index == 1

    def test_prime_arithmetic(self, gf5: FieldSpec) -> None:
        """Test residue arithmetic in GF(5)."""
        a, b = element_from_index(gf5, 3), element_from_index(gf5, 4)

        assert (a + b).index == 2
        assert (a - b).index == 4
        assert (a * b).index == 2
        assert (a / b).index == 2
        assert (-a).index == 2
        assert (a**0).index == 1

    def test_zero_to_the_zero(self, gf4: FieldSpec) -> None:
        """Test 0**0 = 1."""
        assert (FieldElement(gf4, 0) ** 0).index == 1

    @pytest.mark.parametrize(("p", "s"), [(2, 1), (7, 1), (2, 3), (3, 2), (2, 6)])
    def test_every_nonzero_element_inverts(self, p: int, s: int) -> None:
        """Test a * a^-1 = 1 on every nonzero element."""
        spec = FieldSpec.of(p, s)
        for a in enumerate_field(spec)[1:]:
            assert (a * fe_inv(a)).index == 1

    def test_inverse_of_zero(self, gf4: FieldSpec) -> None:
        """Test zero has no inverse."""
        with pytest.raises(DivisionByZeroError):
            fe_inv(FieldElement(gf4, 0))

    def test_field_mismatch(self, gf4: FieldSpec, gf5: FieldSpec) -> None:
        """Test mixing fields raises."""
        with pytest.raises(FieldMismatchError):
            FieldElement(gf4, 1) + FieldElement(gf5, 1)

    def test_index_range(self, gf5: FieldSpec) -> None:
        """Test out-of-range indices are refused."""
        with pytest.raises(ValueError, match="outside"):
            FieldElement(gf5, 5)

    def test_frobenius_is_additive(self, gf4: FieldSpec) -> None:
        """Test (a + b)^p = a^p + b^p."""
        for a in enumerate_field(gf4):
            for b in enumerate_field(gf4):
                assert (a + b) ** 2 == a**2 + b**2

    def test_index_round_trip(self, gf4: FieldSpec) -> None:
        """Test canonical index of built elements."""
        assert [canonical_index(e) for e in enumerate_field(gf4)] == [0, 1, 2, 3]
        assert element_from_coeffs(gf4, (1, 1)).index == 3


@pytest.mark.unit
class TestGaloisField:
    """Test cases for the vectorised engine."""

    @pytest.mark.parametrize(("p", "s"), [(2, 2), (3, 2), (2, 4)])
    def test_multiplicative_group_is_cyclic_of_order_q_minus_1(self, p: int, s: int) -> None:
        """Test a^(q-1) = 1 for every nonzero a."""
        field = get_field(FieldSpec.of(p, s))
        nonzero = field.elements()[1:]

        assert np.all(field.power(nonzero, field.q - 1) == 1)

    def test_solve_and_inverse(self, gf5: FieldSpec) -> None:
        """Test linear algebra over GF(5)."""
        field = get_field(gf5)
        a = np.array([[1, 2], [3, 4]])
        inverse = field.inverse(a)

        assert np.array_equal(field.dot(a, inverse), np.eye(2, dtype=np.int64))
        x = field.solve(a, np.array([1, 0]))
        assert x is not None
        assert np.array_equal(field.dot(a, x), [1, 0])

    def test_inconsistent_system(self, gf5: FieldSpec) -> None:
        """Test solve returns None without a solution."""
        field = get_field(gf5)

        assert field.solve(np.array([[1, 1], [2, 2]]), np.array([1, 0])) is None

    def test_singular_inverse(self, gf5: FieldSpec) -> None:
        """Test singular matrices are refused."""
        with pytest.raises(DivisionByZeroError):
            get_field(gf5).inverse(np.array([[1, 2], [2, 4]]))

    def test_dot_matches_scalar_loop(self, gf4: FieldSpec) -> None:
        """Test the table-driven matrix product over GF(4)."""
        field = get_field(gf4)
        a = np.array([[1, 2, 3], [3, 0, 2]])
        b = np.array([[2, 1], [3, 3], [1, 0]])
        expected = np.zeros((2, 2), dtype=np.int64)
        for i in range(2):
            for j in range(2):
                acc = FieldElement(gf4, 0)
                for k in range(3):
                    acc = acc + FieldElement(gf4, int(a[i, k])) * FieldElement(gf4, int(b[k, j]))
                expected[i, j] = acc.index

        assert np.array_equal(field.dot(a, b), expected)


SMALL_PRIMES = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61]
BUILTIN_FIELDS = [(p, 1) for p in SMALL_PRIMES] + sorted(BUILTIN_MODULI)
FULL_CHECK_MAX_Q = 16


def _triples(spec: FieldSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Every (a, b, c) for q <= 16, otherwise a seeded sample of 4096 triples."""
    if spec.q <= FULL_CHECK_MAX_Q:
        a, b, c = np.meshgrid(*([np.arange(spec.q)] * 3), indexing="ij")
        return a.ravel(), b.ravel(), c.ravel()
    a, b, c = stream(spec.q, 0).integers(0, spec.q, size=(3, 4096))
    return a, b, c


@pytest.mark.unit
class TestFieldAxioms:
    """Test cases for the field axioms over every built-in field with q <= 64."""

    @pytest.mark.parametrize(("p", "s"), BUILTIN_FIELDS)
    def test_associativity_and_distributivity(self, p: int, s: int) -> None:
        """Test (a+b)+c = a+(b+c), (ab)c = a(bc) and a(b+c) = ab+ac."""
        field = get_field(FieldSpec.of(p, s))
        a, b, c = _triples(field.spec)

        assert np.array_equal(field.add(field.add(a, b), c), field.add(a, field.add(b, c)))
        assert np.array_equal(field.mul(field.mul(a, b), c), field.mul(a, field.mul(b, c)))
        assert np.array_equal(
            field.mul(a, field.add(b, c)), field.add(field.mul(a, b), field.mul(a, c))
        )

    @pytest.mark.parametrize(("p", "s"), BUILTIN_FIELDS)
    def test_commutativity_and_identities(self, p: int, s: int) -> None:
        """Test a+b = b+a, ab = ba, a+0 = a, a*1 = a and a + (-a) = 0."""
        field = get_field(FieldSpec.of(p, s))
        a, b, _ = _triples(field.spec)

        assert np.array_equal(field.add(a, b), field.add(b, a))
        assert np.array_equal(field.mul(a, b), field.mul(b, a))
        assert np.array_equal(field.add(a, 0), a)
        assert np.array_equal(field.mul(a, 1), a)
        assert np.all(field.add(a, field.neg(a)) == 0)

    @pytest.mark.parametrize(("p", "s"), BUILTIN_FIELDS)
    def test_frobenius_closure(self, p: int, s: int) -> None:
        """Test fe_pow(a, q) = a for every element."""
        spec = FieldSpec.of(p, s)

        assert all(fe_pow(a, spec.q) == a for a in enumerate_field(spec))
