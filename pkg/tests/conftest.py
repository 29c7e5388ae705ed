"""Test configuration and fixtures."""

from collections.abc import Generator

import pytest
from fastapi.testclient import TestClient

from app.config import settings
from app.core.field import FieldSpec
from app.core.poly import FunctionTable, MultiPoly, table_of
from app.main import app
from app.services.experiment_service import ExperimentService


@pytest.fixture
def client() -> TestClient:
    """Create a test client for the FastAPI application."""
    return TestClient(app)


@pytest.fixture
def gf2() -> FieldSpec:
    """GF(2)."""
    return FieldSpec.of(2)


@pytest.fixture
def gf3() -> FieldSpec:
    """GF(3)."""
    return FieldSpec.of(3)


@pytest.fixture
def gf4() -> FieldSpec:
    """GF(4) with modulus x^2 + x + 1."""
    return FieldSpec.of(2, 2)


@pytest.fixture
def gf5() -> FieldSpec:
    """GF(5)."""
    return FieldSpec.of(5)


@pytest.fixture
def gf17() -> FieldSpec:
    """GF(17)."""
    return FieldSpec.of(17)


@pytest.fixture
def linear_gf5(gf5: FieldSpec) -> MultiPoly:
    """x1 + 2 x2 over GF(5)."""
    return MultiPoly.from_terms(gf5, 2, {(1, 0): 1, (0, 1): 2})


@pytest.fixture
def quadratic_gf17(gf17: FieldSpec) -> MultiPoly:
    """x1^2 + 3 x1 x2 + 5 x2 + 7 over GF(17)."""
    return MultiPoly.from_terms(gf17, 2, {(2, 0): 1, (1, 1): 3, (0, 1): 5, (0, 0): 7})


@pytest.fixture
def quadratic_table(quadratic_gf17: MultiPoly) -> FunctionTable:
    """Table of the GF(17) quadratic."""
    return table_of(quadratic_gf17)


@pytest.fixture
def fresh_service() -> Generator[ExperimentService, None, None]:
    """A fresh ExperimentService singleton; budgets restored afterwards."""
    ExperimentService._instance = None  # noqa: SLF001
    budget = settings.line_budget
    yield ExperimentService.get_instance()
    settings.line_budget = budget
    ExperimentService._instance = None  # noqa: SLF001
