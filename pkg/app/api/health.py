"""API endpoints for health checks."""

import logging

from fastapi import APIRouter, status

from app.config import get_app_config, settings
from app.schemas.health import HealthResponse

logger = logging.getLogger(__name__)

router = APIRouter()


@router.get(
    "/health",
    status_code=status.HTTP_200_OK,
    summary="Health check",
    description="Check the health of the application and report its enumeration budgets",
)
async def health_check() -> HealthResponse:
    """Health check endpoint.

    Returns the current status, version and budgets.
    """
    return HealthResponse(
        status="healthy",
        version=settings.application_version,
        budgets=get_app_config(),
    )
