"""API endpoints for running experiments."""

import logging
from typing import Annotated, NoReturn

from fastapi import APIRouter, File, Form, HTTPException, UploadFile, status

from app.exceptions import BudgetExceededError, InvariantViolationError, LowDegreeError
from app.schemas.run import CommandInfo, RunConfig, RunResponse
from app.services.experiment_service import ExperimentService, ensure_holds

logger = logging.getLogger(__name__)

router = APIRouter()


def _raise_for(e: LowDegreeError) -> NoReturn:
    if isinstance(e, BudgetExceededError):
        logger.warning(f"Budget exceeded: {e}")
        raise HTTPException(
            status_code=status.HTTP_413_REQUEST_ENTITY_TOO_LARGE,
            detail={
                "error": "Budget exceeded",
                "message": str(e),
                "requested": e.requested,
                "budget": e.budget,
            },
        ) from e
    logger.warning(f"Rejected run: {e}")
    raise HTTPException(
        status_code=status.HTTP_400_BAD_REQUEST,
        detail={"error": type(e).__name__, "message": str(e)},
    ) from e


def _checked(response: RunResponse) -> RunResponse:
    try:
        return ensure_holds(response)
    except InvariantViolationError as e:
        logger.warning(f"Guaranteed property failed: {e}")
        raise HTTPException(
            status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            detail={
                "error": "Guaranteed property failed",
                "message": str(e),
                "violations": response.violations,
                "response": response.model_dump(mode="json"),
            },
        ) from e


@router.post(
    "/run",
    status_code=status.HTTP_200_OK,
    summary="Run an experiment",
    description="Validates the configuration, runs the command and returns its report",
)
async def run_experiment(config: RunConfig) -> RunResponse:
    """Run one experiment.

    - **command**: One of the names listed by ``GET /commands``
    - **p**, **s**, **m**, **d**: Field, arity and degree bound
    Returns the report with the configuration echoed.
    """
    logger.info(f"Received run request: command={config.command}, seed={config.seed}")
    try:
        response = await ExperimentService.get_instance().run_async(config)
    except LowDegreeError as e:
        _raise_for(e)
    except ValueError as e:
        logger.warning(f"Invalid run configuration: {e}")
        raise HTTPException(
            status_code=status.HTTP_400_BAD_REQUEST,
            detail={"error": "Invalid configuration", "message": str(e)},
        ) from e
    except Exception as e:
        logger.exception("Unexpected error in run_experiment")
        raise HTTPException(
            status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
            detail=f"Internal server error: {e!s}",
        ) from e
    return _checked(response)


@router.get(
    "/commands",
    status_code=status.HTTP_200_OK,
    summary="List commands",
    description="Every experiment the service can run",
)
async def list_commands() -> list[CommandInfo]:
    """List the available commands."""
    return ExperimentService.get_instance().commands()


@router.post(
    "/tables/check",
    status_code=status.HTTP_200_OK,
    summary="Check an uploaded table",
    description="Exact line test and total degree of a FunctionTable file",
)
async def check_table(
    file: Annotated[UploadFile, File(description="FunctionTable in its text format")],
    d: Annotated[int, Form(ge=0, description="Degree bound")],
) -> RunResponse:
    """Characterization check of an uploaded table."""
    try:
        text = (await file.read()).decode("utf-8")
        service = ExperimentService.get_instance()
        response = await service.run_async(service.table_check_config(text, d))
    except LowDegreeError as e:
        _raise_for(e)
    except ValueError as e:
        logger.warning(f"Unreadable table upload: {e}")
        raise HTTPException(
            status_code=status.HTTP_400_BAD_REQUEST,
            detail={"error": "Invalid table", "message": str(e)},
        ) from e
    return _checked(response)
