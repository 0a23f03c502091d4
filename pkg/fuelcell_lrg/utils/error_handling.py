"""Error handling utilities for the fuel cell LRG package."""

import logging
from functools import wraps
from typing import Any, Callable, Dict, Optional

import pydantic
from pydantic import BaseModel


logger = logging.getLogger(__name__)


class FuelCellControlError(Exception):
    """Base exception for modelling, control and simulation operations."""

    def __init__(
        self,
        message: str,
        error_code: str = "CONTROL_ERROR",
        details: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(message)
        self.message = message
        self.error_code = error_code
        self.details = details or {}


class ConfigurationError(FuelCellControlError):
    """Invalid scenario, gains or tunables."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, "CONFIGURATION_ERROR", details)


class InfeasibleStartError(ConfigurationError):
    """The governor has no admissible reference at the initial state."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, details)
        self.error_code = "INFEASIBLE_START"


class DomainError(FuelCellControlError):
    """Arguments outside the domain of a model formula."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, "DOMAIN_ERROR", details)


class InvariantViolationError(FuelCellControlError):
    """An operation would break an invariant of its result."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, "INVARIANT_VIOLATION", details)


class NumericalError(FuelCellControlError):
    """Non-finite values or diverging trajectories."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, "NUMERICAL_ERROR", details)


class OutputError(FuelCellControlError):
    """Run artifacts could not be written."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, "OUTPUT_ERROR", details)


class ErrorResponse(BaseModel):
    """Standardized error response format."""

    success: bool = False
    error_code: str
    message: str
    details: Dict[str, Any] = {}


def _validation_summary(error: pydantic.ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(part) for part in item.get("loc", ()))
        text = item.get("msg", "invalid value")
        parts.append(f"{location}: {text}" if location else text)
    return "; ".join(parts)


def handle_model_errors(func: Callable) -> Callable:
    """Decorator converting library and arithmetic errors into our hierarchy."""

    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except FuelCellControlError:
            raise
        except pydantic.ValidationError as e:
            raise ConfigurationError(
                f"Invalid configuration: {_validation_summary(e)}",
                {"errors": e.errors(include_url=False, include_context=False, include_input=False)},
            )
        except ZeroDivisionError as e:
            raise DomainError(f"Division by zero in {func.__name__}: {str(e)}")
        except (FloatingPointError, OverflowError) as e:
            logger.error(f"Numerical failure in {func.__name__}: {str(e)}")
            raise NumericalError(f"Numerical failure in {func.__name__}: {str(e)}")

    return wrapper


def format_error_response(error: FuelCellControlError) -> Dict[str, Any]:
    """Format error as standardized response."""

    return ErrorResponse(
        error_code=error.error_code, message=error.message, details=error.details
    ).model_dump()


def format_success_response(data: Any, message: str = "Operation successful") -> Dict[str, Any]:
    """Format success response."""

    return {
        "success": True,
        "message": message,
        "data": data
    }
