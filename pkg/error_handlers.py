"""
Exception handlers for the DataLair command line.

Each handler logs the failure, writes one ErrorRecord JSON line to stderr and
returns the process exit code.
"""

import logging
import sys
from datetime import datetime, timezone

UTC = timezone.utc
from typing import Callable, List, Optional, TextIO, Tuple, Type

from pydantic import ValidationError as PydanticValidationError

from exceptions import (
    EXIT_CORRUPT,
    EXIT_USAGE,
    AuthenticationError,
    CorruptDeviceError,
    DataLairError,
    DiskFullError,
    GeometryMismatchError,
    HiddenQueueFullError,
    InvariantViolationError,
    StashOverflowError,
    UnmappedBlockError,
    ValidationError,
)
from logging_config import log_error
from models.reports import ErrorRecord

logger = logging.getLogger(__name__)

EXIT_UNEXPECTED = 1


def _emit(record: ErrorRecord, stream: Optional[TextIO]) -> None:
    stream = stream or sys.stderr
    stream.write(record.model_dump_json() + "\n")
    stream.flush()


def _record(exc: DataLairError) -> ErrorRecord:
    return ErrorRecord(
        error_code=exc.error_code,
        message=exc.message,
        details=exc.details or None,
        timestamp=datetime.now(UTC),
    )


def datalair_exception_handler(exc: DataLairError, stream: Optional[TextIO] = None) -> int:
    """Any DataLair error without a more specific handler"""
    logger.warning(
        f"DataLair error: {exc.error_code} - {exc.message}",
        extra={"error_code": exc.error_code, "details": exc.details},
    )
    _emit(_record(exc), stream)
    return exc.exit_code


def authentication_exception_handler(
    exc: AuthenticationError, stream: Optional[TextIO] = None
) -> int:
    # no details: the failure must not say which check rejected the password
    logger.warning(f"Authentication error: {exc.message}")
    _emit(
        ErrorRecord(error_code=exc.error_code, message=exc.message, timestamp=datetime.now(UTC)),
        stream,
    )
    return exc.exit_code


def validation_exception_handler(exc: ValidationError, stream: Optional[TextIO] = None) -> int:
    logger.warning(
        f"Validation error: {exc.message}",
        extra={"validation_errors": exc.details},
    )
    _emit(_record(exc), stream)
    return exc.exit_code


def pydantic_validation_exception_handler(
    exc: PydanticValidationError, stream: Optional[TextIO] = None
) -> int:
    errors = exc.errors(include_url=False, include_context=False)
    logger.warning("Data validation failed", extra={"validation_errors": errors})
    _emit(
        ErrorRecord(
            error_code="VALIDATION_ERROR",
            message="Data validation failed",
            details={"validation_errors": errors},
            timestamp=datetime.now(UTC),
        ),
        stream,
    )
    return EXIT_USAGE


def capacity_exception_handler(
    exc: DataLairError, stream: Optional[TextIO] = None
) -> int:
    """Public volume full, stash overflow or hidden queue full"""
    logger.warning(
        f"Capacity exhausted: {exc.message}",
        extra={"error_code": exc.error_code, "details": exc.details},
    )
    _emit(_record(exc), stream)
    return exc.exit_code


def unreadable_block_exception_handler(
    exc: UnmappedBlockError, stream: Optional[TextIO] = None
) -> int:
    # identical for unmapped public ids and for hidden I/O without a hidden volume
    logger.info(f"Block not readable: {exc.message}")
    _emit(_record(exc), stream)
    return exc.exit_code


def corruption_exception_handler(exc: DataLairError, stream: Optional[TextIO] = None) -> int:
    """Undecodable structures, geometry mismatches and broken invariants"""
    logger.error(
        f"Device corrupt: {exc.message}",
        extra={"error_code": exc.error_code, "details": exc.details},
    )
    _emit(_record(exc), stream)
    return exc.exit_code


def os_exception_handler(exc: OSError, stream: Optional[TextIO] = None) -> int:
    logger.error(
        f"Storage error: {exc}",
        extra={"exception_type": type(exc).__name__},
        exc_info=True,
    )
    _emit(
        ErrorRecord(
            error_code="STORAGE_IO_ERROR",
            message=exc.strerror or str(exc),
            details={"filename": exc.filename} if exc.filename else None,
            timestamp=datetime.now(UTC),
        ),
        stream,
    )
    return EXIT_CORRUPT


def general_exception_handler(exc: Exception, stream: Optional[TextIO] = None) -> int:
    log_error(logger, exc, {"operation": "cli"})
    _emit(
        ErrorRecord(
            error_code="INTERNAL_ERROR",
            message="An unexpected error occurred",
            timestamp=datetime.now(UTC),
        ),
        stream,
    )
    return EXIT_UNEXPECTED


Handler = Callable[..., int]

# most specific first; the first isinstance match wins
EXCEPTION_HANDLERS: List[Tuple[Type[BaseException], Handler]] = [
    (AuthenticationError, authentication_exception_handler),
    (ValidationError, validation_exception_handler),
    (PydanticValidationError, pydantic_validation_exception_handler),
    (DiskFullError, capacity_exception_handler),
    (StashOverflowError, capacity_exception_handler),
    (HiddenQueueFullError, capacity_exception_handler),
    (UnmappedBlockError, unreadable_block_exception_handler),
    (CorruptDeviceError, corruption_exception_handler),
    (GeometryMismatchError, corruption_exception_handler),
    (InvariantViolationError, corruption_exception_handler),
    (DataLairError, datalair_exception_handler),
    (OSError, os_exception_handler),
    (Exception, general_exception_handler),
]


def handle_exception(exc: Exception, stream: Optional[TextIO] = None) -> int:
    """Dispatch ``exc`` to its handler and return the exit code"""
    for exc_type, handler in EXCEPTION_HANDLERS:
        if isinstance(exc, exc_type):
            return handler(exc, stream)
    return general_exception_handler(exc, stream)
