"""
Custom exception classes for DataLair
Each error carries a stable error code and the CLI exit code it maps to
"""

from typing import Optional, Dict, Any

EXIT_USAGE = 2
EXIT_AUTH = 3
EXIT_FULL = 4
EXIT_CORRUPT = 5


class DataLairError(Exception):
    """Base exception class for DataLair"""

    def __init__(
        self,
        message: str,
        error_code: str,
        exit_code: int = EXIT_CORRUPT,
        details: Optional[Dict[str, Any]] = None,
    ):
        self.message = message
        self.error_code = error_code
        self.exit_code = exit_code
        self.details = details or {}
        super().__init__(self.message)


# --- Usage errors (exit 2) ---


class ValidationError(DataLairError):
    """Raised when an argument fails validation"""

    def __init__(
        self,
        message: str = "Argument validation failed",
        field_errors: Optional[Dict[str, str]] = None,
        details: Optional[Dict[str, Any]] = None,
    ):
        if field_errors:
            details = details or {}
            details["field_errors"] = field_errors

        super().__init__(
            message=message,
            error_code="VALIDATION_ERROR",
            exit_code=EXIT_USAGE,
            details=details,
        )


class BlockRangeError(DataLairError):
    """Raised when a physical block index lies outside the device"""

    def __init__(self, index: int, total: int, details: Optional[Dict[str, Any]] = None):
        details = details or {}
        details.update({"index": index, "total_blocks": total})
        super().__init__(
            message=f"Block index {index} outside device of {total} blocks",
            error_code="BLOCK_RANGE_ERROR",
            exit_code=EXIT_USAGE,
            details=details,
        )


class TraceStateError(DataLairError):
    """Raised on nested begin_trace or end_trace without begin"""

    def __init__(self, message: str = "Invalid trace state"):
        super().__init__(
            message=message, error_code="TRACE_STATE_ERROR", exit_code=EXIT_USAGE
        )


class IllegalPatternError(DataLairError):
    """Raised when a PD-CPA pattern pair breaks the game rules"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=message,
            error_code="ILLEGAL_PATTERN",
            exit_code=EXIT_USAGE,
            details=details,
        )


class InsufficientSamplesError(DataLairError):
    """Raised when a statistical test has too few observations"""

    def __init__(self, samples: int, required: int):
        super().__init__(
            message=f"Need at least {required} samples, got {samples}",
            error_code="INSUFFICIENT_SAMPLES",
            exit_code=EXIT_USAGE,
            details={"samples": samples, "required": required},
        )


# --- Authentication (exit 3) ---


class AuthenticationError(DataLairError):
    """Raised when the public password does not open the device"""

    def __init__(
        self,
        message: str = "Password does not open this device",
        details: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(
            message=message,
            error_code="AUTHENTICATION_ERROR",
            exit_code=EXIT_AUTH,
            details=details,
        )


# --- Capacity errors (exit 4) ---


class DiskFullError(DataLairError):
    """Raised when the public volume has no room for another block"""

    def __init__(self, capacity: int):
        super().__init__(
            message="Public volume is full",
            error_code="DISK_FULL",
            exit_code=EXIT_FULL,
            details={"capacity": capacity},
        )


class StashOverflowError(DataLairError):
    """Raised when the stash exceeds its capacity"""

    def __init__(self, size: int, capacity: int):
        super().__init__(
            message=f"Stash holds {size} entries, capacity is {capacity}",
            error_code="STASH_OVERFLOW",
            exit_code=EXIT_FULL,
            details={"size": size, "capacity": capacity},
        )


class HiddenQueueFullError(DataLairError):
    """Raised when too many hidden writes are pending"""

    def __init__(self, capacity: int):
        super().__init__(
            message="Too many pending writes",
            error_code="HIDDEN_QUEUE_FULL",
            exit_code=EXIT_FULL,
            details={"capacity": capacity},
        )


# --- Device state errors (exit 5) ---


class GeometryMismatchError(DataLairError):
    """Raised when an existing file disagrees with the requested geometry"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=message, error_code="GEOMETRY_MISMATCH", details=details
        )


class CorruptDeviceError(DataLairError):
    """Raised when an on-disk structure cannot be decoded"""

    def __init__(
        self,
        message: str = "Device structure is corrupt",
        structure: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None,
    ):
        if structure:
            details = details or {}
            details["structure"] = structure
        super().__init__(message=message, error_code="CORRUPT_DEVICE", details=details)


class UnmappedBlockError(DataLairError):
    """Raised when a block is not readable.

    The message never says which volume was asked, so a locked hidden volume
    and a missing one answer identically.
    """

    def __init__(self, block_id: int):
        super().__init__(
            message="Block not readable",
            error_code="BLOCK_NOT_READABLE",
            details={"block_id": block_id},
        )


class EmptyMatrixError(DataLairError):
    """Raised when selecting from a free-block matrix with no valid entries"""

    def __init__(self, structure: str = "fbm"):
        super().__init__(
            message="No valid entries to select from",
            error_code="EMPTY_MATRIX",
            details={"structure": structure},
        )


class StaleReceiptError(DataLairError):
    """Raised when a selection receipt is used after it was resolved"""

    def __init__(self, slot: int):
        super().__init__(
            message=f"Receipt for slot {slot} is no longer outstanding",
            error_code="STALE_RECEIPT",
            details={"slot": slot},
        )


class DoubleFreeError(DataLairError):
    """Raised when an already-free N-FBM slot is freed again"""

    def __init__(self, slot: int):
        super().__init__(
            message=f"Slot {slot} is already free",
            error_code="DOUBLE_FREE",
            details={"slot": slot},
        )


class InvariantViolationError(DataLairError):
    """Raised when a structural invariant does not hold"""

    def __init__(self, invariant: str, details: Optional[Dict[str, Any]] = None):
        details = details or {}
        details["invariant"] = invariant
        super().__init__(
            message=f"Invariant violated: {invariant}",
            error_code="INVARIANT_VIOLATION",
            details=details,
        )


class StorageIOError(DataLairError):
    """Raised when the backing file cannot be read or written"""

    def __init__(self, message: str = "Storage I/O failed", operation: Optional[str] = None):
        if operation:
            message = f"Storage {operation} failed"
        super().__init__(message=message, error_code="STORAGE_IO_ERROR")
