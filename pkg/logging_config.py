"""
Logging configuration for DataLair.

Environment-specific logging setup: structured JSON lines in production,
human-readable lines elsewhere. Logs go to stderr so stdout stays free for
report records.
"""

import logging
import logging.handlers
import sys
import json
from datetime import datetime, timezone

UTC = timezone.utc
from typing import Dict, Any, Optional
from pathlib import Path

from config import Settings, Environment

CONTEXT_FIELDS = ("device", "volume", "operation", "region", "writes", "reads", "duration")


class StructuredFormatter(logging.Formatter):
    """
    Formatter that outputs structured JSON logs for production
    and human-readable logs for development.
    """

    def __init__(self, environment: Environment):
        self.environment = environment
        super().__init__()

    def format(self, record: logging.LogRecord) -> str:
        """Format log record based on environment"""
        if self.environment == Environment.PRODUCTION:
            return self._format_json(record)
        return self._format_human_readable(record)

    def _format_json(self, record: logging.LogRecord) -> str:
        """Format log record as JSON for production"""
        log_data = {
            "timestamp": datetime.now(UTC).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
            "module": record.module,
            "function": record.funcName,
            "line": record.lineno,
        }

        if record.exc_info:
            log_data["exception"] = {
                "type": record.exc_info[0].__name__ if record.exc_info[0] else None,
                "message": str(record.exc_info[1]) if record.exc_info[1] else None,
                "traceback": self.formatException(record.exc_info),
            }

        for field in CONTEXT_FIELDS:
            value = getattr(record, field, None)
            if value is not None:
                log_data[field] = value
        event_type = getattr(record, "event_type", None)
        if event_type:
            log_data["event_type"] = event_type

        return json.dumps(log_data, ensure_ascii=False, default=str)

    def _format_human_readable(self, record: logging.LogRecord) -> str:
        """Format log record for human readability in development"""
        timestamp = datetime.fromtimestamp(record.created).strftime("%Y-%m-%d %H:%M:%S")

        message = f"{timestamp} | {record.levelname:8} | {record.name:20} | {record.getMessage()}"

        context_parts = []
        for field in CONTEXT_FIELDS:
            value = getattr(record, field, None)
            if value is None:
                continue
            if field == "duration":
                context_parts.append(f"time={value:.3f}s")
            else:
                context_parts.append(f"{field}={value}")

        if context_parts:
            message += f" | {' '.join(context_parts)}"

        if record.levelno == logging.DEBUG:
            message += f" | {record.module}:{record.funcName}:{record.lineno}"

        if record.exc_info:
            message += f"\n{self.formatException(record.exc_info)}"

        return message


class DeviceContextFilter(logging.Filter):
    """Ensure device context attributes exist on every record."""

    def filter(self, record: logging.LogRecord) -> bool:
        for field in CONTEXT_FIELDS:
            if not hasattr(record, field):
                setattr(record, field, None)
        return True


def setup_logging(settings: Settings) -> None:
    """
    Set up logging configuration based on settings.

    Args:
        settings: Application settings instance
    """
    root_logger = logging.getLogger()
    root_logger.handlers.clear()
    root_logger.setLevel(getattr(logging, settings.log_level.value))

    formatter = StructuredFormatter(settings.environment)
    context_filter = DeviceContextFilter()

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)
    console_handler.addFilter(context_filter)
    root_logger.addHandler(console_handler)

    if settings.log_file:
        log_file_path = Path(settings.log_file)
        log_file_path.parent.mkdir(parents=True, exist_ok=True)

        file_handler = logging.handlers.RotatingFileHandler(
            filename=settings.log_file,
            maxBytes=settings.log_max_size,
            backupCount=settings.log_backup_count,
            encoding="utf-8",
        )
        file_handler.setFormatter(formatter)
        file_handler.addFilter(context_filter)
        root_logger.addHandler(file_handler)

    configure_logger_levels(settings)

    logger = logging.getLogger(__name__)
    logger.debug(
        f"Logging configured - Level: {settings.log_level.value}, "
        f"Environment: {settings.environment.value}, "
        f"File: {settings.log_file or 'stderr only'}"
    )


def configure_logger_levels(settings: Settings) -> None:
    """Configure package logger levels based on environment"""
    app_loggers = [
        "block_store",
        "crypto_env",
        "freemaps",
        "dl_oram",
        "datalair",
        "pdcpa",
        "bench",
        "cli",
    ]

    for logger_name in app_loggers:
        logger = logging.getLogger(logger_name)
        if settings.is_development and settings.debug:
            logger.setLevel(logging.DEBUG)
        else:
            logger.setLevel(getattr(logging, settings.log_level.value))

    # The statistics stack is chatty about numerical warnings
    logging.getLogger("numpy").setLevel(logging.WARNING)
    logging.getLogger("scipy").setLevel(logging.WARNING)


class LoggerAdapter(logging.LoggerAdapter):
    """
    Logger adapter that stamps device context on every record.
    """

    def __init__(self, logger: logging.Logger, extra: Optional[Dict[str, Any]] = None):
        super().__init__(logger, extra or {})

    def process(self, msg: str, kwargs: Dict[str, Any]) -> tuple:
        # call-specific extra wins over the adapter's context
        kwargs["extra"] = {**self.extra, **kwargs.get("extra", {})}
        return msg, kwargs

    def with_context(self, **context) -> "LoggerAdapter":
        """Create a new adapter with additional context"""
        return LoggerAdapter(self.logger, {**self.extra, **context})


def get_logger_with_context(name: str, **context) -> LoggerAdapter:
    """
    Get a logger adapter carrying device context.

    Args:
        name: Logger name
        **context: Fields from CONTEXT_FIELDS to attach to every record

    Returns:
        Logger adapter with context
    """
    return LoggerAdapter(logging.getLogger(name), context)


# Helpers for common logging patterns


def log_device_operation(
    logger: logging.Logger,
    operation: str,
    device: str,
    duration: float,
    writes: Optional[int] = None,
    reads: Optional[int] = None,
):
    """Log a completed device lifecycle or I/O operation"""
    extra = {
        "operation": operation,
        "device": device,
        "duration": duration,
        "writes": writes,
        "reads": reads,
        "event_type": "device_operation",
    }
    message = f"Device {operation}: {device} ({duration:.3f}s)"
    if writes is not None:
        message += f" - {writes} writes"
    logger.info(message, extra=extra)


def log_trace_shape(logger: logging.Logger, operation: str, shape: Dict[str, int]):
    """Log the per-region write counts of a recorded trace"""
    extra = {
        "operation": operation,
        "writes": sum(shape.values()),
        "event_type": "trace_shape",
    }
    summary = ", ".join(f"{region}={count}" for region, count in sorted(shape.items()))
    logger.debug(f"Trace {operation}: {summary}", extra=extra)


def log_error(
    logger: logging.Logger, error: Exception, context: Optional[Dict[str, Any]] = None
):
    """Log error with context"""
    extra = {
        "error_type": type(error).__name__,
        "error_message": str(error),
        "event_type": "error",
    }
    if context:
        extra.update(context)

    logger.error(
        f"Error: {type(error).__name__}: {str(error)}", extra=extra, exc_info=True
    )
