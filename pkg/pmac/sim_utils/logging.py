"""
Structured logging and CLI error handling.

Uses loguru for JSON event logs with rotation. Includes a log-once helper
so Monte-Carlo loops do not flood the log with one identical failure per
trial.
"""
import sys
import threading
import time
from functools import wraps
from pathlib import Path
from typing import Callable

import msgspec
from loguru import logger

from pmac.config import ExitCode, LOG_FILE
from pmac.errors import CapExceededError, PmacError, SolverError


# =============================================================================
# Sink configuration
# =============================================================================

# The library stays silent until a caller opts in.
logger.remove()

_configured_sinks: dict[str, int] = {}
_config_lock = threading.Lock()


def configure_logging(log_file: Path | None = None, verbose: bool = False,
                      stderr: bool = True) -> None:
    """Install the JSON file sink and, optionally, a stderr sink.

    Safe to call repeatedly; each sink is installed once.

    Args:
        log_file: Destination of the JSON event log (default: LOG_FILE)
        verbose: Emit DEBUG events on stderr instead of WARNING and above
        stderr: Install the stderr sink at all
    """
    path = Path(log_file) if log_file is not None else LOG_FILE
    with _config_lock:
        key = f"file:{path}"
        if key not in _configured_sinks:
            path.parent.mkdir(parents=True, exist_ok=True)
            _configured_sinks[key] = logger.add(
                path,
                format="{message}",
                serialize=True,
                rotation="10 MB",
                retention=3,
                compression="gz",
                enqueue=True,
                catch=True,
            )
        if stderr and "stderr" not in _configured_sinks:
            _configured_sinks["stderr"] = logger.add(
                sys.stderr,
                level="DEBUG" if verbose else "WARNING",
                format="<level>{level: <8}</level> {extra[component]} | {message}",
                catch=True,
            )


def reset_logging() -> None:
    """Remove every sink installed by configure_logging."""
    with _config_lock:
        for sink_id in _configured_sinks.values():
            try:
                logger.remove(sink_id)
            except ValueError:
                pass
        _configured_sinks.clear()


def log_event(component: str, event_type: str, data: dict | None = None, level: str = "info"):
    """
    Log a structured event.

    Args:
        component: Emitting module (e.g., "pa_solver")
        event_type: Event name (e.g., "not_converged")
        data: Additional key/value context
        level: Log level (debug, info, warning, error)
    """
    try:
        log_func = getattr(logger, level, logger.info)
        log_func(event_type, component=component, **(data or {}))
    except Exception:
        pass  # Never raise


# =============================================================================
# Log-Once Pattern - Suppress duplicate events within a time window
# =============================================================================

class LogOnce:
    """Rate-limited logging that suppresses duplicates within a time window.

    Usage:
        _log_once = LogOnce(period_sec=60)

        try:
            ...
        except SolverError as e:
            _log_once.error("experiments", "trial_error", str(e))
    """

    def __init__(self, period_sec: float = 300):
        self.period_sec = period_sec
        self._cache: dict[tuple, tuple[float, int]] = {}  # key -> (first_seen, count)
        self._lock = threading.Lock()

    def _should_log(self, key: tuple) -> tuple[bool, int]:
        """Check if this message should be logged.

        Returns:
            (should_log, suppressed_count)
        """
        now = time.monotonic()
        with self._lock:
            if key in self._cache:
                first_seen, count = self._cache[key]
                if now - first_seen < self.period_sec:
                    self._cache[key] = (first_seen, count + 1)
                    return False, 0
                self._cache[key] = (now, 1)
                return True, count - 1
            self._cache[key] = (now, 1)
            return True, 0

    def _emit(self, level: str, component: str, event_type: str, message: str, extra: dict):
        should_log, suppressed = self._should_log((component, event_type, message))
        if should_log:
            data = {"msg": message, **extra}
            if suppressed > 0:
                data["suppressed"] = suppressed
            log_event(component, event_type, data, level)

    def error(self, component: str, event_type: str, message: str, **extra):
        """Log an error, suppressing duplicates within the time window."""
        self._emit("error", component, event_type, message, extra)

    def warning(self, component: str, event_type: str, message: str, **extra):
        """Log a warning, suppressing duplicates within the time window."""
        self._emit("warning", component, event_type, message, extra)


# =============================================================================
# CLI wrapper
# =============================================================================

def exit_code_for(exc: BaseException) -> ExitCode:
    """Map an exception to the CLI exit status."""
    if isinstance(exc, CapExceededError):
        return ExitCode.CAP_EXCEEDED
    if isinstance(exc, SolverError):
        return ExitCode.NOT_CONVERGED
    return ExitCode.USAGE


def graceful_cli(component: str):
    """
    Decorator for CLI subcommand handlers.

    The handler returns an ExitCode (or None for success). Package errors are
    logged and translated to their exit code instead of a traceback.

    Usage:
        @graceful_cli("solve-pa")
        def cmd_solve_pa(args) -> ExitCode:
            ...
    """
    def decorator(func: Callable[..., ExitCode | int | None]):
        @wraps(func)
        def wrapper(*args, **kwargs) -> int:
            try:
                result = func(*args, **kwargs)
                return int(ExitCode.OK if result is None else result)
            except (PmacError, OSError, msgspec.DecodeError) as e:
                code = exit_code_for(e)
                log_event(component, "cli.error",
                          {"type": type(e).__name__, "msg": str(e), "exit_code": int(code)}, "error")
                print(f"error: {e}", file=sys.stderr)
                return int(code)
        return wrapper
    return decorator
