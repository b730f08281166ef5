"""
Shared utilities for pmac.

Re-exports everything from the submodules for convenient imports:
    from pmac.sim_utils import log_event, write_table, TrialCache
"""

# Logging
from .logging import (
    LogOnce,
    configure_logging,
    exit_code_for,
    graceful_cli,
    log_event,
    reset_logging,
)

# I/O
from .io import (
    PathLike,
    atomic_write_bytes,
    atomic_write_json,
    file_lock,
    render_table,
    stable_hash,
    write_table,
)

# Cache
from .cache import (
    TrialCache,
    cached_call,
    create_lru_cache,
)

__all__ = [
    # Logging
    "LogOnce",
    "configure_logging",
    "exit_code_for",
    "graceful_cli",
    "log_event",
    "reset_logging",
    # I/O
    "PathLike",
    "atomic_write_bytes",
    "atomic_write_json",
    "file_lock",
    "render_table",
    "stable_hash",
    "write_table",
    # Cache
    "TrialCache",
    "cached_call",
    "create_lru_cache",
]
