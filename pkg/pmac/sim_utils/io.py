"""
File I/O utilities with locking and atomic replacement.

Includes:
- File locking (file_lock)
- JSON output (atomic_write_json)
- Result tables (write_table)
- Stable fingerprints (stable_hash)
"""
import hashlib
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Literal

import msgspec
import pandas as pd
from filelock import FileLock

from pmac.config import Experiments, fast_json_dumps
from pmac.errors import StructuralError

PathLike = str | Path
TableFormat = Literal["csv", "json"]


# =============================================================================
# Hashing Utilities
# =============================================================================

def stable_hash(data: bytes | str, length: int = 16) -> str:
    """Stable MD5 fingerprint, truncated to `length` hex characters.

    Used for experiment cache keys.
    """
    if isinstance(data, str):
        data = data.encode()
    return hashlib.md5(data).hexdigest()[:length]


# =============================================================================
# Locking and atomic writes
# =============================================================================

@contextmanager
def file_lock(path: PathLike, timeout: float = 10.0):
    """
    Context manager for an exclusive lock on `path`.

    The lock lives in a sibling `<path>.lock` file.

    Usage:
        with file_lock(out_path):
            atomic_write_bytes(out_path, payload)
    """
    lock = FileLock(f"{Path(path)}.lock", timeout=timeout)
    with lock:
        yield


def atomic_write_bytes(path: PathLike, payload: bytes) -> None:
    """Write `payload` via temp file + rename so readers never see a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, temp_path = tempfile.mkstemp(dir=path.parent, prefix=f".{path.stem}_", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(temp_path, path)
    except BaseException:
        try:
            os.unlink(temp_path)
        except OSError:
            pass
        raise


def atomic_write_json(path: PathLike, data) -> None:
    """Encode `data` (dicts, lists or msgspec Structs) and write it atomically under a lock."""
    payload = msgspec.json.format(fast_json_dumps(data), indent=2)
    with file_lock(path):
        atomic_write_bytes(path, payload)


# =============================================================================
# Result tables
# =============================================================================

def render_table(df: pd.DataFrame, fmt: TableFormat = "csv") -> bytes:
    """Render a result table with fixed float formatting.

    Identical frames always render to identical bytes.
    """
    if fmt == "csv":
        return df.to_csv(index=False, float_format=Experiments.float_format,
                         lineterminator="\n").encode()
    if fmt == "json":
        return df.to_json(orient="records", double_precision=15, indent=2).encode()
    raise StructuralError(f"unknown table format: {fmt!r}")


def write_table(df: pd.DataFrame, path: PathLike, fmt: TableFormat = "csv") -> Path:
    """Write a result table atomically under a file lock.

    Args:
        df: Table to write (column order is preserved)
        path: Destination file
        fmt: "csv" or "json"

    Returns:
        The destination path
    """
    path = Path(path)
    payload = render_table(df, fmt)
    with file_lock(path):
        atomic_write_bytes(path, payload)
    return path
