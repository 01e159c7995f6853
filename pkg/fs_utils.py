"""Filesystem helpers: atomic output, input digests and temp-file cleanup."""
from pathlib import Path
import hashlib
import logging
import os
import tempfile
import time

from errors import DataError

logger = logging.getLogger(__name__)


def safe_unlink(path: Path, retries: int = 3, delay: float = 0.1) -> bool:
    """Attempt to unlink a path with retries to handle transient filesystem locks."""
    try:
        path.unlink()
        logger.debug("Deleted file: %s", path)
        return True
    except FileNotFoundError:
        return True
    except OSError as initial_err:
        logger.warning("Initial unlink failed for %s: %s", path, initial_err)
        for i in range(retries):
            try:
                time.sleep(delay)
                path.unlink()
                logger.debug("Deleted file after retry %d: %s", i + 1, path)
                return True
            except OSError as err:
                logger.warning("Retry %d failed for %s: %s", i + 1, path, err)
        logger.warning(
            "Failed to delete %s after %d retries; leaving it behind",
            path,
            retries)
        return False


def atomic_write_text(path: Path, text: str) -> Path:
    """Write `text` to `path` through a sibling temp file and a rename.

    Readers never observe a half-written output; on failure the temp file is
    removed and the previous content of `path` (if any) is untouched.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix='.tmp', dir=path.parent)
    tmp_path = Path(tmp_name)
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp_path, path)
    except BaseException:
        safe_unlink(tmp_path)
        raise
    logger.info("Wrote %s", path)
    return path


def file_digest(path: Path) -> str:
    """sha256 hex digest of a file's bytes."""
    h = hashlib.sha256()
    with open(path, 'rb') as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b''):
            h.update(chunk)
    return h.hexdigest()


def require_file(path: Path, what: str = 'input') -> Path:
    """Return `path` if it is a readable file, otherwise raise a DataError."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{what} file not found: {path}")
    return path


def cleanup_stale_temp_files(directory: Path, max_age_seconds: int = 86400) -> int:
    """Remove leftover `.*.tmp` files from interrupted atomic writes."""
    removed = 0
    current_time = time.time()
    for file_path in Path(directory).glob('.*.tmp'):
        if not file_path.is_file():
            continue
        if current_time - file_path.stat().st_mtime > max_age_seconds:
            if safe_unlink(file_path):
                removed += 1
                logger.info("Cleaned up stale temp file: %s", file_path)
    return removed
