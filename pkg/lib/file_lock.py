"""Locked, atomic file output and cached JSON reads.

Writers take an exclusive fcntl.flock on a sidecar lock file and replace the
target atomically (tmp + os.replace), so a reader never sees a half-written
model or result. read_json() caches parsed documents by mtime.
"""

import copy
import fcntl
import json
import logging
import os
import threading
from contextlib import contextmanager
from pathlib import Path

log = logging.getLogger(__name__)

# {path_str: (mtime_ns, data)}
_READ_CACHE_MAX = 32
_read_cache: dict[str, tuple[int, object]] = {}
_cache_lock = threading.Lock()


@contextmanager
def exclusive(path: Path):
    """Hold an exclusive lock on `<path>.lock` for the duration of the block."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd = os.open(str(path) + ".lock", os.O_RDWR | os.O_CREAT)
    try:
        fcntl.flock(fd, fcntl.LOCK_EX)
        yield
    finally:
        fcntl.flock(fd, fcntl.LOCK_UN)
        os.close(fd)


def write_text(path: Path, text: str):
    """Write text atomically under an exclusive lock."""
    path = Path(path)
    with exclusive(path):
        tmp = str(path) + ".tmp"
        with open(tmp, "w", encoding="utf-8") as f:
            f.write(text)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, str(path))
        with _cache_lock:
            _read_cache.pop(str(path), None)
    log.debug(f"Wrote {path}")


def write_json(path: Path, data):
    write_text(path, json.dumps(data, indent=2, sort_keys=False) + "\n")


def read_json(path: Path, default_factory=None):
    """Parsed JSON document (deep copy of the cached value).

    A missing file returns default_factory() when given; otherwise the
    FileNotFoundError propagates. Corrupt JSON raises json.JSONDecodeError.
    """
    path = Path(path)
    try:
        mtime = path.stat().st_mtime_ns
    except FileNotFoundError:
        if default_factory is None:
            raise
        return default_factory()

    key = str(path)
    with _cache_lock:
        cached = _read_cache.get(key)
    if cached and cached[0] == mtime:
        return copy.deepcopy(cached[1])

    with open(path, "r", encoding="utf-8") as f:
        fcntl.flock(f, fcntl.LOCK_SH)
        try:
            data = json.load(f)
        finally:
            fcntl.flock(f, fcntl.LOCK_UN)

    with _cache_lock:
        if len(_read_cache) >= _READ_CACHE_MAX:
            _read_cache.clear()
        _read_cache[key] = (mtime, data)
    return copy.deepcopy(data)
