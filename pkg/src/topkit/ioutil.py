"""Atomic file writes: everything lands via temp file + rename."""
from __future__ import annotations

import os
import tempfile
from pathlib import Path


def write_atomic_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_atomic_text(path: str | Path, text: str) -> None:
    write_atomic_bytes(path, text.encode("utf-8"))
