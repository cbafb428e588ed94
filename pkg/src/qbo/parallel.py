"""Thread-count policy shared by the ensemble sampler and sweep runner.

Parallelism never changes results anywhere in this package; it only caps
how many worker threads may run.  QBO_THREADS overrides the machine core
count when set to a positive integer.
"""

from __future__ import annotations

import os

from .model import ModelError

__all__ = ["thread_count"]


def thread_count() -> int:
    raw = os.environ.get("QBO_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ModelError(f"QBO_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ModelError(f"QBO_THREADS must be a positive integer, got {raw!r}")
    return n
