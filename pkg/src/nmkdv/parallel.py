"""Worker-count plumbing for the FFT-heavy inner loops.

The only environment override honoured anywhere in the package is
``NMKDV_THREADS``; the CLI ``--threads`` flag routes through
:func:`set_workers` so repeated runs stay reproducible.
"""
from __future__ import annotations

import os

_workers: int | None = None


def get_workers() -> int:
    if _workers is not None:
        return _workers
    env = os.environ.get("NMKDV_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def set_workers(n: int | None) -> None:
    global _workers
    _workers = None if n is None else max(1, int(n))
