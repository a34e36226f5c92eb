"""Worker-pool helper honoring the ADQ_THREADS cap.

Results are always gathered in input order and every task is a pure function
of its argument, so the worker count can never change the output.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, TypeVar

from .errors import ConfigError

T = TypeVar("T")
R = TypeVar("R")


def thread_count() -> int:
    """Worker cap: ADQ_THREADS when set, else the machine's CPU count."""
    raw = os.environ.get("ADQ_THREADS", "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ConfigError(f"ADQ_THREADS must be an integer, got {raw!r}") from None
        if n < 1:
            raise ConfigError(f"ADQ_THREADS must be >= 1, got {n}")
        return n
    return os.cpu_count() or 1


def parallel_map(fn: Callable[[T], R], items: Iterable[T]) -> List[R]:
    """Map ``fn`` over ``items`` with at most ``thread_count()`` workers."""
    work = list(items)
    workers = min(thread_count(), len(work))
    if workers <= 1:
        return [fn(x) for x in work]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, work))
