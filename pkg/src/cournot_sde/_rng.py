"""Reproducible random streams and ordered parallel maps.

Every independent work item (a Monte-Carlo path, a sweep point) draws from its
own Philox stream keyed by ``(base_seed, item_index)``. Philox is counter
based, so streams are independent of how items are scheduled on workers.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Optional, Sequence, TypeVar

import numpy as np

from .errors import InvalidParams

THREADS_ENV = "COURNOT_SDE_THREADS"

T = TypeVar("T")
R = TypeVar("R")


def stream(seed: int, *index: int) -> np.random.Generator:
    if seed < 0 or any(i < 0 for i in index):
        raise InvalidParams("seeds and stream indices must be non-negative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, index)])))


def worker_count(workers: Optional[int] = None) -> int:
    if workers is not None:
        if workers < 1:
            raise InvalidParams("workers must be >= 1")
        return workers
    raw = os.environ.get(THREADS_ENV, "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise InvalidParams(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
        if n < 1:
            raise InvalidParams(f"{THREADS_ENV} must be >= 1")
        return n
    return os.cpu_count() or 1


def ordered_map(fn: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None) -> list[R]:
    """``list(map(fn, items))``, possibly on a thread pool; output order is input order."""
    items: Sequence[T] = list(items)
    n = worker_count(workers)
    if n == 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
