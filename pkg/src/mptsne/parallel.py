"""Row-partitioned worker pool for bulk ciphertext operations.

Matrices split by row ranges; workers share nothing mutable and the
caller reassembles outputs in order.  Serial fallback keeps a single
code path when workers <= 1 (the default everywhere except the bench).
"""

from __future__ import annotations

import multiprocessing
from typing import Callable, Iterable, Sequence

_step_context: dict = {}


def map_rows(fn: Callable, rows: Sequence, workers: int = 1, chunksize: int | None = None):
    """Apply fn to each row, fanning out across processes when asked."""
    rows = list(rows)
    if workers <= 1 or len(rows) < 2 * workers:
        return [fn(row) for row in rows]
    if chunksize is None:
        chunksize = max(1, len(rows) // (workers * 4))
    with multiprocessing.Pool(workers) as pool:
        return pool.map(fn, rows, chunksize=chunksize)


def map_with_context(fn: Callable, items: Iterable, context: dict, workers: int = 1,
                     chunksize: int | None = None):
    """Like map_rows but with a read-only context shipped once per worker.

    The context lands in module globals via the pool initializer, so big
    shared inputs (ciphertext matrices, noise tables) are not re-pickled
    for every item.
    """
    items = list(items)
    if workers <= 1 or len(items) < 2 * workers:
        _step_context.update(context)
        try:
            return [fn(item) for item in items]
        finally:
            _step_context.clear()
    if chunksize is None:
        chunksize = max(1, len(items) // (workers * 4))
    with multiprocessing.Pool(workers, initializer=_set_context,
                              initargs=(context,)) as pool:
        return pool.map(fn, items, chunksize=chunksize)


def _set_context(context: dict) -> None:
    _step_context.update(context)


def get_context() -> dict:
    return _step_context
