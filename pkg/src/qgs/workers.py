"""Worker-count policy shared by the batch evaluators."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

__all__ = ["thread_count", "map_chunks"]


def thread_count() -> int:
    raw = os.environ.get("QGS_THREADS", "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return max(1, min(8, os.cpu_count() or 1))


def map_chunks(fn, items, min_chunk: int = 256):
    """Apply ``fn`` to contiguous slices of ``items`` and concatenate the list results.

    Runs in a thread pool capped by ``QGS_THREADS``; numpy releases the GIL
    in the heavy kernels so threads give real speedup on large batches.
    """
    n = len(items)
    workers = min(thread_count(), max(1, n // min_chunk))
    if workers <= 1:
        return [fn(items)]
    bounds = [round(i * n / workers) for i in range(workers + 1)]
    parts = [items[lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:])]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, parts))
