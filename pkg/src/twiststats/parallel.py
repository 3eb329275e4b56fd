"""Deterministic chunked execution.

Chunk boundaries depend only on the range and ``CHUNK``, never on the
worker count, and results come back in chunk order. Combined with
per-chunk ``math.fsum`` this makes scans bit-identical for any number of
workers.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor

CHUNK = 1 << 16


def chunk_ranges(X1, X2, chunk=CHUNK):
    """Half-open |d| ranges (lo, hi] covering (X1, X2] on a fixed grid."""
    lo = int(math.floor(X1))
    hi = int(math.floor(X2))
    out = []
    start = lo
    while start < hi:
        stop = min((start // chunk + 1) * chunk, hi)
        out.append((start, stop))
        start = stop
    return out


def default_workers():
    env = os.environ.get("TWISTSTATS_WORKERS")
    if env:
        return max(1, int(env))
    return 1


def pmap(func, tasks, workers=None):
    """Ordered map; runs in-process when workers <= 1."""
    tasks = list(tasks)
    workers = default_workers() if workers is None else int(workers)
    if workers <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as ex:
        return list(ex.map(func, tasks))


def pmap_iter(func, tasks, workers=None):
    """Like :func:`pmap` but yields results in task order as they become available."""
    tasks = list(tasks)
    workers = default_workers() if workers is None else int(workers)
    if workers <= 1 or len(tasks) <= 1:
        for t in tasks:
            yield func(t)
        return
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as ex:
        yield from ex.map(func, tasks)
