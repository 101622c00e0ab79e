"""Deterministic task fan-out.

Work is split into a partition that depends only on the problem size
(never on the worker count), each task carries its own RNG stream, and
results are merged by task index.  Outputs are therefore bit-identical
for any number of threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")

#: Number of Monte Carlo samples handled by one task.  Part of the fixed
#: stream partition; changing it changes which RNG stream produces which
#: sample, so it is a constant, not a tunable.
CHUNK = 1 << 16


def default_threads() -> int:
    env = os.environ.get("GENMAP_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def run_tasks(fn: Callable[..., T], args_list: Sequence[tuple], threads: int = 1) -> list[T]:
    """Evaluate ``fn(*args)`` for each argument tuple, in order.

    With ``threads > 1`` tasks run on a thread pool; results are always
    returned in submission order.
    """
    if threads <= 1 or len(args_list) <= 1:
        return [fn(*args) for args in args_list]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(fn, *args) for args in args_list]
        return [f.result() for f in futures]


def sample_chunks(n: int) -> list[tuple[int, int]]:
    """Fixed partition of ``n`` samples into (task_index, count) chunks."""
    out = []
    idx = 0
    remaining = n
    while remaining > 0:
        take = min(CHUNK, remaining)
        out.append((idx, take))
        idx += 1
        remaining -= take
    return out
