"""Thread pool shared by the scan drivers."""

from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Iterable, List


def parallel_map(fn: Callable, jobs: Iterable, workers: int = 1) -> List[Any]:
    """``[fn(job) for job in jobs]``, spread over ``workers`` threads.

    Results keep the order of ``jobs`` regardless of which thread finishes first.
    """
    if workers <= 1:
        return [fn(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))
