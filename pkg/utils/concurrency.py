import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

import psutil

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')

MAX_DEFAULT_WORKERS = 8


def resolve_workers(jobs: int | None, n_tasks: int) -> int:
    """
    Number of workers for a fan-out of `n_tasks` items.

    Args:
        jobs (int | None): Requested cap; None or a value <= 0 picks min(cpus, tasks, 8).
        n_tasks (int): Number of independent items.

    Returns:
        int: At least 1, never more than the number of tasks.
    """
    if n_tasks <= 1:
        return 1
    if jobs is None or jobs <= 0:
        jobs = min(psutil.cpu_count(logical=True) or 1, MAX_DEFAULT_WORKERS)
    return max(1, min(jobs, n_tasks))


def ordered_map(func: Callable[[T], R], items: Iterable[T], jobs: int | None = 1) -> list[R]:
    """
    Apply `func` to every item, possibly concurrently, and return the results in input order.

    Every task owns its inputs; the reduction over results is left to the caller and stays sequential.
    """
    items = list(items)
    workers = resolve_workers(jobs, len(items))
    if workers == 1:
        return [func(item) for item in items]
    logger.debug(f'Fanning out {len(items)} tasks over {workers} workers')
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
