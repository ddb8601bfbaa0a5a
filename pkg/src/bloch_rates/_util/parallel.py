from concurrent.futures import Future, ProcessPoolExecutor, as_completed
from logging import getLogger
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

logger = getLogger(__name__)


def map_ordered(fn: Callable[[T], R], tasks: Sequence[T], jobs: int = 1) -> list[R]:
    """Apply ``fn`` to every task, returning results in task order.

    With ``jobs > 1`` tasks run in a process pool; ``fn`` and the tasks must
    be picklable. Results are merged by position so the output does not
    depend on completion order.
    """
    if jobs < 1:
        raise ValueError(f"jobs must be at least 1, got {jobs}.")
    if jobs == 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]

    max_workers = max(1, min(jobs, len(tasks)))
    logger.debug(f"running {len(tasks)} tasks on {max_workers} workers")
    results_by_position: dict[int, R] = {}
    with ProcessPoolExecutor(max_workers=max_workers) as executor:
        futures: dict[Future[R], int] = {
            executor.submit(fn, task): position for position, task in enumerate(tasks)
        }
        for fut in as_completed(futures):
            try:
                results_by_position[futures[fut]] = fut.result()
            except BaseException:
                for other in futures:
                    other.cancel()
                raise
    return [results_by_position[position] for position in sorted(results_by_position)]
