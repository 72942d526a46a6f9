from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Sequence
import logging

logger = logging.getLogger(__name__)


def fan_out(
    fn: Callable[[Any], Any],
    units: Sequence[Any],
    workers: int = 1,
    key: Callable[[Any], Any] = lambda r: r["run_id"],
) -> list[Any]:
    """
    Прогоняет независимые единицы работы (каждая несёт свой run_id и
    свой под-поток RNG). Результат сортируется по run_id, поэтому
    не зависит от числа воркеров и порядка завершения.
    """
    if workers <= 1 or len(units) <= 1:
        results = [fn(u) for u in units]
    else:
        logger.info("[pool] %d units on %d workers", len(units), workers)
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(fn, units))
    return sorted(results, key=key)
