"""
Worker pool helpers
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')


def ordered_map(fn: Callable[[T], R], items: Iterable[T], workers: int = 1) -> List[R]:
    """
    Apply ``fn`` to every item, results in input order

    numpy releases the GIL in the heavy kernels, so threads give real
    parallelism here. Results never depend on ``workers``.

    Args:
        fn: Pure function of one item
        items: Inputs
        workers: Pool size (<= 1 runs inline)

    Returns:
        List of results aligned with ``items``
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]

    logger.debug("Running worker pool", extra={'workers': workers, 'items': len(items)})
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
