"""
Latency bookkeeping for window scoring and streaming
"""
import logging
import time
from contextlib import contextmanager
from typing import Any, Dict, Iterator, List

import numpy as np
import psutil

logger = logging.getLogger(__name__)


class PerformanceProfiler:
    """
    Wall-time samples per named operation

    The streaming evaluator records one ``stream_window`` sample per scored
    window (chunk time divided by chunk size).
    """

    def __init__(self):
        self.samples: Dict[str, List[float]] = {}

    def record(self, operation: str, seconds: float):
        self.samples.setdefault(operation, []).append(seconds)

    @contextmanager
    def timed(self, operation: str) -> Iterator[None]:
        """
        Record the wall time of a block

        Examples:
            >>> with get_profiler().timed('featurize'):
            ...     featurize(clip)
        """
        began = time.perf_counter()
        try:
            yield
        finally:
            self.record(operation, time.perf_counter() - began)

    def get_stats(self, operation: str) -> Dict[str, Any]:
        """
        Summary of one operation in milliseconds

        Returns:
            count, mean, median, p95 and max; empty when nothing was recorded
        """
        values = self.samples.get(operation)
        if not values:
            return {}

        ms = np.asarray(values) * 1000.0
        return {
            'count': int(ms.size),
            'mean_ms': float(ms.mean()),
            'median_ms': float(np.median(ms)),
            'p95_ms': float(np.percentile(ms, 95)),
            'max_ms': float(ms.max()),
        }

    def generate_report(self) -> Dict[str, Any]:
        return {
            'operations': {op: self.get_stats(op) for op in self.samples},
            'system': system_stats(),
        }

    def reset(self):
        self.samples.clear()


def system_stats() -> Dict[str, Any]:
    """CPU load and resident memory of this process"""
    try:
        process = psutil.Process()
        return {
            'cpu_count': psutil.cpu_count(logical=False) or psutil.cpu_count(),
            'cpu_percent': psutil.cpu_percent(interval=0.1),
            'process_rss_mb': round(process.memory_info().rss / (1024 * 1024), 2),
        }
    except psutil.Error as e:
        logger.error("Cannot read system stats", extra={'error': str(e)})
        return {}


_profiler = PerformanceProfiler()


def get_profiler() -> PerformanceProfiler:
    return _profiler
