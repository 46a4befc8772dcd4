"""
Utilities - logging, serialization, validation and worker pools
"""
from app.utils.profiling import PerformanceProfiler, get_profiler, system_stats
from app.utils.logging_config import setup_logging, StructuredFormatter
from app.utils.serialization import FastSerializer
from app.utils.workers import ordered_map

__all__ = [
    'PerformanceProfiler',
    'get_profiler',
    'system_stats',
    'setup_logging',
    'StructuredFormatter',
    'FastSerializer',
    'ordered_map',
]
