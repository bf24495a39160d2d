"""
Performance Profiler
Times the phases of the experiment protocol and logs where the run spends its time
"""

import time
import logging
from typing import Dict, List, Optional, Any
from collections import defaultdict, deque
from dataclasses import dataclass
from enum import Enum


class ProfileCategory(Enum):
    """Protocol phases that are timed"""
    DATA_LOADING = "data_loading"
    STRUCTURE_SEARCH = "structure_search"
    ML_FITTING = "ml_fitting"
    BA_FITTING = "ba_fitting"
    EVALUATION = "evaluation"
    REPORTING = "reporting"


@dataclass
class PerformanceMetric:
    """Individual timing measurement"""
    category: ProfileCategory
    operation: str
    duration: float
    timestamp: float


class PerformanceProfiler:
    """
    Phase timing for experiment runs

    Timings only go to the log; reports never contain them.
    """

    def __init__(self, history_size: int = 10000):
        """
        Initialize the profiler

        Args:
            history_size: Number of measurements to keep; the oldest are dropped first
        """
        self.logger = logging.getLogger(__name__)
        self.history_size = history_size
        self.metrics: deque = deque(maxlen=history_size)
        self.profiling_enabled = True
        self.active_timers: Dict[str, float] = {}

    def start_timer(self, category: ProfileCategory, operation: str) -> str:
        """
        Start timing an operation

        Args:
            category: Protocol phase
            operation: Name of the operation

        Returns:
            Timer key for stopping the timer
        """
        if not self.profiling_enabled:
            return ""
        timer_key = f"{category.value}:{operation}"
        self.active_timers[timer_key] = time.perf_counter()
        return timer_key

    def stop_timer(self, timer_key: str):
        """Stop timing an operation and record the metric"""
        if not self.profiling_enabled or not timer_key or timer_key not in self.active_timers:
            return
        end_time = time.perf_counter()
        duration = end_time - self.active_timers.pop(timer_key)
        category_str, operation = timer_key.split(":", 1)
        self.metrics.append(PerformanceMetric(ProfileCategory(category_str), operation,
                                              duration, end_time))

    def time_operation(self, category: ProfileCategory, operation: str):
        """Context manager for timing operations"""
        return PerformanceTimer(self, category, operation)

    def get_category_performance(self) -> Dict[str, Dict[str, float]]:
        """Totals per phase, in seconds"""
        if not self.metrics:
            return {}
        grand_total = sum(m.duration for m in self.metrics)
        durations = defaultdict(list)
        for metric in self.metrics:
            durations[metric.category].append(metric.duration)
        return {
            category.value: {
                "total_time": sum(values),
                "average_time": sum(values) / len(values),
                "call_count": len(values),
                "percentage": 100.0 * sum(values) / grand_total if grand_total > 0 else 0.0,
            }
            for category, values in durations.items()
        }

    def get_operation_performance(self, limit: int = 5) -> List[Dict[str, Any]]:
        """Slowest operations by total time"""
        durations = defaultdict(list)
        for metric in self.metrics:
            durations[metric.operation].append(metric.duration)
        stats = [{"operation": op, "total_time": sum(values), "call_count": len(values)}
                 for op, values in durations.items()]
        stats.sort(key=lambda x: x["total_time"], reverse=True)
        return stats[:limit]

    def disable_profiling(self):
        self.profiling_enabled = False
        self.active_timers.clear()

    def log_performance_report(self):
        """Log the time spent per phase"""
        if not self.metrics:
            self.logger.info("No timing data available")
            return
        self.logger.info("=== Timing Report ===")
        for category, stats in self.get_category_performance().items():
            self.logger.info(f"  {category}: {stats['total_time']:.3f}s over "
                             f"{stats['call_count']} calls ({stats['percentage']:.1f}%)")
        for op in self.get_operation_performance():
            self.logger.debug(f"  {op['operation']}: {op['total_time']:.3f}s")


class PerformanceTimer:
    """Context manager for timing operations"""

    def __init__(self, profiler: PerformanceProfiler, category: ProfileCategory, operation: str):
        self.profiler = profiler
        self.category = category
        self.operation = operation
        self.timer_key = ""

    def __enter__(self):
        self.timer_key = self.profiler.start_timer(self.category, self.operation)
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.profiler.stop_timer(self.timer_key)


# Global profiler instance
_global_profiler: Optional[PerformanceProfiler] = None


def get_profiler() -> PerformanceProfiler:
    """Get the global performance profiler instance"""
    global _global_profiler
    if _global_profiler is None:
        _global_profiler = PerformanceProfiler()
    return _global_profiler
