"""Busy-wait cost injection for benchmark realism.

Simulated component costs (model forward, scheduler call, decode) are
burned by spinning on the monotonic clock instead of sleeping: sleep
granularity on most platforms is tens of microseconds at best, which
would swamp the smallest costs the harness models (engine per-call
overhead is on the order of 10 us).
"""

from __future__ import annotations

import time


def busy_wait_us(duration_us: float) -> None:
    """Spin until `duration_us` microseconds of wall time have elapsed.

    A non-positive duration returns immediately.
    """
    if duration_us <= 0.0:
        return
    deadline = time.perf_counter_ns() + int(duration_us * 1000.0)
    while time.perf_counter_ns() < deadline:
        pass


def now_us() -> float:
    """Monotonic wall-clock reading in microseconds."""
    return time.perf_counter_ns() / 1000.0
