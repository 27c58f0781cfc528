"""Injectable clocks: logical time for deterministic runs, wall time for live mode."""

from __future__ import annotations

import time


class LogicalClock:
    """Event-ordered simulated time in seconds. Advanced explicitly by the owner."""

    def __init__(self, start: float = 0.0) -> None:
        self._now = float(start)

    def now(self) -> float:
        return self._now

    def advance(self, seconds: float) -> float:
        if seconds < 0:
            raise ValueError(f"cannot advance clock by {seconds}")
        self._now += seconds
        return self._now


class WallClock:
    """Real time, for `ssfc serve` and realtime runs."""

    def now(self) -> float:
        return time.monotonic()

    def advance(self, seconds: float) -> float:
        time.sleep(seconds)
        return self.now()
