"""Simulated clock: discrete seconds, advanced explicitly.

Every component that needs time takes a SimClock so scenario runs are
deterministic. One tick == one second.
"""

from __future__ import annotations


class SimClock:
    def __init__(self, start: int = 0):
        self._now = int(start)

    def now(self) -> int:
        return self._now

    def advance(self, seconds: int) -> int:
        if seconds < 0:
            raise ValueError("clock cannot move backwards")
        self._now += int(seconds)
        return self._now

    def advance_to(self, when: int) -> int:
        if when < self._now:
            raise ValueError("clock cannot move backwards")
        self._now = int(when)
        return self._now

    def __repr__(self) -> str:
        return f"SimClock(t={self._now})"
