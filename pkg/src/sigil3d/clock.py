"""Injectable time source.

All lease and session arithmetic goes through a ``Clock`` instance so tests
can control time deterministically. Service code must call ``now()`` exactly
once per operation, inside the store's critical section, so that concurrent
histories replayed in commit order observe the same timestamps.
"""

from __future__ import annotations

from datetime import datetime, timezone


class Clock:
    """Wall-clock UTC time source. Subclass or duck-type to fake time."""

    def now(self) -> datetime:
        return datetime.now(timezone.utc)


SYSTEM_CLOCK = Clock()
