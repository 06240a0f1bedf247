"""Simulation event vocabulary shared by the event loop and the cluster model."""

from __future__ import annotations

import enum
from dataclasses import dataclass

__all__ = ["EventKind", "Scheduled"]


class EventKind(enum.IntEnum):
    """Event kinds; the numeric value is the tie-break priority at equal time.

    Internal state settles before a new request observes it, so timer and
    completion events dispatch ahead of an arrival at the same instant.
    """

    SERVICE_COMPLETE = 0
    SUSPEND_DONE = 1
    WAKEUP_DONE = 2
    TIMEOUT = 3
    ARRIVAL = 4


@dataclass(frozen=True, slots=True)
class Scheduled:
    """A transition the cluster asks the event loop to enqueue."""

    kind: EventKind
    server: int
    time: float
    token: int = 0  # stale-timeout guard; meaningful for TIMEOUT only
