import datetime
import time
from collections.abc import Iterator
from contextlib import contextmanager

import humanize

__all__ = (
    "human_friendly_timedelta",
    "normalise_timedelta",
    "Stopwatch",
    "stopwatch",
)


def normalise_timedelta(delta: float | datetime.timedelta) -> datetime.timedelta:
    if isinstance(delta, (int, float)):
        return datetime.timedelta(seconds=delta)
    return delta


def human_friendly_timedelta(delta: float | datetime.timedelta) -> str:
    return humanize.precisedelta(normalise_timedelta(delta), minimum_unit="milliseconds", format="%0.1f")


class Stopwatch:
    def __init__(self) -> None:
        self.start = time.perf_counter()
        self.end: float | None = None

    @property
    def elapsed(self) -> float:
        end = self.end if self.end is not None else time.perf_counter()
        return end - self.start

    def __str__(self) -> str:
        return human_friendly_timedelta(self.elapsed)


@contextmanager
def stopwatch() -> Iterator[Stopwatch]:
    watch = Stopwatch()
    try:
        yield watch
    finally:
        watch.end = time.perf_counter()
