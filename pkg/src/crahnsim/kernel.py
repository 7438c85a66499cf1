"""Deterministic discrete-event engine: event queue, clock, named random streams."""

import hashlib
import heapq
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

DEFAULT_SIM_TIME_S = 500.0


class PastTimeError(ValueError):
    """Raised when an event is scheduled before the current clock."""


@dataclass(order=True)
class SimEvent:
    at: float
    id: int
    target: str = field(compare=False, default="system")
    kind: str = field(compare=False, default="event")
    fn: Optional[Callable[[], None]] = field(compare=False, default=None, repr=False)


def stream_seed(seed: int, label: str) -> int:
    """Stable 64-bit seed for a (seed, label) pair, identical across platforms."""
    digest = hashlib.sha256(f"{seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class Kernel:
    """Single-threaded event loop.

    Execution order is totally determined by (at, id); ids are assigned in
    scheduling order, so ties at equal timestamps run in scheduling order.
    """

    def __init__(self, seed: int = 0, end: float = DEFAULT_SIM_TIME_S,
                 trace: Optional[list] = None):
        self.now = 0.0
        self.end = float(end)
        self.seed = int(seed)
        self._heap: list[SimEvent] = []
        self._next_id = 1
        self._pending: set[int] = set()
        self._streams: dict[str, np.random.Generator] = {}
        self.trace = trace

    def stream(self, label: str) -> np.random.Generator:
        """Named random stream; same (seed, label) yields the same sequence."""
        gen = self._streams.get(label)
        if gen is None:
            gen = np.random.Generator(np.random.PCG64(stream_seed(self.seed, label)))
            self._streams[label] = gen
        return gen

    def schedule(self, at: float, fn: Callable[[], None], *,
                 target: str = "system", kind: str = "event") -> int:
        if at < self.now:
            raise PastTimeError(
                f"cannot schedule at t={at} (clock is at t={self.now})")
        ev = SimEvent(at=float(at), id=self._next_id, target=target, kind=kind, fn=fn)
        self._next_id += 1
        heapq.heappush(self._heap, ev)
        self._pending.add(ev.id)
        return ev.id

    def schedule_in(self, delay: float, fn: Callable[[], None], *,
                    target: str = "system", kind: str = "event") -> int:
        return self.schedule(self.now + delay, fn, target=target, kind=kind)

    def cancel(self, event_id: int) -> bool:
        if event_id in self._pending:
            self._pending.discard(event_id)
            return True
        return False

    def run_until(self, t_end: Optional[float] = None) -> int:
        """Execute all events with at <= t_end (closed interval); advance clock to t_end."""
        if t_end is None:
            t_end = self.end
        if t_end < self.now:
            raise PastTimeError(
                f"cannot run backwards to t={t_end} (clock is at t={self.now})")
        executed = 0
        while self._heap and self._heap[0].at <= t_end:
            ev = heapq.heappop(self._heap)
            if ev.id not in self._pending:
                continue  # cancelled
            self._pending.discard(ev.id)
            self.now = ev.at
            if self.trace is not None:
                self.trace.append(f"{ev.at:.6f},{ev.id},{ev.target},{ev.kind}")
            if ev.fn is not None:
                ev.fn()
            executed += 1
        self.now = t_end
        return executed
