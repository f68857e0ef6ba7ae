"""Deterministic discrete-event message simulator.

Actors are plain objects with ``handle(msg) -> [msg]`` and
``on_local(event) -> [msg]``.  Messages carry ``src``, ``dst`` and a
``words`` size.  Time is logical; same-tick deliveries are ordered by
(sender, sequence number) in ``fifo`` mode, which keeps every edge FIFO, and
by a seeded random key in ``reorder`` mode, where delays are also random.
"""

from __future__ import annotations

import heapq
import math
import random
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .errors import ConfigurationError, ContractViolation, DivergenceError

FIFO, REORDER = "fifo", "reorder"
SERIAL, THREADS = "serial", "threads"


@dataclass
class Metrics:
    messages_total: int = 0
    bytes_total: int = 0
    convergence_ticks: int = 0
    per_event_messages: list = field(default_factory=list)
    per_event_ticks: list = field(default_factory=list)
    per_node_record_bytes: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "messages_total": self.messages_total,
            "bytes_total": self.bytes_total,
            "convergence_ticks": self.convergence_ticks,
            "per_event_messages": list(self.per_event_messages),
            "per_event_ticks": list(self.per_event_ticks),
            "per_node_record_bytes": dict(sorted(self.per_node_record_bytes.items())),
        }


class Simulator:
    def __init__(self, actors: dict, delivery: str = FIFO, seed: int = 0, width: int = 32,
                 max_delay: int = 3, step_factor: int = 4, executor: str = SERIAL, workers: int = 4):
        if delivery not in (FIFO, REORDER):
            raise ConfigurationError(f"delivery mode must be fifo or reorder, got {delivery!r}")
        if executor not in (SERIAL, THREADS):
            raise ConfigurationError(f"executor must be serial or threads, got {executor!r}")
        self.actors = actors
        self.delivery = delivery
        self.rng = random.Random(seed)
        self.word_bytes = math.ceil(width / 4)
        self.max_delay = max_delay
        self.step_factor = step_factor
        self.executor = executor
        self.workers = workers
        self.now = 0
        self._queue: list = []
        self._seq = 0
        self.metrics = Metrics()
        self.diverged = False
        self._event_messages = 0
        self._events = 0
        self._pending_events = 0
        self.trace: list = []
        self.keep_trace = False

    @property
    def quiescent(self) -> bool:
        return not self._queue

    def reset_metrics(self):
        self.metrics = Metrics()

    def send(self, msgs):
        for m in msgs:
            self._seq += 1
            if self.delivery == FIFO:
                key = (self.now + 1, str(m.src), self._seq)
            else:
                key = (self.now + self.rng.randint(1, self.max_delay), self.rng.random(), self._seq)
            heapq.heappush(self._queue, (key, m))
            self.metrics.messages_total += 1
            self.metrics.bytes_total += m.words * self.word_bytes
            self._event_messages += 1
            if self.keep_trace:
                self.trace.append((self.now, m))

    def inject(self, key, event):
        """Deliver a local event to one actor at the current time."""
        if self.diverged:
            raise ContractViolation("simulation diverged; no further events accepted")
        self._pending_events += 1
        self.send(self.actors[key].on_local(event))

    def begin_event(self):
        self._event_messages = 0
        self._event_start = self.now
        self._events += 1

    def quiesce(self, bound: int | None = None) -> int:
        """Run until no messages are in flight; return ticks elapsed."""
        start = self.now
        if bound is None:
            # C * |actors| * (|events| + 1) ticks, scaled by the worst link delay
            events = self._pending_events + 1
            bound = self.step_factor * max(1, len(self.actors)) * events * self.max_delay
        self._pending_events = 0
        while self._queue:
            t = self._queue[0][0][0]
            if t - start > bound:
                self.diverged = True
                raise DivergenceError(f"no quiescence within {bound} ticks")
            self.now = t
            batch = []
            while self._queue and self._queue[0][0][0] == t:
                batch.append(heapq.heappop(self._queue)[1])
            if self.executor == THREADS and len(batch) > 1:
                self._run_parallel(batch)
            else:
                for m in batch:
                    self.send(self.actors[m.dst].handle(m))
        ticks = self.now - start
        self.metrics.convergence_ticks += ticks
        return ticks

    def _run_parallel(self, batch):
        by_dst = defaultdict(list)
        for m in batch:
            by_dst[m.dst].append(m)
        keys = sorted(by_dst, key=str)

        def work(dst):
            out = []
            for m in by_dst[dst]:
                out.extend(self.actors[dst].handle(m))
            return out

        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            results = list(pool.map(work, keys))
        for out in results:
            self.send(out)

    def end_event(self):
        self.metrics.per_event_messages.append(self._event_messages)
        self.metrics.per_event_ticks.append(self.now - self._event_start)
