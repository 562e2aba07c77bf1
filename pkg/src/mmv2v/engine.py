"""Discrete-event core: integer-nanosecond clock, event heap and named RNG streams.

Random streams use numpy's Philox counter-based generator. Every stream is keyed
by the pair ``(run_seed, stream_key)`` where ``stream_key`` is the first 8 bytes
(big endian) of ``sha256(stream_name)``. Different names give different keys, so
streams never share a counter sequence and drawing from one cannot shift another.

Per-run seeds come from :func:`split_seed`, a SplitMix64-style mixer::

    mix64(z):  z ^= z >> 30; z *= 0xBF58476D1CE4E5B9
               z ^= z >> 27; z *= 0x94D049BB133111EB
               z ^= z >> 31                       (all arithmetic mod 2**64)

    split_seed(master, i) = mix64(mix64(master) + (i + 1) * 0x9E3779B97F4A7C15)
"""
from __future__ import annotations

import enum
import hashlib
import heapq
import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, NamedTuple

import numpy as np

log = logging.getLogger(__name__)

NS_PER_MS = 1_000_000
MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

STREAM_NAMES = ("channel-state", "shadowing", "blockage", "phy-error")


def ms_to_ns(ms: float) -> int:
    return int(round(ms * NS_PER_MS))


def ns_to_ms(ns: int) -> float:
    return ns / NS_PER_MS


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def split_seed(master_seed: int, index: int) -> int:
    """Derive the seed of replication ``index`` from ``master_seed``."""
    return mix64(mix64(master_seed) + (index + 1) * GOLDEN_GAMMA)


def stream_key(name: str) -> int:
    return int.from_bytes(hashlib.sha256(name.encode()).digest()[:8], "big")


class SchedulingError(RuntimeError):
    """An event was scheduled before the current clock (a simulator bug)."""


class EventKind(enum.IntEnum):
    APP_TX = 0
    SLOT_BOUNDARY = 1
    PHY_RX_DONE = 2
    RLC_TIMER_EXPIRY = 3
    SIM_END = 4


class Event(NamedTuple):
    time: int  # ns
    sequence: int
    kind: EventKind
    payload: Any = None


# ---------------------------------------------------------------- RNG laws


@dataclass(frozen=True)
class Uniform01:
    pass


@dataclass(frozen=True)
class StdNormal:
    pass


@dataclass(frozen=True)
class Bernoulli:
    p: float

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0) or math.isnan(self.p):
            raise ValueError(f"Bernoulli probability must lie in [0, 1], got {self.p}")


UNIFORM01 = Uniform01()
STD_NORMAL = StdNormal()


class RngStreams:
    """Independent named random streams for one replication."""

    def __init__(self, seed: int, names=STREAM_NAMES):
        self.seed = seed & MASK64
        self._gens = {
            name: np.random.Generator(np.random.Philox(key=np.array([self.seed, stream_key(name)], dtype=np.uint64)))
            for name in names
        }

    def __contains__(self, name: str) -> bool:
        return name in self._gens

    def generator(self, name: str) -> np.random.Generator:
        try:
            return self._gens[name]
        except KeyError:
            raise KeyError(f"unknown RNG stream {name!r}") from None

    def uniform(self, name: str) -> float:
        return float(self.generator(name).random())

    def normal(self, name: str) -> float:
        return float(self.generator(name).standard_normal())

    def draw(self, name: str, law) -> float | bool:
        gen = self.generator(name)
        if isinstance(law, Uniform01):
            return float(gen.random())
        if isinstance(law, StdNormal):
            return float(gen.standard_normal())
        if isinstance(law, Bernoulli):
            # always consume one uniform so outcomes stay coupled across p
            return bool(gen.random() < law.p)
        raise TypeError(f"unsupported law {law!r}")


# ---------------------------------------------------------------- engine


class Engine:
    """Single-threaded event loop.

    Handlers are registered per :class:`EventKind` and called as
    ``handler(event)``. Pop order is ``(time, sequence)`` ascending.
    """

    def __init__(self, trace: Callable[[str], None] | None = None, hash_trace: bool = False):
        self._heap: list[Event] = []
        self._seq = 0
        self.now_ns = 0
        self.processed = 0
        self.handlers: dict[EventKind, Callable[[Event], None]] = {}
        self._trace = trace
        self._hasher = hashlib.sha256() if hash_trace else None
        self.kind_counts = {k: 0 for k in EventKind}

    @property
    def now(self) -> float:
        """Current virtual time in ms."""
        return self.now_ns / NS_PER_MS

    def on(self, kind: EventKind, handler: Callable[[Event], None]) -> None:
        self.handlers[kind] = handler

    def schedule(self, time_ns: int, kind: EventKind, payload: Any = None) -> Event:
        if time_ns < self.now_ns:
            raise SchedulingError(
                f"event {kind.name} scheduled at {time_ns} ns, clock already at {self.now_ns} ns"
            )
        ev = Event(time_ns, self._seq, kind, payload)
        self._seq += 1
        heapq.heappush(self._heap, ev)
        return ev

    def schedule_in(self, delay_ns: int, kind: EventKind, payload: Any = None) -> Event:
        return self.schedule(self.now_ns + delay_ns, kind, payload)

    def pending(self) -> int:
        return len(self._heap)

    def run_until(self, t_end_ms: float) -> None:
        self.run_until_ns(ms_to_ns(t_end_ms))

    def run_until_ns(self, t_end: int) -> None:
        if t_end < self.now_ns:
            raise SchedulingError(f"run_until({t_end}) is before the clock ({self.now_ns})")
        heap = self._heap
        handlers = self.handlers
        counts = self.kind_counts
        pop = heapq.heappop
        while heap and heap[0][0] <= t_end:
            ev = pop(heap)
            self.now_ns = ev[0]
            kind = ev[2]
            counts[kind] += 1
            self.processed += 1
            if self._trace is not None or self._hasher is not None:
                self._record(ev)
            handler = handlers.get(kind)
            if handler is not None:
                handler(ev)
        self.now_ns = t_end

    def _record(self, ev: Event) -> None:
        line = f"{ev.time} {ev.kind.name} {_summary(ev.payload)}"
        if self._trace is not None:
            self._trace(line)
        if self._hasher is not None:
            self._hasher.update(line.encode())
            self._hasher.update(b"\n")

    def trace_digest(self) -> str | None:
        return None if self._hasher is None else self._hasher.hexdigest()


def _summary(payload: Any) -> str:
    if payload is None:
        return "-"
    summary = getattr(payload, "summary", None)
    if callable(summary):
        return summary()
    return str(payload)
