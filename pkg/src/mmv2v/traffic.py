"""Constant-bit-rate UDP-like source, application sink and per-run metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .engine import NS_PER_MS, EventKind


class DeliveryError(RuntimeError):
    """A packet reached the application twice."""


@dataclass(slots=True)
class AppPacket:
    id: int
    size: int
    t_sent: int  # ns
    t_delivered: int | None = None

    def summary(self) -> str:
        return f"pkt={self.id}"


@dataclass
class RunMetrics:
    sent: int
    delivered: int
    delays: list[float] = field(repr=False)  # ms
    tx_attempts: int = 0
    mac_drops: int = 0
    rlc_stale_discards: int = 0
    rlc_duplicates: int = 0
    rlc_timer_expirations: int = 0
    mean_buffer_wait_ms: float = 0.0
    trace_digest: str | None = None

    def __post_init__(self):
        if self.sent <= 0:
            raise ValueError("PRR is undefined for a run that sent no packets")
        if len(self.delays) != self.delivered:
            raise ValueError("delays must have exactly one entry per delivered packet")

    @property
    def prr(self) -> float:
        return self.delivered / self.sent

    @property
    def mean_delay(self) -> float:
        return math.fsum(self.delays) / len(self.delays) if self.delays else math.nan

    @property
    def p95_delay(self) -> float:
        if not self.delays:
            return math.nan
        ordered = sorted(self.delays)
        return ordered[math.ceil(0.95 * len(ordered)) - 1]


class TrafficSource:
    """Emits one packet every ``ipi`` starting at t = 0, strictly before ``duration``."""

    def __init__(self, engine, payload_size: int, ipi_ns: int, duration_ns: int, on_packet):
        self.engine = engine
        self.payload_size = payload_size
        self.ipi_ns = ipi_ns
        self.duration_ns = duration_ns
        self.on_packet = on_packet
        self.sent = 0
        self.stopped = False
        self.packets: list[AppPacket] = []

    def generate(self) -> None:
        if self.duration_ns > 0:
            self.engine.schedule(0, EventKind.APP_TX)
        self.engine.schedule(self.duration_ns, EventKind.SIM_END)

    def on_app_tx(self, ev) -> None:
        if self.stopped:
            return
        now = self.engine.now_ns
        pkt = AppPacket(self.sent, self.payload_size, now)
        self.sent += 1
        self.packets.append(pkt)
        nxt = now + self.ipi_ns
        if nxt < self.duration_ns:
            self.engine.schedule(nxt, EventKind.APP_TX)
        self.on_packet(pkt)

    def on_sim_end(self, ev) -> None:
        self.stopped = True


class Sink:
    def __init__(self):
        self.delays: list[float] = []
        self.delivered = 0

    def on_delivery(self, packet: AppPacket, now_ns: int) -> None:
        if packet.t_delivered is not None:
            raise DeliveryError(f"packet {packet.id} delivered twice")
        packet.t_delivered = now_ns
        self.delivered += 1
        self.delays.append((now_ns - packet.t_sent) / NS_PER_MS)

