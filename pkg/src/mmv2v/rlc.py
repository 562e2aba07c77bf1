"""RLC unacknowledged mode: SN assignment at the transmitter, reordering at the receiver.

The receiver runs a single t-Reordering timer. Times are plain numbers in
whatever unit the caller uses consistently (the simulator passes nanoseconds).
Sequence numbers are unbounded integers, so there is no wraparound window.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any


class RlcStateError(RuntimeError):
    pass


@dataclass(slots=True)
class RlcPdu:
    sn: int
    packet: Any = None

    def summary(self) -> str:
        return f"sn={self.sn}"


class RlcUmTx:
    def __init__(self):
        self.next_sn = 0

    def send(self, packet) -> RlcPdu:
        pdu = RlcPdu(self.next_sn, packet)
        self.next_sn += 1
        return pdu


class RlcUmRx:
    """Receive-side reordering state machine.

    ``receive`` and ``on_timer_expiry`` return the PDUs released to the upper
    layer as ``(pdu, wait)`` pairs in increasing SN order, where ``wait`` is the
    time the PDU spent in the reordering buffer.
    """

    def __init__(self, t_reordering):
        self.t_reordering = t_reordering
        self.rx_next_reassembly = 0
        self.rx_next_highest = 0
        self.rx_timer_trigger: int | None = None
        self.timer_expiry = None  # None while stopped
        self.timer_generation = 0
        self.buffer: dict[int, tuple[RlcPdu, Any]] = {}
        self.stale_discards = 0
        self.duplicates = 0
        self.timer_expirations = 0
        self.total_wait = 0
        self.delivered_count = 0

    @property
    def timer_running(self) -> bool:
        return self.timer_expiry is not None

    def _release_in_order(self, now, out: list) -> None:
        buf = self.buffer
        sn = self.rx_next_reassembly
        while sn in buf:
            pdu, arrival = buf.pop(sn)
            wait = now - arrival
            out.append((pdu, wait))
            self.total_wait += wait
            self.delivered_count += 1
            sn += 1
        self.rx_next_reassembly = sn

    def _start_timer(self, now) -> None:
        self.timer_expiry = now + self.t_reordering
        self.rx_timer_trigger = self.rx_next_highest
        self.timer_generation += 1

    def _stop_timer(self) -> None:
        self.timer_expiry = None
        self.rx_timer_trigger = None

    def receive(self, pdu: RlcPdu, now) -> list:
        sn = pdu.sn
        if sn < self.rx_next_reassembly:
            self.stale_discards += 1
            return []
        if sn in self.buffer:
            self.duplicates += 1
            return []
        self.buffer[sn] = (pdu, now)
        if sn + 1 > self.rx_next_highest:
            self.rx_next_highest = sn + 1
        out: list = []
        if sn == self.rx_next_reassembly:
            self._release_in_order(now, out)
        if self.timer_expiry is not None and self.rx_next_reassembly >= self.rx_timer_trigger:
            self._stop_timer()
        if self.timer_expiry is None and self.rx_next_highest > self.rx_next_reassembly:
            self._start_timer(now)
        return out

    def on_timer_expiry(self, now) -> list:
        if self.timer_expiry is None:
            raise RlcStateError("t-Reordering expired while stopped")
        self.timer_expirations += 1
        trigger = self.rx_timer_trigger
        out: list = []
        buf = self.buffer
        # release everything below the trigger; missing SNs there are lost
        for sn in sorted(s for s in buf if s < trigger):
            pdu, arrival = buf.pop(sn)
            wait = now - arrival
            out.append((pdu, wait))
            self.total_wait += wait
            self.delivered_count += 1
        self.rx_next_reassembly = max(self.rx_next_reassembly, trigger)
        self._release_in_order(now, out)
        self._stop_timer()
        if self.rx_next_highest > self.rx_next_reassembly:
            self._start_timer(now)
        return out

    def check_invariants(self) -> None:
        assert self.rx_next_reassembly <= self.rx_next_highest
        assert self.timer_running == (self.rx_next_highest > self.rx_next_reassembly)
        assert all(self.rx_next_reassembly <= sn < self.rx_next_highest for sn in self.buffer)
