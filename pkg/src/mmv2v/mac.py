"""Slot-synchronous sidelink MAC with a dedicated per-slot grant and optional HARQ.

One transport block per slot. A pending retransmission takes the next slot
ahead of any queued PDU, so PDUs leave the MAC in FIFO order. HARQ feedback is
ideal (known at the end of the transmission slot) and attempts are not soft
combined: each one is an independent error draw on the current channel sample.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass

from .engine import EventKind
from .phy import PROCESSING_DELAY_SLOTS, TransportBlock

MAX_QUEUE = 10_000


class QueueOverflow(RuntimeError):
    """Offered load exceeds what the grant can serve."""


class HarqState(enum.Enum):
    IDLE = "idle"
    WAITING_FEEDBACK = "waiting_feedback"
    DONE = "done"
    FAILED = "failed"


@dataclass(slots=True)
class HarqProcess:
    pdu: object
    max_retx: int
    attempts_used: int = 0
    state: HarqState = HarqState.IDLE
    first_tx_slot: int | None = None
    tb: TransportBlock | None = None


class Mac:
    def __init__(self, engine, phy, channel, harq_enabled: bool, max_retx: int):
        self.engine = engine
        self.phy = phy
        self.channel = channel
        self.harq_enabled = harq_enabled
        self.max_retx = max_retx if harq_enabled else 0
        self.slot_ns = phy.num.slot_ns
        self.queue: deque = deque()
        self.pending: HarqProcess | None = None
        self._slot_armed = False
        self.tx_attempts = 0
        self.drops = 0
        self.max_queue_seen = 0

    def _arm_slot(self, at_ns: int) -> None:
        if not self._slot_armed:
            self._slot_armed = True
            self.engine.schedule(at_ns, EventKind.SLOT_BOUNDARY)

    def enqueue_sdu(self, pdu) -> None:
        q = self.queue
        q.append(pdu)
        if len(q) > MAX_QUEUE:
            raise QueueOverflow(f"MAC queue exceeded {MAX_QUEUE} PDUs")
        if len(q) > self.max_queue_seen:
            self.max_queue_seen = len(q)
        now = self.engine.now_ns
        slot = self.slot_ns
        self._arm_slot(-(-now // slot) * slot)

    def on_slot(self, ev) -> None:
        self._slot_armed = False
        now = self.engine.now_ns
        slot_idx = now // self.slot_ns
        if self.pending is not None:
            proc, self.pending = self.pending, None
        elif self.queue:
            proc = HarqProcess(self.queue.popleft(), self.max_retx, first_tx_slot=slot_idx)
        else:
            return
        tb = TransportBlock(self.phy.tb_bits, self.phy.n_prb, self.phy.mcs.index,
                            proc.attempts_used, proc.pdu.sn, slot_idx, proc.pdu)
        proc.tb = tb
        proc.attempts_used += 1
        proc.state = HarqState.WAITING_FEEDBACK
        self.tx_attempts += 1
        success = self.phy.transmit(tb, self.channel.sample(now))
        self.on_phy_result(success, proc, slot_idx)
        if self.pending is not None or self.queue:
            self._arm_slot(now + self.slot_ns)

    def on_phy_result(self, success: bool, proc: HarqProcess, slot_idx: int) -> None:
        if success:
            proc.state = HarqState.DONE
            rx_time = (slot_idx + 1 + PROCESSING_DELAY_SLOTS) * self.slot_ns
            self.engine.schedule(rx_time, EventKind.PHY_RX_DONE, proc.pdu)
        elif self.harq_enabled and proc.attempts_used < 1 + proc.max_retx:
            self.pending = proc
        else:
            proc.state = HarqState.FAILED
            self.drops += 1

    @property
    def in_flight(self) -> int:
        return len(self.queue) + (self.pending is not None)
