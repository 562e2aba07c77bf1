import pytest
from hypothesis import given, settings, strategies as st

from mmv2v.config import SimConfig
from mmv2v.engine import Engine, EventKind
from mmv2v.harness import Link
from mmv2v.mac import HarqState, Mac, QueueOverflow
from mmv2v.phy import MCS_TABLE, Numerology
from mmv2v.rlc import RlcPdu

SLOT = 250_000


class ScriptedPhy:
    num = Numerology(2)
    tb_bits, n_prb, mcs = 1096, 2, MCS_TABLE[28]

    def __init__(self, outcomes):
        self.outcomes = list(outcomes)
        self.sent = []

    def transmit(self, tb, sample):
        self.sent.append(tb)
        return self.outcomes.pop(0) if self.outcomes else True


class NullChannel:
    def sample(self, t):
        return None


def rig(outcomes, harq, max_retx=3):
    eng = Engine()
    phy = ScriptedPhy(outcomes)
    mac = Mac(eng, phy, NullChannel(), harq, max_retx)
    rx = []
    eng.on(EventKind.SLOT_BOUNDARY, mac.on_slot)
    eng.on(EventKind.PHY_RX_DONE, lambda ev: rx.append((eng.now_ns, ev.payload.sn)))
    return eng, phy, mac, rx


def test_harq_off_failure_drops_after_one_attempt():
    eng, phy, mac, rx = rig([False], harq=False)
    mac.enqueue_sdu(RlcPdu(0))
    eng.run_until(10)
    assert rx == [] and mac.tx_attempts == 1 and mac.drops == 1


def test_harq_success_on_third_attempt():
    eng, phy, mac, rx = rig([False, False, True], harq=True)
    eng.run_until_ns(3 * SLOT)
    mac.enqueue_sdu(RlcPdu(0))
    eng.run_until(10)
    slots = [tb.tx_slot for tb in phy.sent]
    assert slots == [3, 4, 5]  # last attempt in first_tx_slot + 2
    assert [tb.harq_attempt for tb in phy.sent] == [0, 1, 2]
    assert rx == [((3 + 2 + 2) * SLOT, 0)]
    assert mac.drops == 0 and mac.tx_attempts == 3


def test_harq_exhausted_leaves_gap():
    eng, phy, mac, rx = rig([False] * 4, harq=True, max_retx=3)
    mac.enqueue_sdu(RlcPdu(0))
    mac.enqueue_sdu(RlcPdu(1))
    eng.run_until(10)
    assert mac.tx_attempts == 5 and mac.drops == 1
    assert [sn for _, sn in rx] == [1]  # SN 0 never arrives


def test_on_phy_result_states():
    from mmv2v.mac import HarqProcess
    eng, phy, mac, rx = rig([], harq=True, max_retx=1)
    proc = HarqProcess(RlcPdu(0), 1, attempts_used=1)
    mac.on_phy_result(False, proc, 0)
    assert mac.pending is proc
    proc.attempts_used = 2
    mac.pending = None
    mac.on_phy_result(False, proc, 1)
    assert proc.state is HarqState.FAILED and mac.pending is None
    ok = HarqProcess(RlcPdu(1), 1, attempts_used=1)
    mac.on_phy_result(True, ok, 2)
    assert ok.state is HarqState.DONE


def test_same_slot_arrivals_go_out_fifo():
    eng, phy, mac, rx = rig([], harq=False)
    eng.run_until_ns(SLOT // 2)
    for sn in range(3):
        mac.enqueue_sdu(RlcPdu(sn))
    eng.run_until(10)
    assert [(tb.rlc_sn, tb.tx_slot) for tb in phy.sent] == [(0, 1), (1, 2), (2, 3)]
    assert [sn for _, sn in rx] == [0, 1, 2]


def test_idle_mac_sends_nothing():
    eng, phy, mac, rx = rig([], harq=False)
    eng.run_until(100)
    assert phy.sent == [] and eng.kind_counts[EventKind.SLOT_BOUNDARY] == 0


def test_lossless_queue_stays_short():
    link = Link(SimConfig(pathloss_override_db=0.0, duration=2.0))
    m = link.run()
    assert link.mac.max_queue_seen == 1 and m.mac_drops == 0


def test_overload_is_fatal():
    with pytest.raises(QueueOverflow):
        Link(SimConfig(inter_packet_interval=0.01, duration=1.0)).run()


@settings(max_examples=25, deadline=None)
@given(st.booleans(), st.integers(0, 4), st.sampled_from([0, 28]), st.sampled_from([100.0, 500.0]),
       st.sampled_from(["highway", "urban"]), st.integers(0, 2**64 - 1))
def test_conservation_and_ordering(harq, max_retx, mcs, d, sc, seed):
    cfg = SimConfig(harq_enabled=harq, max_harq_retx=max_retx, mcs_index=mcs, distance=d,
                    scenario=sc, seed=seed, duration=0.5)
    link = Link(cfg)
    order = []
    handler = link.engine.handlers[EventKind.PHY_RX_DONE]
    link.engine.on(EventKind.PHY_RX_DONE, lambda ev: (order.append(ev.payload.sn), handler(ev)))
    m = link.run()
    assert link.mac.in_flight == 0
    assert m.sent == m.delivered + m.mac_drops
    assert order == sorted(order)
    assert m.tx_attempts <= m.sent * (1 + (max_retx if harq else 0))
    if not harq:
        assert m.tx_attempts == m.sent
