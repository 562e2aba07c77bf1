import random

import pytest
from hypothesis import given, settings, strategies as st

from mmv2v.rlc import RlcPdu, RlcStateError, RlcUmRx, RlcUmTx
from rlc_reference import drive, random_trace, reference_delivery, trace_set


def test_tx_numbering():
    tx = RlcUmTx()
    assert [tx.send(object()).sn for _ in range(3)] == [0, 1, 2]
    for _ in range(9997):
        last = tx.send(None)
    assert last.sn == 9999
    assert RlcUmTx().send(None).sn == 0


def test_in_order_never_starts_timer():
    rx = RlcUmRx(10)
    for sn in range(3):
        assert [p.sn for p, _ in rx.receive(RlcPdu(sn), sn)] == [sn]
        assert not rx.timer_running


def test_gap_released_by_timer():
    rx = RlcUmRx(10)
    assert [(p.sn, w) for p, w in rx.receive(RlcPdu(0), 0)] == [(0, 0)]
    assert rx.receive(RlcPdu(2), 1) == []
    assert rx.timer_expiry == 11 and rx.rx_timer_trigger == 3
    assert [(p.sn, w) for p, w in rx.on_timer_expiry(11)] == [(2, 10)]
    assert not rx.timer_running and rx.rx_next_reassembly == 3


def test_late_fill_stops_timer():
    rx = RlcUmRx(10)
    rx.receive(RlcPdu(0), 0)
    rx.receive(RlcPdu(2), 1)
    assert [(p.sn, w) for p, w in rx.receive(RlcPdu(1), 3)] == [(1, 0), (2, 2)]
    assert not rx.timer_running


def test_expiry_with_remaining_gap_restarts():
    rx = RlcUmRx(10)
    rx.receive(RlcPdu(0), 0)
    rx.receive(RlcPdu(2), 1)  # trigger 3
    rx.receive(RlcPdu(4), 2)
    assert [p.sn for p, _ in rx.on_timer_expiry(11)] == [2]
    assert rx.rx_next_reassembly == 3
    assert rx.timer_running and rx.rx_timer_trigger == 5 and rx.timer_expiry == 21
    assert [(p.sn, w) for p, w in rx.on_timer_expiry(21)] == [(4, 19)]


def test_wait_can_exceed_timer_once():
    # SN 4 arrives while the timer for the SN 1 gap runs; SN 3 never arrives
    out, _ = drive([(0, 0), (1, 2), (5, 4)], 10)
    assert out == [(0, 0), (2, 10), (4, 16)]


def test_expiry_with_nothing_buffered_advances_window():
    rx = RlcUmRx(10)
    rx.receive(RlcPdu(3), 0)
    rx.buffer.clear()  # emulate a window whose buffered PDUs were all consumed
    assert rx.on_timer_expiry(10) == []
    assert rx.rx_next_reassembly == 4


def test_stale_and_duplicate_counters():
    rx = RlcUmRx(10)
    rx.receive(RlcPdu(0), 0)
    rx.receive(RlcPdu(0), 1)
    rx.receive(RlcPdu(2), 1)
    rx.receive(RlcPdu(2), 2)
    assert (rx.stale_discards, rx.duplicates) == (1, 1)


def test_expiry_while_stopped_is_fatal():
    with pytest.raises(RlcStateError):
        RlcUmRx(10).on_timer_expiry(0)


def test_zero_timer_releases_immediately():
    out, _ = drive([(0, 1), (5, 3)], 0)
    assert out == [(1, 0), (3, 0)]


def test_oracle_equivalence_on_random_traces():
    traces = trace_set(1000)
    assert sum(len(a) for a, _ in traces) > 10_000
    for arrivals, t in traces:
        got, _ = drive(arrivals, t, check=True)
        assert got == reference_delivery(arrivals, t), (arrivals, t)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from([0, 1_000_000, 10_000_000]))
def test_delivery_properties(seed, t_reordering):
    arrivals = random_trace(random.Random(seed))
    out, rx = drive(arrivals, t_reordering, check=True)
    sns = [sn for sn, _ in out]
    assert sns == sorted(set(sns))
    # one shared timer: a PDU that lands behind a running timer can wait out
    # that timer's remainder plus one restart, so the bound is 2T not T
    assert all(0 <= w <= 2 * t_reordering for _, w in out)
    if t_reordering == 0:
        assert all(w == 0 for _, w in out)
    accepted = len(arrivals) - rx.stale_discards - rx.duplicates
    assert len(out) == accepted == rx.delivered_count
    assert not rx.buffer and not rx.timer_running


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32))
def test_delivered_set_independent_of_timer(seed):
    arrivals = random_trace(random.Random(seed))
    sets = {frozenset(sn for sn, _ in drive(arrivals, t)[0]) for t in (1_000_000, 50_000_000)}
    # without reordering in the arrival stream the set is fixed; with it, late
    # arrivals behind an expired timer become stale, so only require a subset
    a, b = sorted(sets, key=len) if len(sets) == 2 else (next(iter(sets)),) * 2
    assert a <= b
