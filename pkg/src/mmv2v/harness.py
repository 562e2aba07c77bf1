"""Monte Carlo orchestration: run replications, aggregate per sweep point, write CSV."""
from __future__ import annotations

import csv
import math
import os
import statistics
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

from .channel import ChannelProcess, write_channel_csv
from .config import SimConfig
from .engine import NS_PER_MS, Engine, EventKind, RngStreams, ms_to_ns
from .mac import Mac
from .phy import Phy
from .rlc import RlcUmRx, RlcUmTx
from .traffic import RunMetrics, Sink, TrafficSource

DRAIN_GRACE_NS = 1_000 * NS_PER_MS

RUN_COLUMNS = (
    "run_id", "scenario", "fc_ghz", "bw_mhz", "numerology", "mcs", "distance_m",
    "reorder_timer_ms", "harq", "seed", "sent", "delivered", "prr", "mean_delay_ms",
    "p95_delay_ms", "tx_attempts", "mac_drops", "rlc_timer_expirations", "mean_buffer_wait_ms",
)
POINT_COLUMNS = ("scenario", "fc_ghz", "bw_mhz", "numerology", "mcs", "distance_m",
                 "reorder_timer_ms", "harq")
SUMMARY_COLUMNS = POINT_COLUMNS + ("n_reps", "prr_mean", "prr_ci95", "delay_mean_ms", "delay_ci95_ms")
NA = "NA"


class Link:
    """Transmitter and receiver stacks of one platoon link wired to an engine."""

    def __init__(self, config: SimConfig, trace=None, hash_trace=False, record_channel=False):
        self.config = config
        self.engine = eng = Engine(trace=trace, hash_trace=hash_trace)
        self.rng = RngStreams(config.seed)
        self.channel = ChannelProcess(config, self.rng, record=record_channel)
        self.phy = Phy(config, self.rng)
        self.mac = Mac(eng, self.phy, self.channel, config.harq_enabled, config.max_harq_retx)
        self.rlc_tx = RlcUmTx()
        self.rlc_rx = RlcUmRx(ms_to_ns(config.reorder_timer))
        self.sink = Sink()
        self.duration_ns = ms_to_ns(config.duration * 1000.0)
        self.source = TrafficSource(eng, config.payload_size, ms_to_ns(config.inter_packet_interval),
                                    self.duration_ns, self._down)
        eng.on(EventKind.APP_TX, self.source.on_app_tx)
        eng.on(EventKind.SIM_END, self.source.on_sim_end)
        eng.on(EventKind.SLOT_BOUNDARY, self.mac.on_slot)
        eng.on(EventKind.PHY_RX_DONE, self._on_rx)
        eng.on(EventKind.RLC_TIMER_EXPIRY, self._on_timer)

    def _down(self, packet) -> None:
        self.mac.enqueue_sdu(self.rlc_tx.send(packet))

    def _up(self, released) -> None:
        now = self.engine.now_ns
        for pdu, _wait in released:
            self.sink.on_delivery(pdu.packet, now)

    def _sync_timer(self, generation_before: int) -> None:
        rx = self.rlc_rx
        if rx.timer_generation != generation_before:
            self.engine.schedule(rx.timer_expiry, EventKind.RLC_TIMER_EXPIRY, rx.timer_generation)

    def _on_rx(self, ev) -> None:
        gen = self.rlc_rx.timer_generation
        self._up(self.rlc_rx.receive(ev.payload, self.engine.now_ns))
        self._sync_timer(gen)

    def _on_timer(self, ev) -> None:
        rx = self.rlc_rx
        if ev.payload != rx.timer_generation or not rx.timer_running:
            return  # timer was stopped or restarted since this expiry was scheduled
        gen = rx.timer_generation
        self._up(rx.on_timer_expiry(self.engine.now_ns))
        self._sync_timer(gen)

    def run(self) -> RunMetrics:
        self.source.generate()
        self.engine.run_until_ns(self.duration_ns + DRAIN_GRACE_NS)
        rx = self.rlc_rx
        wait_ms = rx.total_wait / rx.delivered_count / NS_PER_MS if rx.delivered_count else 0.0
        return RunMetrics(
            sent=self.source.sent,
            delivered=self.sink.delivered,
            delays=self.sink.delays,
            tx_attempts=self.mac.tx_attempts,
            mac_drops=self.mac.drops,
            rlc_stale_discards=rx.stale_discards,
            rlc_duplicates=rx.duplicates,
            rlc_timer_expirations=rx.timer_expirations,
            mean_buffer_wait_ms=wait_ms,
            trace_digest=self.engine.trace_digest(),
        )


def run_replication(config: SimConfig, trace_path: str | None = None,
                    channel_path: str | None = None, hash_trace: bool = False) -> RunMetrics:
    """Build a fresh engine and stack for ``config``, run it to completion."""
    fh = open(trace_path, "w") if trace_path else None
    try:
        trace = (lambda line: fh.write(line + "\n")) if fh else None
        link = Link(config, trace=trace, hash_trace=hash_trace, record_channel=channel_path is not None)
        metrics = link.run()
    finally:
        if fh:
            fh.close()
    if channel_path:
        write_channel_csv(link.channel.segments, channel_path)
    return metrics


@dataclass
class RunResult:
    config: SimConfig
    metrics: RunMetrics


def _expand_path(path: str | None, run_id: int) -> str | None:
    if not path:
        return None
    if "{run_id}" in path:
        return path.format(run_id=run_id)
    return path if run_id == 0 else None


def _run_one(args) -> RunResult:
    config, trace_path, channel_path = args
    return RunResult(config, run_replication(config, _expand_path(trace_path, config.run_id),
                                             _expand_path(channel_path, config.run_id)))


def run_many(configs: Sequence[SimConfig], workers: int = 1, trace_path: str | None = None,
             channel_path: str | None = None) -> list[RunResult]:
    """Run every config; results come back ordered by ``run_id`` whatever ``workers`` is."""
    jobs = [(c, trace_path, channel_path) for c in configs]
    if workers <= 1 or len(jobs) <= 1:
        results = [_run_one(j) for j in jobs]
    else:
        chunk = max(1, len(jobs) // (workers * 4))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs, chunksize=chunk))
    return sorted(results, key=lambda r: r.config.run_id)


def default_workers() -> int:
    return max(1, (os.cpu_count() or 1))


# ---------------------------------------------------------------- aggregation


@dataclass
class Summary:
    point: SimConfig
    n_reps: int
    prr_mean: float
    prr_ci95: float | None
    delay_mean: float
    delay_ci95: float | None


def mean_ci95(values: Sequence[float]) -> tuple[float, float | None]:
    """Mean and normal-approximation 95% half-width (``None`` below two samples)."""
    vals = [v for v in values if not math.isnan(v)]
    if not vals:
        return math.nan, None
    m = math.fsum(vals) / len(vals)
    if len(vals) < 2:
        return m, None
    return m, 1.96 * statistics.stdev(vals) / math.sqrt(len(vals))


def aggregate(results: Iterable[RunResult]) -> list[Summary]:
    groups: OrderedDict[tuple, list[RunResult]] = OrderedDict()
    for r in results:
        groups.setdefault(r.config.point, []).append(r)
    out = []
    for runs in groups.values():
        prr_mean, prr_ci = mean_ci95([r.metrics.prr for r in runs])
        d_mean, d_ci = mean_ci95([r.metrics.mean_delay for r in runs])
        out.append(Summary(runs[0].config, len(runs), prr_mean, prr_ci, d_mean, d_ci))
    return out


# ---------------------------------------------------------------- CSV


def _num(v) -> str:
    if v is None:
        return NA
    if isinstance(v, float):
        return "nan" if math.isnan(v) else format(v, ".10g")
    return str(v)


def _point_cells(c: SimConfig) -> list[str]:
    return [c.scenario.value, _num(c.carrier_freq), _num(c.bandwidth), str(c.numerology_index),
            str(c.mcs_index), _num(c.distance), _num(c.reorder_timer), "on" if c.harq_enabled else "off"]


def run_row(r: RunResult) -> list[str]:
    c, m = r.config, r.metrics
    return ([str(c.run_id)] + _point_cells(c) + [str(c.seed), str(m.sent), str(m.delivered),
            _num(m.prr), _num(m.mean_delay), _num(m.p95_delay), str(m.tx_attempts), str(m.mac_drops),
            str(m.rlc_timer_expirations), _num(m.mean_buffer_wait_ms)])


def summary_row(s: Summary) -> list[str]:
    return _point_cells(s.point) + [str(s.n_reps), _num(s.prr_mean), _num(s.prr_ci95),
                                    _num(s.delay_mean), _num(s.delay_ci95)]


def write_csv(rows: Iterable[Sequence[str]], path, columns: Sequence[str] = RUN_COLUMNS) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            w.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def read_csv(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
