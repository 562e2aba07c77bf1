"""NR-style numerology, transport-block sizing, link budget and SINR-to-BLER mapping."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

SYMBOLS_PER_SLOT = 14
SUBCARRIERS_PER_PRB = 12
# one DMRS/control symbol per PRB
RE_OVERHEAD = 12
# UDP 8 + IPv4 20 + PDCP 2 + RLC-UM 2 + MAC 2 + CRC 3
HEADER_OVERHEAD_BYTES = 37
PROCESSING_DELAY_SLOTS = 1
THERMAL_NOISE_DBM_HZ = -174.0

DEFAULT_BLER_GAP_DB = 3.0
DEFAULT_BLER_SLOPE = 2.0  # per dB


class ResourceError(ValueError):
    """The transport block does not fit the slot at this MCS and bandwidth."""


@dataclass(frozen=True)
class Numerology:
    index: int

    @property
    def scs_khz(self) -> float:
        return 15.0 * 2**self.index

    @property
    def slot_ns(self) -> int:
        return 1_000_000 >> self.index

    @property
    def slot_ms(self) -> float:
        return 1.0 / 2**self.index

    @property
    def slots_per_ms(self) -> int:
        return 2**self.index

    symbols_per_slot: int = SYMBOLS_PER_SLOT
    subcarriers_per_prb: int = SUBCARRIERS_PER_PRB

    def total_prbs(self, bandwidth_mhz: float) -> int:
        return math.floor(bandwidth_mhz * 1000.0 / (SUBCARRIERS_PER_PRB * self.scs_khz))


@dataclass(frozen=True)
class McsEntry:
    index: int
    qm: int
    code_rate: float

    @property
    def spectral_efficiency(self) -> float:
        return self.qm * self.code_rate


def _nr_like_table() -> dict[int, McsEntry]:
    # NR 64QAM table code rates (x1024); index 0 and 28 carry the evaluated
    # MCS 0 / MCS 28 values, index 17 is nudged so SE increases strictly
    rates = {
        0: (2, 82), 1: (2, 157), 2: (2, 193), 3: (2, 251), 4: (2, 308), 5: (2, 379),
        6: (2, 449), 7: (2, 526), 8: (2, 602), 9: (2, 679),
        10: (4, 340), 11: (4, 378), 12: (4, 434), 13: (4, 490), 14: (4, 553),
        15: (4, 616), 16: (4, 658),
        17: (6, 442), 18: (6, 466), 19: (6, 517), 20: (6, 567), 21: (6, 616),
        22: (6, 666), 23: (6, 719), 24: (6, 772), 25: (6, 822), 26: (6, 873),
        27: (6, 910), 28: (6, 942),
    }
    table = {i: McsEntry(i, qm, r / 1024.0) for i, (qm, r) in rates.items()}
    table[0] = McsEntry(0, 2, 0.08)
    table[28] = McsEntry(28, 6, 0.92)
    return table


MCS_TABLE: dict[int, McsEntry] = _nr_like_table()


def check_mcs_table(table: dict[int, McsEntry]) -> None:
    prev = None
    for idx in sorted(table):
        e = table[idx]
        if e.qm < 1 or not (0.0 < e.code_rate < 1.0):
            raise ValueError(f"MCS {idx}: need Qm >= 1 and 0 < R < 1, got Qm={e.qm}, R={e.code_rate}")
        if prev is not None and e.spectral_efficiency <= prev.spectral_efficiency:
            raise ValueError(f"MCS {idx}: spectral efficiency must increase with the index")
        prev = e


def parse_mcs_table(text: str) -> dict[int, McsEntry]:
    """Read an ``index,Qm,R`` CSV (header line optional)."""
    table: dict[int, McsEntry] = {}
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or row[0].strip().startswith("#"):
            continue
        if lineno == 1 and not row[0].strip().lstrip("-").isdigit():
            continue
        try:
            idx, qm, rate = int(row[0]), int(row[1]), float(row[2])
        except (ValueError, IndexError):
            raise ValueError(f"MCS table line {lineno}: expected index,Qm,R, got {row}") from None
        table[idx] = McsEntry(idx, qm, rate)
    check_mcs_table(table)
    return table


check_mcs_table(MCS_TABLE)


@dataclass(frozen=True, slots=True)
class TransportBlock:
    tb_bits: int
    n_prb: int
    mcs: int
    harq_attempt: int
    rlc_sn: int
    tx_slot: int
    pdu: object = None

    def summary(self) -> str:
        return f"sn={self.rlc_sn} attempt={self.harq_attempt} slot={self.tx_slot}"


def res_per_prb(re_overhead: int = RE_OVERHEAD) -> int:
    return SUBCARRIERS_PER_PRB * SYMBOLS_PER_SLOT - re_overhead


def tbs_and_prb(
    sdu_bytes: int,
    mcs: McsEntry,
    num: Numerology,
    bandwidth_mhz: float,
    header_overhead: int = HEADER_OVERHEAD_BYTES,
    re_overhead: int = RE_OVERHEAD,
) -> tuple[int, int]:
    """Return ``(tb_bits, n_prb)`` for one SDU carried in a single slot."""
    if sdu_bytes < 1:
        raise ValueError("sdu_bytes must be >= 1")
    tb_bits = 8 * (sdu_bytes + header_overhead)
    bits_per_prb = mcs.spectral_efficiency * res_per_prb(re_overhead)
    n_prb = max(1, math.ceil(tb_bits / bits_per_prb))
    available = num.total_prbs(bandwidth_mhz)
    if n_prb > available:
        raise ResourceError(
            f"{sdu_bytes} B SDU needs {n_prb} PRBs at MCS {mcs.index}, "
            f"only {available} available in {bandwidth_mhz} MHz at {num.scs_khz} kHz"
        )
    return tb_bits, n_prb


def noise_dbm(n_prb: int, num: Numerology, noise_figure: float) -> float:
    bw_hz = n_prb * SUBCARRIERS_PER_PRB * num.scs_khz * 1e3
    return THERMAL_NOISE_DBM_HZ + 10.0 * math.log10(bw_hz) + noise_figure


def sinr(sample, n_prb: int, num: Numerology, noise_figure: float, n_prb_total: int | None = None) -> float:
    """SINR (dB) of a transmission on ``n_prb`` PRBs.

    With ``n_prb_total`` the transmit PSD is flat over ``n_prb_total`` PRBs and
    only the allocated share of ``sample.rx_power`` carries the TB. Without it
    the whole received power is counted against the allocation's noise.
    """
    signal = sample.rx_power
    if n_prb_total is not None:
        signal += 10.0 * math.log10(n_prb / n_prb_total)
    return signal - noise_dbm(n_prb, num, noise_figure)


def sinr_threshold(mcs: McsEntry, gap_db: float = DEFAULT_BLER_GAP_DB) -> float:
    return gap_db + 10.0 * math.log10(2.0**mcs.spectral_efficiency - 1.0)


def bler(sinr_db: float, mcs: McsEntry, gap_db: float = DEFAULT_BLER_GAP_DB,
         slope: float = DEFAULT_BLER_SLOPE) -> float:
    x = slope * (sinr_db - sinr_threshold(mcs, gap_db))
    if x >= 0:
        e = math.exp(-x)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(x))


class Phy:
    """Per-link PHY: fixed MCS, allocation and noise; errors drawn from ``phy-error``."""

    def __init__(self, config, rng):
        self.num = Numerology(config.numerology_index)
        self.mcs = config.mcs_entry()
        self.tb_bits, self.n_prb = tbs_and_prb(config.payload_size, self.mcs, self.num, config.bandwidth)
        self.n_prb_total = self.num.total_prbs(config.bandwidth)
        self.psd = str(config.power_allocation) == "psd"
        self.noise_figure = config.noise_figure
        self.gap_db = config.bler_gap_db
        self.slope = config.bler_slope_per_db
        self._gen = rng.generator("phy-error")
        self._draws: list[float] = []
        self._cached: tuple = (None, 0.0)
        self.bler_override: float | None = None

    def sinr(self, sample) -> float:
        return sinr(sample, self.n_prb, self.num, self.noise_figure,
                    self.n_prb_total if self.psd else None)

    def bler(self, sample) -> float:
        if self.bler_override is not None:
            return self.bler_override
        last, p = self._cached
        if sample is not last:  # samples are shared for a whole coherence segment
            p = bler(self.sinr(sample), self.mcs, self.gap_db, self.slope)
            self._cached = (sample, p)
        return p

    def _uniform(self) -> float:
        # batched draws give the same sequence as one-at-a-time calls
        if not self._draws:
            self._draws = self._gen.random(4096).tolist()[::-1]
        return self._draws.pop()

    def transmit(self, tb: TransportBlock, sample) -> bool:
        p_err = self.bler(sample)
        # one uniform per TB regardless of p_err keeps outcomes coupled across configs
        return not (self._uniform() < p_err)
