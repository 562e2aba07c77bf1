"""Large-scale V2V propagation: link state, pathloss, blockage, shadowing, absorption, array gain.

Coefficients follow the 3GPP V2X channel model family for 6-100 GHz
(``fc`` in GHz, ``d`` in m):

=================  ===========================================
highway LOS/NLOSv  32.4 + 20 log10(d) + 20 log10(fc)
urban LOS/NLOSv    38.77 + 16.7 log10(d) + 18.2 log10(fc)
urban NLOS         36.85 + 30 log10(d) + 18.9 log10(fc)
=================  ===========================================

NLOSv adds a vehicle blockage loss drawn once per coherence segment. State,
blockage and shadowing are held constant over a coherence segment whose length
is the shadowing decorrelation distance of the current state; the platoon moves
at a common speed, so a segment lasts ``d_corr / speed`` seconds.
"""
from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass
from statistics import NormalDist

from .config import Scenario

log = logging.getLogger(__name__)

_STD = NormalDist()


class LinkState(str, enum.Enum):
    LOS = "LOS"
    NLOSV = "NLOSv"
    NLOS = "NLOS"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class PathlossLaw:
    intercept: float
    distance_coef: float
    freq_coef: float

    def __call__(self, d: float, fc: float) -> float:
        return self.intercept + self.distance_coef * math.log10(d) + self.freq_coef * math.log10(fc)


HIGHWAY_LOS = PathlossLaw(32.4, 20.0, 20.0)
URBAN_LOS = PathlossLaw(38.77, 16.7, 18.2)
URBAN_NLOS = PathlossLaw(36.85, 30.0, 18.9)

SHADOW_SIGMA_DB = {LinkState.LOS: 3.0, LinkState.NLOSV: 3.0, LinkState.NLOS: 4.0}
DECORRELATION_M = {LinkState.LOS: 10.0, LinkState.NLOSV: 13.0, LinkState.NLOS: 13.0}

BLOCKAGE_SIGMA_DB = 4.5

# oxygen absorption; only the 60 GHz band is non-negligible
OXYGEN_BAND_GHZ = (57.0, 66.0)
OXYGEN_DB_PER_KM = 15.0

MIN_DISTANCE_M = 1.0


def _clamp(distance: float) -> float:
    if distance < MIN_DISTANCE_M:
        log.warning("distance %.3g m below %g m, clamped", distance, MIN_DISTANCE_M)
        return MIN_DISTANCE_M
    return distance


# ---------------------------------------------------------------- link state


def los_probability(scenario: Scenario, d: float) -> float:
    if scenario == Scenario.HIGHWAY:
        if d <= 475.0:
            return min(1.0, 2.1013e-6 * d * d - 0.002 * d + 1.0193)
        return max(0.0, 0.54 - 0.001 * (d - 475.0))
    return min(1.0, 1.05 * math.exp(-0.0114 * d))


def state_probabilities(scenario: Scenario, d: float) -> dict[LinkState, float]:
    p_los = los_probability(scenario, d)
    if scenario == Scenario.HIGHWAY:
        return {LinkState.LOS: p_los, LinkState.NLOSV: 1.0 - p_los, LinkState.NLOS: 0.0}
    # urban vehicle blockage probability, log-normal shaped in distance
    p_v = math.exp(-((math.log(d) - 5.0063) ** 2) / 2.4544) / (0.0312 * d)
    p_v = min(1.0 - p_los, max(0.0, p_v))
    return {LinkState.LOS: p_los, LinkState.NLOSV: p_v, LinkState.NLOS: max(0.0, 1.0 - p_los - p_v)}


def state_from_uniform(scenario: Scenario, d: float, u: float) -> LinkState:
    p = state_probabilities(scenario, d)
    if u < p[LinkState.LOS]:
        return LinkState.LOS
    if scenario == Scenario.HIGHWAY or u < p[LinkState.LOS] + p[LinkState.NLOSV]:
        return LinkState.NLOSV
    return LinkState.NLOS


def sample_link_state(scenario: Scenario, distance: float, rng) -> LinkState:
    d = _clamp(distance)
    return state_from_uniform(scenario, d, rng.uniform("channel-state"))


# ---------------------------------------------------------------- losses


def pathloss(state: LinkState, scenario: Scenario, distance: float, fc: float) -> float:
    """Pathloss in dB, excluding vehicle blockage."""
    d = max(distance, MIN_DISTANCE_M)
    if scenario == Scenario.HIGHWAY:
        return HIGHWAY_LOS(d, fc)
    if state == LinkState.NLOS:
        return URBAN_NLOS(d, fc)
    return URBAN_LOS(d, fc)


def blockage_mean(distance: float) -> float:
    return max(0.0, 9.0 + 15.0 * math.log10(max(distance, MIN_DISTANCE_M)) - 41.0)


def truncated_normal_from_uniform(u: float, mu: float, sigma: float) -> float:
    """Inverse-CDF draw of Normal(mu, sigma) conditioned on being >= 0."""
    lo = _STD.cdf(-mu / sigma)
    p = lo + u * (1.0 - lo)
    p = min(max(p, 1e-300), 1.0 - 1e-16)
    return max(0.0, mu + sigma * _STD.inv_cdf(p))


def blockage_loss(distance: float, rng) -> float:
    return truncated_normal_from_uniform(rng.uniform("blockage"), blockage_mean(distance), BLOCKAGE_SIGMA_DB)


def shadowing(state: LinkState, prev_value: float | None, delta_distance: float, rng) -> float:
    """Next shadowing value (dB, positive means extra loss) of the AR(1) process."""
    sigma = SHADOW_SIGMA_DB[state]
    z = rng.normal("shadowing")
    if prev_value is None:
        return sigma * z
    rho = math.exp(-delta_distance / DECORRELATION_M[state])
    return rho * prev_value + math.sqrt(1.0 - rho * rho) * sigma * z


def absorption_rate(fc: float) -> float:
    lo, hi = OXYGEN_BAND_GHZ
    return OXYGEN_DB_PER_KM if lo <= fc <= hi else 0.0


def atmospheric_absorption(fc: float, distance: float) -> float:
    return absorption_rate(fc) * distance / 1000.0


# ---------------------------------------------------------------- antennas


@dataclass(frozen=True)
class UpaConfig:
    rows: int = 4
    cols: int = 4
    alignment: str = "ideal"
    element_gain_dbi: float = 0.0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("UPA rows and cols must be >= 1")
        if self.alignment != "ideal":
            raise ValueError(f"unsupported beam alignment {self.alignment!r}")


def beamforming_gain(upa: UpaConfig) -> tuple[float, float]:
    g = 10.0 * math.log10(upa.rows * upa.cols) + upa.element_gain_dbi
    return g, g


# ---------------------------------------------------------------- composition


@dataclass(frozen=True, slots=True)
class ChannelSample:
    time_ms: float
    state: LinkState
    pathloss: float
    blockage_loss: float
    shadowing: float
    absorption: float
    bf_gain_tx: float
    bf_gain_rx: float
    tx_power: float
    rx_power: float


def compose(time_ms, state, pl, blk, sh, absorb, g_tx, g_rx, tx_power) -> ChannelSample:
    rx = tx_power + g_tx + g_rx - pl - blk - sh - absorb
    return ChannelSample(time_ms, state, pl, blk, sh, absorb, g_tx, g_rx, tx_power, rx)


class ChannelProcess:
    """Piecewise-constant link realization for one run, advanced lazily in time."""

    def __init__(self, config, rng, record: bool = False):
        self.config = config
        self.rng = rng
        self.scenario = config.scenario
        self.distance = _clamp(config.distance)
        self.fc = config.carrier_freq
        self.speed = config.speed
        self.gains = beamforming_gain(
            UpaConfig(config.upa_rows, config.upa_cols, element_gain_dbi=config.element_gain_dbi)
        )
        self.absorption = atmospheric_absorption(self.fc, self.distance)
        self.seg_end_ns = 0
        self.current: ChannelSample | None = None
        self._shadow: float | None = None
        self._last_len_m = 0.0
        self.segments: list[ChannelSample] | None = [] if record else None

    def _new_segment(self, start_ns: int) -> None:
        c = self.config
        state = state_from_uniform(self.scenario, self.distance, self.rng.uniform("channel-state"))
        blk = blockage_loss(self.distance, self.rng) if state == LinkState.NLOSV else 0.0
        self._shadow = shadowing(state, self._shadow, self._last_len_m, self.rng)
        sh = self._shadow if c.shadowing_enabled else 0.0
        if c.pathloss_override_db is not None:
            pl, blk = c.pathloss_override_db, 0.0
        else:
            pl = pathloss(state, self.scenario, self.distance, self.fc)
        seg_len = DECORRELATION_M[state]
        self._last_len_m = seg_len
        self.seg_end_ns = start_ns + int(round(seg_len / self.speed * 1e9))
        self.current = compose(start_ns / 1e6, state, pl, blk, sh, self.absorption, *self.gains, c.tx_power)
        if self.segments is not None:
            self.segments.append(self.current)

    def sample(self, t_ns: int) -> ChannelSample:
        while self.current is None or t_ns >= self.seg_end_ns:
            self._new_segment(self.seg_end_ns)
        return self.current


def channel_sample(config, slot_time_ms: float, process: ChannelProcess) -> ChannelSample:
    return process.sample(int(round(slot_time_ms * 1e6)))


CHANNEL_COLUMNS = ("time_ms", "state", "pathloss_db", "blockage_db", "shadowing_db",
                   "absorption_db", "rx_power_dbm")


def write_channel_csv(samples, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CHANNEL_COLUMNS)
        for s in samples:
            w.writerow([f"{s.time_ms:.6f}", s.state.value, f"{s.pathloss:.6f}", f"{s.blockage_loss:.6f}",
                        f"{s.shadowing:.6f}", f"{s.absorption:.6f}", f"{s.rx_power:.6f}"])
