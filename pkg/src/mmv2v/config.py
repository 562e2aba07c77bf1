"""Simulation configuration, sweep specification and the ``key = value`` file format.

File format: one ``key = value`` per line, ``#`` starts a comment, list values are
comma separated (only sweep axes accept more than one value). Keys are the CLI
flag names without the leading dashes, with ``-`` replaced by ``_``
(``--distance-m`` becomes ``distance_m``). Command-line flags override file keys.
"""
from __future__ import annotations

import argparse
import enum
import itertools
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Sequence

from . import phy
from .engine import MASK64, split_seed


class ConfigError(ValueError):
    """Invalid configuration: unknown key, malformed value or violated invariant."""


class Scenario(str, enum.Enum):
    HIGHWAY = "highway"
    URBAN = "urban"

    def __str__(self) -> str:
        return self.value


class PowerAllocation(str, enum.Enum):
    # transmit PSD is flat over the carrier; SINR does not depend on n_prb
    PSD = "psd"
    # all transmit power goes into the allocated PRBs
    CONCENTRATED = "concentrated"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class SimConfig:
    scenario: Scenario = Scenario.HIGHWAY
    carrier_freq: float = 28.0  # GHz
    bandwidth: float = 100.0  # MHz
    numerology_index: int = 2
    mcs_index: int = 0
    distance: float = 100.0  # m
    speed: float = 20.0  # m/s
    payload_size: int = 100  # bytes
    inter_packet_interval: float = 1.0  # ms
    reorder_timer: float = 10.0  # ms
    harq_enabled: bool = False
    max_harq_retx: int = 3
    tx_power: float = 23.0  # dBm
    noise_figure: float = 8.0  # dB
    duration: float = 10.0  # s
    seed: int = 0
    run_id: int = 0
    # calibration knobs, documented in README
    element_gain_dbi: float = 8.0
    upa_rows: int = 4
    upa_cols: int = 4
    power_allocation: PowerAllocation = PowerAllocation.PSD
    bler_gap_db: float = phy.DEFAULT_BLER_GAP_DB
    bler_slope_per_db: float = phy.DEFAULT_BLER_SLOPE
    mcs_table: str | None = None
    # test hooks
    pathloss_override_db: float | None = None
    shadowing_enabled: bool = True

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        object.__setattr__(self, "power_allocation", PowerAllocation(self.power_allocation))
        validate(self)

    @property
    def point(self) -> tuple:
        """Identity of the sweep point (everything except seed and run_id)."""
        return tuple(getattr(self, f.name) for f in fields(self) if f.name not in ("seed", "run_id"))

    def mcs_entry(self) -> phy.McsEntry:
        return load_mcs_table(self.mcs_table)[self.mcs_index]

    def to_text(self) -> str:
        lines = []
        for key, spec in KEYS.items():
            lines.append(f"{key} = {spec.format(getattr(self, spec.field))}")
        lines.append(f"seed = {self.seed}")
        lines.append(f"run_id = {self.run_id}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SimConfig":
        values: dict[str, Any] = {}
        for lineno, key, raw in _iter_kv(text):
            if key in ("seed", "run_id"):
                values[key] = _parse_int(raw, f"line {lineno}")
                continue
            spec = _key_spec(key, f"line {lineno}")
            values[spec.field] = spec.parse_one(raw, f"line {lineno}")
        return cls(**values)


_TABLE_CACHE: dict[str | None, dict[int, phy.McsEntry]] = {}


def load_mcs_table(path: str | None) -> dict[int, phy.McsEntry]:
    if path not in _TABLE_CACHE:
        if path is None:
            _TABLE_CACHE[path] = phy.MCS_TABLE
        else:
            try:
                text = Path(path).read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read MCS table {path}: {exc}") from exc
            try:
                _TABLE_CACHE[path] = phy.parse_mcs_table(text)
            except ValueError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
    return _TABLE_CACHE[path]


def _check(cond: bool, invariant: str, **values) -> None:
    if not cond:
        shown = ", ".join(f"{k}={v}" for k, v in values.items())
        raise ConfigError(f"invariant violated: {invariant} ({shown})")


def validate(c: SimConfig) -> None:
    _check(c.distance > 0, "distance > 0", distance=c.distance)
    _check(c.bandwidth > 0, "bandwidth > 0", bandwidth=c.bandwidth)
    _check(c.duration > 0, "duration > 0", duration=c.duration)
    _check(c.inter_packet_interval > 0, "inter_packet_interval > 0", ipi=c.inter_packet_interval)
    _check(c.reorder_timer >= 0, "reorder_timer >= 0", reorder_timer=c.reorder_timer)
    _check(6.0 <= c.carrier_freq <= 100.0, "carrier_freq in [6, 100] GHz", carrier_freq=c.carrier_freq)
    _check(0 <= c.numerology_index <= 3, "numerology_index in {0..3}", numerology=c.numerology_index)
    _check(c.payload_size >= 1, "payload_size >= 1", payload_size=c.payload_size)
    _check(c.max_harq_retx >= 0, "max_harq_retx >= 0", max_retx=c.max_harq_retx)
    _check(c.speed > 0, "speed > 0", speed=c.speed)
    _check(c.upa_rows >= 1 and c.upa_cols >= 1, "upa rows, cols >= 1", rows=c.upa_rows, cols=c.upa_cols)
    _check(c.bler_slope_per_db > 0, "bler_slope_per_db > 0", slope=c.bler_slope_per_db)
    _check(0 <= c.seed <= MASK64, "seed is a 64-bit unsigned integer", seed=c.seed)
    table = load_mcs_table(c.mcs_table)
    _check(c.mcs_index in table, "mcs_index maps to a defined MCS table entry", mcs=c.mcs_index)
    try:
        phy.tbs_and_prb(c.payload_size, table[c.mcs_index], phy.Numerology(c.numerology_index), c.bandwidth)
    except phy.ResourceError as exc:
        raise ConfigError(f"invariant violated: transport block fits one slot ({exc})") from exc


# ---------------------------------------------------------------- key table


def _parse_float(raw: str, where: str) -> float:
    try:
        v = float(raw)
    except ValueError:
        raise ConfigError(f"{where}: malformed number {raw!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"{where}: value must be finite, got {raw!r}")
    return v


def _parse_int(raw: str, where: str) -> int:
    try:
        return int(raw, 0)
    except ValueError:
        raise ConfigError(f"{where}: malformed integer {raw!r}") from None


def _parse_bool(raw: str, where: str) -> bool:
    low = raw.lower()
    if low in ("on", "true", "yes", "1"):
        return True
    if low in ("off", "false", "no", "0"):
        return False
    raise ConfigError(f"{where}: expected on/off, got {raw!r}")


def _parse_enum(enum_cls):
    def parse(raw: str, where: str):
        try:
            return enum_cls(raw.lower())
        except ValueError:
            allowed = "|".join(e.value for e in enum_cls)
            raise ConfigError(f"{where}: expected one of {allowed}, got {raw!r}") from None

    return parse


def _parse_optional_float(raw: str, where: str) -> float | None:
    return None if raw.lower() in ("none", "") else _parse_float(raw, where)


def _parse_str(raw: str, where: str) -> str | None:
    return None if raw.lower() in ("none", "") else raw


def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "on" if v else "off"
    if v is None:
        return "none"
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass(frozen=True)
class KeySpec:
    field: str
    parse: Callable[[str, str], Any]
    sweepable: bool = False
    format: Callable[[Any], str] = _fmt

    def parse_one(self, raw: str, where: str):
        return self.parse(raw.strip(), where)

    def parse_list(self, raw: str, where: str) -> tuple:
        parts = [p.strip() for p in raw.split(",")]
        if any(p == "" for p in parts):
            raise ConfigError(f"{where}: empty list element in {raw!r}")
        if len(parts) > 1 and not self.sweepable:
            raise ConfigError(f"{where}: {self.field} does not accept a list")
        return tuple(self.parse(p, where) for p in parts)


KEYS: dict[str, KeySpec] = {
    "scenario": KeySpec("scenario", _parse_enum(Scenario), sweepable=True),
    "fc_ghz": KeySpec("carrier_freq", _parse_float, sweepable=True),
    "bw_mhz": KeySpec("bandwidth", _parse_float),
    "numerology": KeySpec("numerology_index", _parse_int),
    "mcs": KeySpec("mcs_index", _parse_int, sweepable=True),
    "distance_m": KeySpec("distance", _parse_float, sweepable=True),
    "speed_mps": KeySpec("speed", _parse_float),
    "payload_bytes": KeySpec("payload_size", _parse_int),
    "ipi_ms": KeySpec("inter_packet_interval", _parse_float),
    "reorder_timer_ms": KeySpec("reorder_timer", _parse_float, sweepable=True),
    "harq": KeySpec("harq_enabled", _parse_bool, sweepable=True),
    "max_retx": KeySpec("max_harq_retx", _parse_int),
    "tx_power_dbm": KeySpec("tx_power", _parse_float),
    "noise_figure_db": KeySpec("noise_figure", _parse_float),
    "duration_s": KeySpec("duration", _parse_float),
    "element_gain_dbi": KeySpec("element_gain_dbi", _parse_float),
    "upa_rows": KeySpec("upa_rows", _parse_int),
    "upa_cols": KeySpec("upa_cols", _parse_int),
    "power_allocation": KeySpec("power_allocation", _parse_enum(PowerAllocation)),
    "bler_gap_db": KeySpec("bler_gap_db", _parse_float),
    "bler_slope_per_db": KeySpec("bler_slope_per_db", _parse_float),
    "mcs_table": KeySpec("mcs_table", _parse_str),
    "pathloss_override_db": KeySpec("pathloss_override_db", _parse_optional_float),
    "shadowing": KeySpec("shadowing_enabled", _parse_bool),
}

# sweep-level keys (not SimConfig fields)
SWEEP_KEYS = {"runs", "seed"}

# axis order used by expand_sweep, outermost first
AXES = ("scenario", "carrier_freq", "mcs_index", "distance", "reorder_timer", "harq_enabled")

DEFAULT_REPLICATIONS = 50
DEFAULT_MASTER_SEED = 1


def _key_spec(key: str, where: str) -> KeySpec:
    try:
        return KEYS[key]
    except KeyError:
        raise ConfigError(f"{where}: unknown key {key!r}") from None


def _iter_kv(text: str):
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = line.split("=", 1)
        key, raw = key.strip(), raw.strip()
        if not key:
            raise ConfigError(f"line {lineno}: missing key")
        yield lineno, key, raw


# ---------------------------------------------------------------- sweeps


@dataclass(frozen=True)
class SweepSpec:
    base: SimConfig = field(default_factory=SimConfig)
    axes: dict[str, tuple] = field(default_factory=dict)
    replications: int = DEFAULT_REPLICATIONS
    master_seed: int = DEFAULT_MASTER_SEED

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError(f"invariant violated: replications >= 1 (replications={self.replications})")
        if not (0 <= self.master_seed <= MASK64):
            raise ConfigError(f"invariant violated: seed is a 64-bit unsigned integer (seed={self.master_seed})")
        for name, values in self.axes.items():
            if name not in AXES:
                raise ConfigError(f"{name} is not a sweepable field")
            if not values:
                raise ConfigError(f"sweep axis {name} is empty")

    def points(self) -> list[SimConfig]:
        """One config per sweep point (seed and run_id left at 0)."""
        names = [a for a in AXES if a in self.axes]
        combos = itertools.product(*(self.axes[a] for a in names))
        return [replace(self.base, **dict(zip(names, combo))) for combo in combos]

    def n_runs(self) -> int:
        return len(self.points()) * self.replications


def expand_sweep(spec: SweepSpec) -> list[SimConfig]:
    """Cartesian expansion, lexicographic over axes, replication index innermost.

    ``seed = split_seed(master_seed, replication)``: replication ``r`` of every
    sweep point shares a seed, so points are compared under common random numbers.
    """
    out = []
    run_id = 0
    for point in spec.points():
        for rep in range(spec.replications):
            out.append(replace(point, seed=split_seed(spec.master_seed, rep), run_id=run_id))
            run_id += 1
    return out


# ---------------------------------------------------------------- CLI


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


CLI_FLAGS = {
    "--scenario": "scenario",
    "--fc-ghz": "fc_ghz",
    "--bw-mhz": "bw_mhz",
    "--numerology": "numerology",
    "--mcs": "mcs",
    "--distance-m": "distance_m",
    "--speed-mps": "speed_mps",
    "--payload-bytes": "payload_bytes",
    "--ipi-ms": "ipi_ms",
    "--reorder-timer-ms": "reorder_timer_ms",
    "--harq": "harq",
    "--max-retx": "max_retx",
    "--tx-power-dbm": "tx_power_dbm",
    "--noise-figure-db": "noise_figure_db",
    "--duration-s": "duration_s",
    "--mcs-table": "mcs_table",
}


def build_arg_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="mmv2v",
        description="Discrete-event simulator of a two-vehicle mmWave NR sidelink platoon.",
    )
    for flag, key in CLI_FLAGS.items():
        p.add_argument(flag, dest=key, metavar=key.upper())
    p.add_argument("--runs", help="replications per sweep point (default 50)")
    p.add_argument("--seed", help="master seed (64-bit unsigned)")
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--out", help="per-run CSV output path")
    p.add_argument("--summary-out", help="per-point summary CSV output path")
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    p.add_argument("--trace", help="event trace file ({run_id} expands per run)")
    p.add_argument("--dump-channel", help="channel segment CSV ({run_id} expands per run)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def parse_config(cli_args: Sequence[str], file_text: str | None = None) -> SweepSpec:
    ns = build_arg_parser().parse_args(list(cli_args))
    if file_text is None and ns.config:
        try:
            file_text = Path(ns.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {ns.config}: {exc}") from exc

    raw: dict[str, tuple[str, str]] = {}  # key -> (value, where)
    if file_text:
        for lineno, key, value in _iter_kv(file_text):
            if key not in KEYS and key not in SWEEP_KEYS:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            raw[key] = (value, f"line {lineno}")
    for flag, key in CLI_FLAGS.items():
        value = getattr(ns, key)
        if value is not None:
            raw[key] = (value, f"flag {flag}")
    for key in ("runs", "seed"):
        value = getattr(ns, key)
        if value is not None:
            raw[key] = (value, f"flag --{key}")

    base: dict[str, Any] = {}
    axes: dict[str, tuple] = {}
    replications = DEFAULT_REPLICATIONS
    master_seed = DEFAULT_MASTER_SEED
    for key, (value, where) in raw.items():
        if key == "runs":
            replications = _parse_int(value, where)
            continue
        if key == "seed":
            master_seed = _parse_int(value, where)
            continue
        spec = KEYS[key]
        values = spec.parse_list(value, where)
        if len(values) == 1:
            base[spec.field] = values[0]
        else:
            axes[spec.field] = values

    sweep = SweepSpec(base=SimConfig(**base), axes=axes, replications=replications, master_seed=master_seed)
    sweep.points()  # every expanded point is validated on construction
    return sweep


def config_dict(c: SimConfig) -> dict[str, Any]:
    return asdict(c)
