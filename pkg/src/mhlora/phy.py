"""LoRa PHY arithmetic for the EU868 and 2.4 GHz bands.

Time on air follows the Semtech datasheet symbol-count formula (8-symbol
preamble plus 4.25 sync symbols, explicit header, CRC on, low data rate
optimisation when a symbol lasts longer than 16 ms).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping

import numpy as np

from .errors import ConfigError, PayloadSizeError

LDRO_SYMBOL_THRESHOLD = 16e-3  # s


class BandId(str, enum.Enum):
    EU868 = "EU868"
    ISM2G4 = "ISM2G4"


@dataclass(frozen=True)
class Band:
    id: BandId
    carrier_frequency: float  # GHz
    channel_count: int
    duty_cycle_limit: float | None
    max_tx_power: float  # dBm
    spreading_factors: tuple[int, ...]

    @property
    def min_sf(self) -> int:
        return self.spreading_factors[0]

    @property
    def max_sf(self) -> int:
        return self.spreading_factors[-1]


EU868 = Band(BandId.EU868, 0.868, 3, 0.01, 20.0, (7, 8, 9, 10, 11, 12))
ISM2G4 = Band(BandId.ISM2G4, 2.4, 16, None, 12.5, (5, 6, 7, 8, 9, 10, 11, 12))

BANDS = {EU868.id: EU868, ISM2G4.id: ISM2G4}

# Maximum MAC payload per SF (bytes). SF5/SF6 reuse the SF7 limit.
MAX_PAYLOAD = {5: 222, 6: 222, 7: 222, 8: 222, 9: 115, 10: 51, 11: 51, 12: 51}


def check_sf(band: Band, sf: int) -> None:
    if sf not in band.spreading_factors:
        raise ConfigError(f"SF{sf} is not available in band {band.id.value}")


@dataclass(frozen=True)
class RadioParams:
    band: Band
    sf: int
    bandwidth: float  # Hz
    coding_rate: int = 1  # k in 4/(4+k)
    tx_power: float = 14.0
    preamble_symbols: int = 8
    explicit_header: bool = True
    crc_on: bool = True

    def __post_init__(self):
        check_sf(self.band, self.sf)
        if not 1 <= self.coding_rate <= 4:
            raise ConfigError(f"coding rate index must be 1..4, got {self.coding_rate}")
        if self.bandwidth <= 0:
            raise ConfigError("bandwidth must be positive")
        if self.tx_power > self.band.max_tx_power:
            raise ConfigError(
                f"tx power {self.tx_power} dBm exceeds the {self.band.id.value} "
                f"limit of {self.band.max_tx_power} dBm"
            )


def symbol_duration(params: RadioParams) -> float:
    return 2**params.sf / params.bandwidth


def max_payload(sf: int) -> int:
    try:
        return MAX_PAYLOAD[sf]
    except KeyError:
        raise ConfigError(f"no payload limit for SF{sf}") from None


def payload_symbols(params: RadioParams, payload_bytes: int) -> int:
    sf = params.sf
    de = 1 if symbol_duration(params) > LDRO_SYMBOL_THRESHOLD else 0
    h = 0 if params.explicit_header else 1
    crc = 1 if params.crc_on else 0
    num = 8 * payload_bytes - 4 * sf + 28 + 16 * crc - 20 * h
    den = 4 * (sf - 2 * de)
    return 8 + max(math.ceil(num / den) * (params.coding_rate + 4), 0)


@lru_cache(maxsize=4096)
def time_on_air(params: RadioParams, payload_bytes: int) -> float:
    """Frame duration in seconds for ``payload_bytes`` of MAC payload."""
    if payload_bytes <= 0:
        raise PayloadSizeError("payload must be at least one byte")
    if payload_bytes > max_payload(params.sf):
        raise PayloadSizeError(
            f"{payload_bytes} B exceeds the SF{params.sf} limit of {max_payload(params.sf)} B"
        )
    n_sym = params.preamble_symbols + 4.25 + payload_symbols(params, payload_bytes)
    return n_sym * symbol_duration(params)


@dataclass(frozen=True)
class RadioProfile:
    """Datasheet figures for one transceiver."""

    name: str
    band: Band
    sensitivity: Mapping[tuple[int, float], float]  # (SF, BW Hz) -> dBm
    tx_current: Mapping[float, float]  # dBm -> mA
    rx_current: float  # mA
    sleep_current: float  # mA
    supply_voltage: float = 3.3

    def tx_current_at(self, dbm: float) -> float:
        levels = sorted(self.tx_current)
        return float(np.interp(dbm, levels, [self.tx_current[p] for p in levels]))


def sensitivity(profile: RadioProfile, sf: int, bw: float) -> float:
    try:
        return profile.sensitivity[(sf, bw)]
    except KeyError:
        raise ConfigError(
            f"{profile.name} has no sensitivity entry for SF{sf} at {bw:g} Hz"
        ) from None


BW_EU868 = 125_000.0
BW_ISM2G4 = 203_000.0

SX1272 = RadioProfile(
    name="SX1272",
    band=EU868,
    # SX1272 datasheet rev. 3.1, LoRa receiver table, BW 125 kHz, LnaBoost on
    sensitivity={
        (7, BW_EU868): -124.0,
        (8, BW_EU868): -127.0,
        (9, BW_EU868): -130.0,
        (10, BW_EU868): -133.0,
        (11, BW_EU868): -135.0,
        (12, BW_EU868): -137.0,
    },
    # SX1272 datasheet rev. 3.1, IDDT: RFO pin up to +13 dBm, PA_BOOST above
    tx_current={7.0: 18.0, 13.0: 28.0, 17.0: 90.0, 20.0: 125.0},
    rx_current=11.2,  # IDDR, LnaBoost on
    sleep_current=0.0001,  # IDDSL, 0.1 uA
)

SX1280 = RadioProfile(
    name="SX1280",
    band=ISM2G4,
    # SX1280 datasheet rev. 3.2, LoRa sensitivity table, BW 203 kHz
    sensitivity={
        (5, BW_ISM2G4): -109.0,
        (6, BW_ISM2G4): -111.0,
        (7, BW_ISM2G4): -115.0,
        (8, BW_ISM2G4): -118.0,
        (9, BW_ISM2G4): -121.0,
        (10, BW_ISM2G4): -124.0,
        (11, BW_ISM2G4): -127.0,
        (12, BW_ISM2G4): -130.0,
    },
    # SX1280 datasheet rev. 3.2, IDDTX with DC-DC regulator
    tx_current={0.0: 8.0, 12.5: 24.0},
    rx_current=5.5,  # IDDRX LoRa, DC-DC
    sleep_current=0.0012,  # sleep with data RAM retention
)

PROFILES = {EU868.id: SX1272, ISM2G4.id: SX1280}


def profile_with_sensitivity(profile: RadioProfile, overrides: Mapping[int, float], bw: float) -> RadioProfile:
    """Copy of ``profile`` with per-SF sensitivity overrides at bandwidth ``bw``."""
    table = dict(profile.sensitivity)
    for sf, dbm in overrides.items():
        check_sf(profile.band, sf)
        table[(sf, bw)] = float(dbm)
    return RadioProfile(
        profile.name, profile.band, table, profile.tx_current,
        profile.rx_current, profile.sleep_current, profile.supply_voltage,
    )


@dataclass(frozen=True)
class CaptureTable:
    """Co-SF capture thresholds in dB, one per SF."""

    gamma: Mapping[int, float] = field(default_factory=lambda: {sf: 6.0 for sf in range(5, 13)})

    def __post_init__(self):
        missing = set(range(5, 13)) - set(self.gamma)
        if missing:
            raise ConfigError(f"capture table lacks SFs {sorted(missing)}")

    @classmethod
    def uniform(cls, gamma_db: float) -> CaptureTable:
        return cls({sf: float(gamma_db) for sf in range(5, 13)})

    @classmethod
    def from_diagonal(cls, diagonal: Mapping[int, float]) -> CaptureTable:
        # SF5 and SF6 have no measured threshold; reuse the SF7 value
        gamma = {sf: float(diagonal[sf]) for sf in range(7, 13)}
        gamma[5] = gamma[6] = gamma[7]
        return cls(gamma)

    def __getitem__(self, sf: int) -> float:
        return self.gamma[sf]
