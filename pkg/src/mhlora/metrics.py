"""Throughput, device energy and cross-run aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .phy import RadioProfile

LINK_CLASSES = ("ed_gw", "ed_relay", "relay_gw")
RX1_DELAY = 1.0
RX2_DELAY = 2.0


@dataclass(frozen=True)
class EnergyModel:
    supply_voltage: float
    tx_current: dict[float, float]  # dBm -> mA
    rx_current: float  # mA
    sleep_current: float  # mA
    rx_window_symbols: float = 5.0

    def __post_init__(self):
        levels = sorted(self.tx_current)
        currents = [self.tx_current[p] for p in levels]
        if min(currents + [self.rx_current, self.sleep_current]) < 0:
            raise ValueError("currents must be non-negative")
        if any(b < a for a, b in zip(currents, currents[1:])):
            raise ValueError("tx current must be non-decreasing in output power")

    @classmethod
    def from_profile(cls, profile: RadioProfile, rx_window_symbols: float = 5.0) -> EnergyModel:
        return cls(profile.supply_voltage, dict(profile.tx_current), profile.rx_current,
                   profile.sleep_current, rx_window_symbols)

    def i_tx(self, dbm: float) -> float:
        levels = sorted(self.tx_current)
        return float(np.interp(dbm, levels, [self.tx_current[p] for p in levels]))


@dataclass(frozen=True)
class DeviceLedger:
    """Seconds spent per radio state over a run of length ``total``."""

    tx_time: float
    rx_time: float
    total: float
    tx_power: float

    @property
    def sleep_time(self) -> float:
        return max(self.total - self.tx_time - self.rx_time, 0.0)


def ed_energy(ledger: DeviceLedger, model: EnergyModel) -> float:
    """Energy in mJ (mA * s * V)."""
    charge = (model.i_tx(ledger.tx_power) * ledger.tx_time
              + model.rx_current * ledger.rx_time
              + model.sleep_current * ledger.sleep_time)
    return model.supply_voltage * charge


def throughput(delivered: Iterable[tuple[int, int]], sim_time: float) -> float:
    """Delivered bits per second; ``delivered`` holds (source, payload bytes)."""
    if sim_time <= 0:
        raise ValueError("sim_time must be positive")
    return sum(8 * nbytes for _, nbytes in delivered) / sim_time


def union_length(starts, ends) -> float:
    s = np.asarray(starts, dtype=float)
    e = np.asarray(ends, dtype=float)
    keep = e > s
    s, e = s[keep], e[keep]
    if s.size == 0:
        return 0.0
    order = np.argsort(s, kind="stable")
    s, e = s[order], e[order]
    reach = np.maximum.accumulate(e)
    fresh = np.empty(s.size, dtype=bool)
    fresh[0] = True
    fresh[1:] = s[1:] > reach[:-1]
    idx = np.flatnonzero(fresh)
    block_end = np.maximum.reduceat(e, idx)
    return float((block_end - s[idx]).sum())


def class_a_ledger(tx_starts: Sequence[float], tx_ends: Sequence[float], window: float,
                   sim_time: float, tx_power: float) -> DeviceLedger:
    """Clip a transmitter's timeline to [0, sim_time] and add RX1/RX2 windows.

    Windows open 1 s and 2 s after each completed uplink. Time already spent
    transmitting is never also counted as listening.
    """
    starts = np.minimum(np.asarray(tx_starts, dtype=float), sim_time)
    ends = np.minimum(np.asarray(tx_ends, dtype=float), sim_time)
    tx = union_length(starts, ends)
    done = np.asarray(tx_ends, dtype=float)
    done = done[done <= sim_time]
    if done.size and window > 0:
        ws = np.concatenate([done + RX1_DELAY, done + RX2_DELAY])
        we = np.minimum(ws + window, sim_time)
        ws = np.minimum(ws, sim_time)
        both = union_length(np.concatenate([starts, ws]), np.concatenate([ends, we]))
        rx = both - tx
    else:
        rx = 0.0
    return DeviceLedger(tx, max(rx, 0.0), sim_time, tx_power)


def _counter():
    return {"started": 0, "delivered": 0, "lost_noise": 0, "lost_interference": 0, "in_flight": 0}


@dataclass
class RunMetrics:
    architecture: str
    sim_time: float
    delivered: list[tuple[int, int]] = field(default_factory=list)
    frames: dict[str, dict[str, int]] = field(default_factory=lambda: {c: _counter() for c in LINK_CLASSES})
    ed_ledgers: list[DeviceLedger] = field(default_factory=list)
    ed_energy_mj: np.ndarray = field(default_factory=lambda: np.zeros(0))
    relay_ledgers: list[DeviceLedger] = field(default_factory=list)
    relay_energy_mj: np.ndarray = field(default_factory=lambda: np.zeros(0))
    unserved_ed_count: int = 0
    relay_dropped_frames: int = 0
    relay_sfs: dict[int, int] = field(default_factory=dict)
    ed_sfs: dict[int, int] = field(default_factory=dict)

    @property
    def throughput(self) -> float:
        return throughput(self.delivered, self.sim_time)

    @property
    def mean_ed_energy(self) -> float:
        return float(self.ed_energy_mj.mean()) if self.ed_energy_mj.size else 0.0

    def lost(self, cause: str) -> int:
        return sum(c[cause] for c in self.frames.values())

    def summary(self) -> dict[str, float]:
        return {
            "S": self.throughput,
            "ed_energy_mJ": self.mean_ed_energy,
            "unserved_ed": float(self.unserved_ed_count),
            "frames_lost_noise": float(self.lost("lost_noise")),
            "frames_lost_interference": float(self.lost("lost_interference")),
        }


@dataclass(frozen=True)
class Stat:
    mean: float
    std: float
    ci95: float
    n: int


def describe(values: Sequence[float]) -> Stat:
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("need at least one run")
    std = float(x.std(ddof=1)) if x.size > 1 else 0.0
    return Stat(float(x.mean()), std, 1.96 * std / math.sqrt(x.size), int(x.size))


def aggregate(runs: Sequence[RunMetrics]) -> dict[str, Stat]:
    if not runs:
        raise ValueError("need at least one run")
    rows = [r.summary() for r in runs]
    return {key: describe([row[key] for row in rows]) for key in rows[0]}
