"""Seeded, immutable deployments and their frozen link tables.

Randomness comes from numpy's PCG64 bit generator. Every named stream is
seeded with ``SeedSequence(base_seed, spawn_key=(run_index, stream_id))``.
This makes each stream a pure function of the seed, the run index and the
stream name, and the same on every platform.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .config import Architecture, ExperimentConfig
from .errors import ConfigError
from .phy import EU868, ISM2G4, Band
from .propagation import (
    MAX_D2D,
    MIN_D2D,
    SIGMA_LOS,
    SIGMA_NLOS,
    BuildingGrid,
    LinkState,
    Position,
    blocked,
    indoor_mask,
    los_probability,
    uma_path_loss,
)

GATEWAY = -1

STREAMS = {
    "placement_eds": 0,
    "placement_relays": 1,
    "shadow_ed_gw": 2,
    "shadow_relay_gw": 3,
    "shadow_ed_relay": 4,
    "mac_jitter": 5,
    "channel": 6,
    "los": 7,
}


def stream(base_seed: int, run_index: int, name: str) -> np.random.Generator:
    ss = np.random.SeedSequence(base_seed, spawn_key=(run_index, STREAMS[name]))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class LinkClass:
    """Propagation outcome for a batch of ordered (src, dst) pairs."""

    name: str
    band: Band
    src: np.ndarray
    dst: np.ndarray
    los: np.ndarray
    d2d: np.ndarray
    d3d: np.ndarray
    path_loss: np.ndarray
    shadowing: np.ndarray
    o2i: np.ndarray
    p_r: np.ndarray
    out_of_validity: int = 0


class LinkTable:
    def __init__(self, classes: list[LinkClass]):
        self.classes = {c.name: c for c in classes}
        self._index = {}
        for c in classes:
            for i, key in enumerate(zip(c.src.tolist(), c.dst.tolist())):
                self._index[key] = (c, i)
        self.power = {key: float(c.p_r[i]) for key, (c, i) in self._index.items()}

    def __getitem__(self, key: tuple[int, int]) -> float:
        return self.power[key]

    def __contains__(self, key) -> bool:
        return key in self.power

    def state(self, src: int, dst: int) -> LinkState:
        c, i = self._index[(src, dst)]
        return LinkState(bool(c.los[i]), float(c.d2d[i]), float(c.d3d[i]),
                         float(c.path_loss[i]), float(c.shadowing[i]), float(c.o2i[i]))

    @property
    def validity_warnings(self) -> dict[str, int]:
        return {name: c.out_of_validity for name, c in self.classes.items()}


@dataclass(frozen=True, eq=False)
class Scenario:
    config: ExperimentConfig
    run_index: int
    gateway: Position
    ed_xy: np.ndarray
    ed_indoor: np.ndarray
    relay_xy: np.ndarray
    relay_indoor: np.ndarray
    grid: BuildingGrid
    links: LinkTable = field(repr=False)

    @property
    def n_eds(self) -> int:
        return len(self.ed_xy)

    @property
    def n_relays(self) -> int:
        return len(self.relay_xy)

    def relay_id(self, k: int) -> int:
        return self.n_eds + k

    def rng(self, name: str) -> np.random.Generator:
        return stream(self.config.base_seed, self.run_index, name)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for arr in (self.ed_xy, self.ed_indoor, self.relay_xy, self.relay_indoor):
            h.update(np.ascontiguousarray(arr).tobytes())
        for name in sorted(self.links.classes):
            c = self.links.classes[name]
            h.update(name.encode())
            h.update(np.ascontiguousarray(c.p_r).tobytes())
        return h.hexdigest()


def _link_class(name, band: Band, cfg: ExperimentConfig, src_ids, dst_ids, src_xy, dst_xy,
                src_h, dst_h, src_indoor, dst_indoor, p_tx, g_tx, g_rx, grid,
                shadow_rng, los_rng) -> LinkClass:
    m = len(src_ids)
    d2d = np.hypot(src_xy[:, 0] - dst_xy[:, 0], src_xy[:, 1] - dst_xy[:, 1])
    h_bs = np.maximum(src_h, dst_h)
    h_ut = np.minimum(src_h, dst_h)
    if cfg.los_model == "geometric":
        los = ~blocked(src_xy, dst_xy, grid)
    else:
        los = los_rng.random(m) < los_probability(d2d)
        los &= ~(src_indoor | dst_indoor)
    pl = uma_path_loss(band.carrier_frequency, d2d, h_bs, h_ut, los)
    d3d = np.sqrt(np.maximum(d2d, MIN_D2D) ** 2 + (h_bs - h_ut) ** 2)
    z = shadow_rng.standard_normal(m)
    shadow = z * np.where(los, SIGMA_LOS, SIGMA_NLOS) if cfg.shadowing else np.zeros(m)
    o2i = cfg.o2i_loss * (src_indoor.astype(float) + dst_indoor.astype(float))
    p_r = p_tx + g_tx + g_rx - (pl + shadow + o2i)
    bad = (d2d < MIN_D2D) | (d2d > MAX_D2D) | (h_bs != 25.0) | (h_ut < 1.5) | (h_ut > 22.5)
    return LinkClass(name, band, np.asarray(src_ids), np.asarray(dst_ids), los, d2d, d3d,
                     pl, shadow, o2i, p_r, int(bad.sum()))


def generate(config: ExperimentConfig, run_index: int) -> Scenario:
    """Deterministic deployment for ``(config.base_seed, run_index)``."""
    config.validate()
    if run_index < 0:
        raise ConfigError("run_index must be non-negative")
    grid = BuildingGrid(config.area_side, config.building_side, config.building_pitch,
                        config.building_height)
    a = config.area_side
    n, r = config.n_eds, config.n_relays

    ed_xy = stream(config.base_seed, run_index, "placement_eds").uniform(0.0, a, size=(n, 2))
    relay_xy = stream(config.base_seed, run_index, "placement_relays").uniform(0.0, a, size=(r, 2))
    ed_indoor = indoor_mask(ed_xy, grid) if n else np.zeros(0, dtype=bool)
    relay_indoor = indoor_mask(relay_xy, grid) if r else np.zeros(0, dtype=bool)
    gw = Position(a / 2, a / 2, config.h_gw)
    gw_xy = np.array([[gw.x, gw.y]])

    def rng(name):
        return stream(config.base_seed, run_index, name)

    classes = []
    hn = config.h_node
    los_rng = rng("los")
    if config.architecture in (Architecture.SUBGHZ, Architecture.ISM2G4):
        band = EU868 if config.architecture is Architecture.SUBGHZ else ISM2G4
        classes.append(_link_class(
            "ed_gw", band, config, np.arange(n), np.full(n, GATEWAY), ed_xy,
            np.repeat(gw_xy, n, axis=0), np.full(n, hn), np.full(n, gw.z), ed_indoor,
            np.zeros(n, dtype=bool), config.ed_tx_power, config.gain_ed, config.gain_gw,
            grid, rng("shadow_ed_gw"), los_rng))
    else:
        relay_ids = n + np.arange(r)
        classes.append(_link_class(
            "relay_gw", EU868, config, relay_ids, np.full(r, GATEWAY), relay_xy,
            np.repeat(gw_xy, r, axis=0), np.full(r, hn), np.full(r, gw.z), relay_indoor,
            np.zeros(r, dtype=bool), config.relay_tx_power, config.gain_relay, config.gain_gw,
            grid, rng("shadow_relay_gw"), los_rng))
        ii, kk = np.meshgrid(np.arange(n), np.arange(r), indexing="ij")
        ii, kk = ii.ravel(), kk.ravel()
        classes.append(_link_class(
            "ed_relay", ISM2G4, config, ii, n + kk, ed_xy[ii], relay_xy[kk],
            np.full(ii.size, hn), np.full(ii.size, hn), ed_indoor[ii], relay_indoor[kk],
            config.ed_tx_power, config.gain_ed, config.gain_relay,
            grid, rng("shadow_ed_relay"), los_rng))

    return Scenario(config, run_index, gw, ed_xy, ed_indoor, relay_xy, relay_indoor, grid,
                    LinkTable(classes))
