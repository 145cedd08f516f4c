"""Geometry, building blockage and 3GPP TR 38.901 UMa path loss."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError
from .phy import RadioProfile, sensitivity

SPEED_OF_LIGHT = 3.0e8
ENV_HEIGHT = 1.0  # h_E of the UMa breakpoint distance, m
MIN_D2D = 10.0
MAX_D2D = 5000.0
SIGMA_LOS = 4.0
SIGMA_NLOS = 6.0


class Position(NamedTuple):
    x: float
    y: float
    z: float = 1.5


@dataclass(frozen=True)
class BuildingGrid:
    area_side: float
    building_side: float
    pitch: float
    building_height: float = 20.0

    def __post_init__(self):
        if self.area_side <= 0:
            raise ConfigError("area side must be positive")
        if self.building_side < 0:
            raise ConfigError("building side must be non-negative")
        if self.pitch <= 0 or self.pitch < self.building_side:
            raise ConfigError(
                f"building pitch ({self.pitch}) must be positive and >= building side ({self.building_side})"
            )

    def lattice(self) -> tuple[float, int]:
        """Offset of the first building centre and the centre count per axis."""
        span = self.area_side - self.building_side
        n = int(math.floor(span / self.pitch + 1e-9)) + 1 if span >= 0 else 0
        offset = (self.area_side - (n - 1) * self.pitch) / 2 if n else 0.0
        return offset, n

    def footprints(self) -> np.ndarray:
        """(K, 4) array of xmin, ymin, xmax, ymax; empty when buildings have no area."""
        if self.building_side == 0:
            return np.empty((0, 4))
        c = np.array([(p.x, p.y) for p in building_centers(self)]).reshape(-1, 2)
        h = self.building_side / 2
        return np.column_stack([c[:, 0] - h, c[:, 1] - h, c[:, 0] + h, c[:, 1] + h])


def building_centers(grid: BuildingGrid) -> list[Position]:
    """Square lattice of building centres, centred in the area.

    Only footprints lying wholly inside the area are produced.
    """
    offset, n = grid.lattice()
    coords = [offset + k * grid.pitch for k in range(n)]
    return [Position(x, y, grid.building_height / 2) for x in coords for y in coords]


def indoor_mask(xy: np.ndarray, grid: BuildingGrid) -> np.ndarray:
    """True where a point lies strictly inside some footprint."""
    xy = np.atleast_2d(np.asarray(xy, dtype=float)).reshape(-1, 2)
    offset, n = grid.lattice()
    h = grid.building_side / 2
    if n == 0 or h == 0 or len(xy) == 0:
        return np.zeros(len(xy), dtype=bool)
    k = np.clip(np.rint((xy - offset) / grid.pitch), 0, n - 1)
    centre = offset + k * grid.pitch
    return (np.abs(xy - centre) < h).all(axis=1)


def _first_row_above(lo, offset, pitch, h):
    # smallest lattice index j with centre_j + h > lo
    return np.maximum(np.floor((lo - h - offset) / pitch) + 1, 0)


def blocked(a_xy: np.ndarray, b_xy: np.ndarray, grid: BuildingGrid) -> np.ndarray:
    """For M segments a[i]->b[i], whether any footprint interior is crossed.

    Walks the lattice columns overlapped by each segment and checks, per
    column, whether the y-range swept inside that column's open slab meets
    an open footprint row. Touching a footprint edge is not a crossing.
    """
    a_xy = np.atleast_2d(np.asarray(a_xy, dtype=float)).reshape(-1, 2)
    b_xy = np.atleast_2d(np.asarray(b_xy, dtype=float)).reshape(-1, 2)
    m = len(a_xy)
    offset, n = grid.lattice()
    h = grid.building_side / 2
    pitch = grid.pitch
    if m == 0 or n == 0 or h == 0:
        return np.zeros(m, dtype=bool)
    # canonical endpoint order keeps the test exactly symmetric and dx >= 0
    swap = (a_xy[:, 0] > b_xy[:, 0]) | ((a_xy[:, 0] == b_xy[:, 0]) & (a_xy[:, 1] > b_xy[:, 1]))
    p = np.where(swap[:, None], b_xy, a_xy)
    q = np.where(swap[:, None], a_xy, b_xy)
    px, py = p[:, 0], p[:, 1]
    dx, dy = q[:, 0] - px, q[:, 1] - py

    k_lo = _first_row_above(px, offset, pitch, h)
    # largest k with centre_k - h < qx
    k_hi = np.minimum(np.ceil((q[:, 0] + h - offset) / pitch) - 1, n - 1)
    count = (k_hi - k_lo + 1).astype(int)
    count = np.maximum(count, 0)
    width = int(count.max()) if m else 0
    if width == 0:
        return np.zeros(m, dtype=bool)
    cols = k_lo[:, None] + np.arange(width)[None, :]
    valid = np.arange(width)[None, :] < count[:, None]
    cx = offset + cols * pitch
    vertical = (dx == 0)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        ta = np.where(vertical, 0.0, (cx - h - px[:, None]) / dx[:, None])
        tb = np.where(vertical, 1.0, (cx + h - px[:, None]) / dx[:, None])
    t0 = np.maximum(ta, 0.0)
    t1 = np.minimum(tb, 1.0)
    y0 = py[:, None] + t0 * dy[:, None]
    y1 = py[:, None] + t1 * dy[:, None]
    ylo = np.minimum(y0, y1)
    yhi = np.maximum(y0, y1)
    j = _first_row_above(ylo, offset, pitch, h)
    hit = valid & (j <= n - 1) & (offset + j * pitch - h < yhi)
    return hit.any(axis=1)


def is_los(a: Position, b: Position, grid: BuildingGrid) -> bool:
    return not bool(blocked(np.array([a[:2]]), np.array([b[:2]]), grid)[0])



def breakpoint_distance(fc_ghz: float, h_bs: float, h_ut: float) -> float:
    return 4 * (h_bs - ENV_HEIGHT) * (h_ut - ENV_HEIGHT) * fc_ghz * 1e9 / SPEED_OF_LIGHT


def uma_path_loss(fc_ghz, d2d, h_bs, h_ut, los):
    """Vectorised UMa path loss (dB); ``d2d`` below 10 m is clamped."""
    d2d = np.maximum(np.asarray(d2d, dtype=float), MIN_D2D)
    h_bs = np.asarray(h_bs, dtype=float)
    h_ut = np.asarray(h_ut, dtype=float)
    d3d = np.sqrt(d2d**2 + (h_bs - h_ut) ** 2)
    d_bp = np.maximum(breakpoint_distance(fc_ghz, h_bs, h_ut), 0.0)
    f_term = 20 * np.log10(fc_ghz)
    pl1 = 28.0 + 22 * np.log10(d3d) + f_term
    with np.errstate(divide="ignore"):
        pl2 = 28.0 + 40 * np.log10(d3d) + f_term - 9 * np.log10(d_bp**2 + (h_bs - h_ut) ** 2)
    pl_los = np.where(d2d <= d_bp, pl1, pl2)
    pl_nlos = 13.54 + 39.08 * np.log10(d3d) + f_term - 0.6 * (h_ut - 1.5)
    return np.where(los, pl_los, np.maximum(pl_los, pl_nlos))


def _split_heights(a: Position, b: Position):
    return max(a.z, b.z), min(a.z, b.z)


def path_loss(fc_ghz: float, a: Position, b: Position, los: bool) -> float:
    h_bs, h_ut = _split_heights(a, b)
    d2d = math.hypot(a.x - b.x, a.y - b.y)
    return float(uma_path_loss(fc_ghz, d2d, h_bs, h_ut, los))


def validity_issues(fc_ghz: float, d2d: float, h_bs: float, h_ut: float) -> list[str]:
    issues = []
    if not 0.5 <= fc_ghz <= 100:
        issues.append(f"carrier {fc_ghz} GHz outside 0.5-100 GHz")
    if d2d < MIN_D2D:
        issues.append(f"2-D distance {d2d:.1f} m clamped to {MIN_D2D} m")
    if d2d > MAX_D2D:
        issues.append(f"2-D distance {d2d:.1f} m beyond {MAX_D2D} m")
    if not 1.5 <= h_ut <= 22.5:
        issues.append(f"UT height {h_ut} m outside 1.5-22.5 m")
    if h_bs != 25.0:
        issues.append(f"BS height {h_bs} m differs from the nominal 25 m")
    return issues


def los_probability(d2d):
    """UMa LOS probability for outdoor terminals below 13 m."""
    d = np.maximum(np.asarray(d2d, dtype=float), 1e-9)
    p = 18.0 / d + np.exp(-d / 63.0) * (1 - 18.0 / d)
    return np.where(d <= 18.0, 1.0, p)


@dataclass(frozen=True)
class LinkState:
    los: bool
    distance_2d: float
    distance_3d: float
    path_loss: float
    shadowing: float = 0.0
    o2i_loss: float = 0.0

    @property
    def effective_loss(self) -> float:
        return self.path_loss + self.shadowing + self.o2i_loss


def received_power(tx_power: float, g_tx: float, g_rx: float, link: LinkState) -> float:
    return tx_power + g_tx + g_rx - link.effective_loss


def in_coverage(p_r: float, profile: RadioProfile, sf: int, bw: float) -> bool:
    return p_r >= sensitivity(profile, sf, bw)
