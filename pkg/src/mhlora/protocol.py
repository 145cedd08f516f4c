"""LoRaWAN behaviour: clustering, ADR, relay aggregation and duty cycle."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .errors import PayloadSizeError
from .phy import Band, RadioProfile, sensitivity


class Record(NamedTuple):
    origin: int
    nbytes: int
    t: float


class Frame(NamedTuple):
    nbytes: int
    records: tuple[Record, ...]


@dataclass
class Cluster:
    relay_id: int
    member_ed_ids: list[int]
    channel_2g4: int
    ed_sf: dict[int, int] = field(default_factory=dict)


def adr_select_sf(p_r: float, profile: RadioProfile, bw: float, margin: float = 10.0) -> int | None:
    """Lowest SF whose sensitivity plus ``margin`` is met by ``p_r``.

    Falls back to the highest SF when only its bare sensitivity is met and
    returns ``None`` when the link has no coverage at all.
    """
    sfs = profile.band.spreading_factors
    for sf in sfs:
        if p_r >= sensitivity(profile, sf, bw) + margin:
            return sf
    if p_r >= sensitivity(profile, sfs[-1], bw):
        return sfs[-1]
    return None


def form_clusters(
    relay_ids: Sequence[int],
    powers: np.ndarray,
    profile: RadioProfile,
    bw: float,
    margin: float = 10.0,
    ed_ids: Sequence[int] | None = None,
) -> tuple[list[Cluster], list[int]]:
    """Attach every ED to its strongest relay.

    ``powers[i, k]`` is the uplink power of ED ``ed_ids[i]`` at relay
    ``relay_ids[k]``. Ties go to the lower relay position. Channels follow
    relay order. Returns the clusters and the ids of EDs that reach no relay.
    """
    powers = np.asarray(powers, dtype=float).reshape(-1, len(relay_ids)) if len(relay_ids) else np.asarray(powers)
    n = powers.shape[0] if powers.ndim == 2 else 0
    ed_ids = list(range(n)) if ed_ids is None else list(ed_ids)
    clusters = [Cluster(rid, [], ch) for ch, rid in enumerate(relay_ids)]
    unserved = []
    if not len(relay_ids):
        return clusters, list(ed_ids)
    best = np.argmax(powers, axis=1)
    for i, ed in enumerate(ed_ids):
        k = int(best[i])
        sf = adr_select_sf(float(powers[i, k]), profile, bw, margin)
        if sf is None:
            unserved.append(ed)
            continue
        clusters[k].member_ed_ids.append(ed)
        clusters[k].ed_sf[ed] = sf
    return clusters, unserved


def orthogonalize_relay_sfs(
    candidates: Mapping[int, int],
    link_powers: Mapping[int, float],
    profile: RadioProfile,
    bw: float,
) -> dict[int, int]:
    """Spread relays over distinct SFs where coverage allows.

    Relays are visited in ascending id order. A relay whose SF is taken
    moves to the smallest free SF above its candidate that still meets the
    bare sensitivity; if none exists it keeps its candidate.
    """
    sfs = profile.band.spreading_factors
    taken: set[int] = set()
    out = {}
    for rid in sorted(candidates):
        sf = candidates[rid]
        if sf in taken:
            for alt in sfs:
                if alt > sf and alt not in taken and link_powers[rid] >= sensitivity(profile, alt, bw):
                    sf = alt
                    break
        out[rid] = sf
        taken.add(sf)
    return out


class RelayBuffer:
    """Aggregates ED records into frames of at most ``max_frame_bytes``."""

    def __init__(self, relay_id: int, max_frame_bytes: int, queue_limit: int = 10_000):
        self.relay_id = relay_id
        self.max_frame_bytes = max_frame_bytes
        self.queue_limit = queue_limit
        self.pending_bytes = 0
        self.pending_records: list[Record] = []
        self.frame_queue: deque[Frame] = deque()
        self.dropped_frames = 0
        self.enqueued_bytes = 0

    def _seal(self) -> Frame:
        frame = Frame(self.pending_bytes, tuple(self.pending_records))
        self.pending_bytes = 0
        self.pending_records = []
        if len(self.frame_queue) >= self.queue_limit:
            self.dropped_frames += 1
        else:
            self.frame_queue.append(frame)
        return frame

    def enqueue(self, record: Record) -> list[Frame]:
        """Add a record; return the frames sealed by this call (usually none)."""
        if record.nbytes > self.max_frame_bytes:
            raise PayloadSizeError(
                f"record of {record.nbytes} B exceeds the {self.max_frame_bytes} B frame limit"
            )
        sealed = []
        if self.pending_bytes + record.nbytes > self.max_frame_bytes:
            sealed.append(self._seal())
        self.pending_records.append(record)
        self.pending_bytes += record.nbytes
        self.enqueued_bytes += record.nbytes
        if self.pending_bytes == self.max_frame_bytes:
            sealed.append(self._seal())
        return sealed


def relay_enqueue(buffer: RelayBuffer, record: Record) -> list[Frame]:
    return buffer.enqueue(record)


def pick_uplink_channel(band: Band, rng: np.random.Generator) -> int:
    return int(rng.integers(band.channel_count))


class DutyCycleGovernor:
    """Per-radio duty-cycle bookkeeping; ``limit=None`` means unrestricted."""

    def __init__(self, limit: float | None = 0.01, next_allowed_time: float = 0.0):
        if limit is not None and not 0 < limit <= 1:
            raise ValueError("duty cycle limit must be in (0, 1]")
        self.limit = limit
        self.next_allowed_time = next_allowed_time

    def gate(self, ready_time: float, toa: float) -> float:
        if toa <= 0:
            raise ValueError("time on air must be positive")
        start = max(ready_time, self.next_allowed_time)
        limit = 1.0 if self.limit is None else self.limit
        self.next_allowed_time = start + toa + toa * (1.0 / limit - 1.0)
        return start


def duty_cycle_gate(gov: DutyCycleGovernor, ready_time: float, toa: float) -> float:
    return gov.gate(ready_time, toa)
