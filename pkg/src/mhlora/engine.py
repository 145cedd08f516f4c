"""Discrete-event kernel: transmissions, overlap tracking and capture.

Events are ordered by ``(time, sequence)``, where the sequence number is
assigned at insertion. Equal timestamps therefore resolve the same way on
every platform.
"""

from __future__ import annotations

import enum
import heapq
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

from .config import Architecture
from .phy import (
    BW_EU868,
    EU868,
    ISM2G4,
    PROFILES,
    Band,
    BandId,
    CaptureTable,
    RadioParams,
    RadioProfile,
    max_payload,
    sensitivity,
    symbol_duration,
    time_on_air,
)
from .metrics import EnergyModel, RunMetrics, class_a_ledger, ed_energy
from .protocol import (
    DutyCycleGovernor,
    Frame,
    Record,
    RelayBuffer,
    adr_select_sf,
    form_clusters,
    orthogonalize_relay_sfs,
)
from .scenario import GATEWAY, Scenario

READY, START, END, SELF = 0, 1, 2, 3


class Cause(str, enum.Enum):
    NONE = "none"
    NO_COVERAGE = "no_coverage"
    INTERFERENCE = "interference"


class Transmission:
    __slots__ = ("tx_node", "rx", "band", "channel", "sf", "bw", "start", "end",
                 "payload_bytes", "records", "overlaps", "link_class")

    def __init__(self, tx_node, rx, band, channel, sf, bw, start, duration,
                 payload_bytes, records=(), link_class=""):
        self.tx_node = tx_node
        self.rx = rx
        self.band = band
        self.channel = channel
        self.sf = sf
        self.bw = bw
        self.start = start
        self.end = start + duration
        self.payload_bytes = payload_bytes
        self.records = records
        self.overlaps: list[Transmission] = []
        self.link_class = link_class

    @property
    def duration(self) -> float:
        return self.end - self.start

    def __repr__(self):
        return (f"Transmission(node={self.tx_node}, rx={self.rx}, {self.band.id.value}/ch{self.channel}, "
                f"SF{self.sf}, [{self.start:.6f}, {self.end:.6f}])")


@dataclass(frozen=True)
class ReceptionOutcome:
    transmission: Transmission
    delivered: bool
    failure_cause: Cause = Cause.NONE


def resolve_reception(t: Transmission, overlapping: Sequence[Transmission],
                      link_powers: Mapping[tuple[int, int], float],
                      capture: CaptureTable, profile: RadioProfile) -> ReceptionOutcome:
    """Coverage test, then same-SF SIR against the capture threshold."""
    p = link_powers[(t.tx_node, t.rx)]
    if p < sensitivity(profile, t.sf, t.bw):
        return ReceptionOutcome(t, False, Cause.NO_COVERAGE)
    # lost once the summed same-SF interference exceeds this (mW)
    limit = 10.0 ** ((p - capture[t.sf]) / 10.0)
    interference = 0.0
    for o in overlapping:
        if o is t or o.sf != t.sf or o.band is not t.band or o.channel != t.channel:
            continue
        if o.start < t.end and o.end > t.start:
            interference += 10.0 ** (link_powers[(o.tx_node, t.rx)] / 10.0)
            if interference > limit:
                break
    if interference == 0.0:
        return ReceptionOutcome(t, True)
    sir_db = p - 10.0 * math.log10(interference)
    if sir_db >= capture[t.sf]:
        return ReceptionOutcome(t, True)
    return ReceptionOutcome(t, False, Cause.INTERFERENCE)


def schedule_ed_traffic(phase: float, period: float, sim_time: float, nbytes: int) -> Iterator[tuple[float, int]]:
    """Payload generation instants ``phase + k*period`` within [0, sim_time]."""
    k = 0
    while True:
        t = phase + k * period
        if t > sim_time:
            return
        yield t, nbytes
        k += 1


class Medium:
    """Frames currently on air, grouped by (band, channel, SF).

    Only frames sharing all three can interfere, so each frame records
    overlaps with its own group alone.
    """

    def __init__(self):
        self.active: dict[tuple[BandId, int, int], list[Transmission]] = defaultdict(list)

    def start(self, tx: Transmission) -> None:
        on_air = self.active[(tx.band.id, tx.channel, tx.sf)]
        for o in on_air:
            if o.end > tx.start:
                o.overlaps.append(tx)
                tx.overlaps.append(o)
        on_air.append(tx)

    def end(self, tx: Transmission) -> None:
        self.active[(tx.band.id, tx.channel, tx.sf)].remove(tx)

    def in_flight(self) -> list[Transmission]:
        return [t for lst in self.active.values() for t in lst]


class Kernel:
    """Event queue plus the shared medium. Subclasses supply the node logic."""

    def __init__(self, sim_time: float, link_powers, capture: CaptureTable, profiles=PROFILES):
        self.sim_time = sim_time
        self.links = link_powers
        self.capture = capture
        self.profiles = profiles
        self.medium = Medium()
        self._heap: list = []
        self._seq = 0
        self.now = 0.0
        self.outcomes: list[ReceptionOutcome] = []
        self.keep_outcomes = False

    def push(self, time: float, kind: int, obj) -> None:
        heapq.heappush(self._heap, (time, self._seq, kind, obj))
        self._seq += 1

    def begin(self, tx: Transmission) -> None:
        self.medium.start(tx)
        self.push(tx.end, END, tx)
        self.on_start(tx)

    def loop(self) -> None:
        heap = self._heap
        t_end = self.sim_time
        while heap:
            time, _, kind, obj = heapq.heappop(heap)
            if time > t_end:
                break
            self.now = time
            if kind == END:
                self.medium.end(obj)
                outcome = resolve_reception(obj, obj.overlaps, self.links, self.capture,
                                            self.profiles[obj.band.id])
                if self.keep_outcomes:
                    self.outcomes.append(outcome)
                self.on_end(outcome)
            elif kind == START:
                self.begin(obj)
            elif kind == READY:
                self.on_ready(obj)
            else:
                self.on_self(obj)

    def on_start(self, tx):
        pass

    def on_end(self, outcome):
        pass

    def on_ready(self, obj):
        pass

    def on_self(self, obj):
        pass


def replay(frames: Sequence[Transmission], link_powers, capture: CaptureTable,
           profiles=PROFILES, sim_time: float = math.inf) -> list[ReceptionOutcome]:
    """Push pre-built transmissions through the kernel; outcomes in end order."""
    k = Kernel(sim_time, link_powers, capture, profiles)
    k.keep_outcomes = True
    for f in frames:
        f.overlaps = []
        k.push(f.start, START, f)
    k.loop()
    return k.outcomes


class Radio:
    """One transmitting radio: an ED, or a relay's EU868 side."""

    __slots__ = ("node", "band", "params", "rx", "governor", "channel", "busy", "waiting",
                 "phase", "period", "next_k", "nbytes", "buffer", "starts", "ends",
                 "link_class", "pending_tx", "_toa")

    def __init__(self, node, params: RadioParams, rx, channel, link_class, duty_limit):
        self.node = node
        self.band = params.band
        self.params = params
        self.rx = rx
        self.governor = DutyCycleGovernor(duty_limit)
        self.channel = channel  # None: pick uniformly per frame
        self.busy = False
        self.waiting = False
        self.phase = 0.0
        self.period = 1.0
        self.next_k = 0
        self.nbytes = 0
        self.buffer: RelayBuffer | None = None
        self.starts: list[float] = []
        self.ends: list[float] = []
        self.link_class = link_class
        # frame handed to the governor whose start lies in the future
        self.pending_tx: Transmission | None = None
        self._toa: dict[int, float] = {}

    def toa(self, nbytes: int) -> float:
        v = self._toa.get(nbytes)
        if v is None:
            v = self._toa[nbytes] = time_on_air(self.params, nbytes)
        return v


class _ChannelPicker:
    """Uniform channel draws, fetched from the RNG in blocks."""

    def __init__(self, rng: np.random.Generator, block: int = 4096):
        self.rng = rng
        self.block = block
        self._buf: dict[int, list[int]] = {}

    def pick(self, count: int) -> int:
        buf = self._buf.get(count)
        if not buf:
            buf = self._buf[count] = self.rng.integers(count, size=self.block).tolist()[::-1]
        return buf.pop()


class NetworkSim(Kernel):
    def __init__(self, scenario: Scenario):
        cfg = scenario.config
        self.cfg = cfg
        self.scenario = scenario
        super().__init__(cfg.sim_time, scenario.links, CaptureTable.uniform(cfg.capture_gamma))
        self.metrics = RunMetrics(cfg.architecture.value, cfg.sim_time)
        self.channels = _ChannelPicker(scenario.rng("channel"))
        self.jitter = scenario.rng("mac_jitter")
        self.ed_radios: dict[int, Radio] = {}
        self.relay_radios: dict[int, Radio] = {}
        self.relay_phase: dict[int, float] = {}
        self._setup()

    def _params(self, band: Band, sf: int, power: float) -> RadioParams:
        bw = self.cfg.bw_eu868 if band is EU868 else self.cfg.bw_ism2g4
        return RadioParams(band, sf, bw, self.cfg.coding_rate, power, self.cfg.preamble_symbols)

    def _bw(self, band: Band) -> float:
        return self.cfg.bw_eu868 if band is EU868 else self.cfg.bw_ism2g4

    def _setup(self) -> None:
        cfg, sc = self.cfg, self.scenario
        n, r = sc.n_eds, sc.n_relays
        # phases drawn for every ED and relay in a fixed order, used or not
        ed_phase = self.jitter.uniform(0.0, cfg.t_u, size=n)
        relay_phase = self.jitter.uniform(0.0, cfg.t_u, size=r)
        m = self.metrics

        if cfg.architecture is Architecture.PROPOSAL:
            eu = PROFILES[EU868.id]
            ism = PROFILES[ISM2G4.id]
            relay_ids = [sc.relay_id(k) for k in range(r)]
            gw_power = {rid: self.links[(rid, GATEWAY)] for rid in relay_ids}
            cands = {}
            for rid in relay_ids:
                sf = adr_select_sf(gw_power[rid], eu, self._bw(EU868), cfg.adr_margin)
                if sf is not None:
                    cands[rid] = sf
            relay_sf = orthogonalize_relay_sfs(cands, gw_power, eu, self._bw(EU868))
            m.relay_sfs = dict(relay_sf)
            connected = sorted(relay_sf)
            if connected and n:
                cols = [rid - n for rid in connected]
                powers = sc.links.classes["ed_relay"].p_r.reshape(n, r)[:, cols]
            else:
                powers = np.zeros((n, len(connected)))
            clusters, unserved = form_clusters(connected, powers, ism, self._bw(ISM2G4),
                                               cfg.adr_margin, ed_ids=range(n))
            m.unserved_ed_count = len(unserved)
            for cl in clusters:
                for ed in cl.member_ed_ids:
                    sf = cl.ed_sf[ed]
                    radio = Radio(ed, self._params(ISM2G4, sf, cfg.ed_tx_power), cl.relay_id,
                                  cl.channel_2g4, "ed_relay", None)
                    self._periodic(radio, ed_phase[ed])
                    self.ed_radios[ed] = radio
                    m.ed_sfs[ed] = sf
            for rid in connected:
                sf = relay_sf[rid]
                radio = Radio(rid, self._params(EU868, sf, cfg.relay_tx_power), GATEWAY, None,
                              "relay_gw", EU868.duty_cycle_limit)
                radio.buffer = RelayBuffer(rid, max_payload(sf), cfg.relay_queue_limit)
                self.relay_radios[rid] = radio
                if cfg.relay_self_traffic:
                    self.relay_phase[rid] = relay_phase[rid - n]
                    self.push(relay_phase[rid - n], SELF, (radio, 0))
        else:
            band = EU868 if cfg.architecture is Architecture.SUBGHZ else ISM2G4
            prof = PROFILES[band.id]
            unserved = 0
            for ed in range(n):
                sf = adr_select_sf(self.links[(ed, GATEWAY)], prof, self._bw(band), cfg.adr_margin)
                if sf is None:
                    unserved += 1
                    continue
                radio = Radio(ed, self._params(band, sf, cfg.ed_tx_power), GATEWAY, None,
                              "ed_gw", band.duty_cycle_limit)
                self._periodic(radio, ed_phase[ed])
                self.ed_radios[ed] = radio
                m.ed_sfs[ed] = sf
            m.unserved_ed_count = unserved

    def _periodic(self, radio: Radio, phase: float) -> None:
        radio.phase = float(phase)
        radio.period = self.cfg.t_u
        radio.nbytes = self.cfg.b_u
        radio.waiting = True
        self.push(radio.phase, READY, radio)

    # node behaviour -------------------------------------------------------

    def try_send(self, radio: Radio) -> Transmission | None:
        """Start (or schedule) the radio's next frame if it is idle."""
        if radio.busy:
            return None
        now = self.now
        if radio.buffer is not None:
            if not radio.buffer.frame_queue:
                return None
            frame = radio.buffer.frame_queue.popleft()
            nbytes, records = frame.nbytes, frame.records
        else:
            gen = radio.phase + radio.next_k * radio.period
            if gen > now:
                if not radio.waiting:
                    radio.waiting = True
                    self.push(gen, READY, radio)
                return None
            radio.next_k += 1
            nbytes = radio.nbytes
            records = (Record(radio.node, nbytes, gen),)
        toa = radio.toa(nbytes)
        start = radio.governor.gate(now, toa)
        channel = radio.channel
        if channel is None:
            channel = self.channels.pick(radio.band.channel_count)
        tx = Transmission(radio.node, radio.rx, radio.band, channel, radio.params.sf,
                          radio.params.bandwidth, start, toa, nbytes, records, radio.link_class)
        radio.busy = True
        if start > now:
            radio.pending_tx = tx
            self.push(start, START, tx)
        else:
            self.begin(tx)
        return tx

    def on_start(self, tx: Transmission) -> None:
        self.metrics.frames[tx.link_class]["started"] += 1
        radio = self._radio(tx.tx_node)
        radio.pending_tx = None
        radio.starts.append(tx.start)
        radio.ends.append(tx.end)

    def _radio(self, node: int) -> Radio:
        r = self.ed_radios.get(node)
        return r if r is not None else self.relay_radios[node]

    def on_ready(self, radio: Radio) -> None:
        radio.waiting = False
        self.try_send(radio)

    def on_self(self, item) -> None:
        radio, k = item
        t = self.now
        self._to_relay(radio, Record(radio.node, self.cfg.b_u, t))
        nxt = self.relay_phase[radio.node] + (k + 1) * self.cfg.t_u
        self.push(nxt, SELF, (radio, k + 1))

    def _to_relay(self, radio: Radio, record: Record) -> Transmission | None:
        if radio.buffer.enqueue(record):
            return self.try_send(radio)
        return None

    def deliver_to_relay(self, outcome: ReceptionOutcome) -> Transmission | None:
        """Hand a received ED frame to its relay's buffer.

        Returns the relay transmission this triggers, if any. Its start is
        either now or the instant the duty-cycle governor allows.
        """
        if not outcome.delivered:
            return None
        tx = outcome.transmission
        relay = self.relay_radios[tx.rx]
        started = None
        for rec in tx.records:
            started = self._to_relay(relay, rec) or started
        return started

    def on_end(self, outcome: ReceptionOutcome) -> None:
        tx = outcome.transmission
        counter = self.metrics.frames[tx.link_class]
        if outcome.delivered:
            counter["delivered"] += 1
            if tx.rx == GATEWAY:
                self.metrics.delivered.append((tx.tx_node, tx.payload_bytes))
            else:
                self.deliver_to_relay(outcome)
        elif outcome.failure_cause is Cause.NO_COVERAGE:
            counter["lost_noise"] += 1
        else:
            counter["lost_interference"] += 1
        radio = self._radio(tx.tx_node)
        radio.busy = False
        self.try_send(radio)

    # results --------------------------------------------------------------

    def finish(self) -> RunMetrics:
        m = self.metrics
        cfg = self.cfg
        T = cfg.sim_time
        for tx in self.medium.in_flight():
            m.frames[tx.link_class]["in_flight"] += 1
        n = self.scenario.n_eds
        ed_model = EnergyModel.from_profile(
            PROFILES[(EU868 if cfg.architecture is Architecture.SUBGHZ else ISM2G4).id],
            cfg.rx_window_symbols)
        ledgers = []
        for ed in range(n):
            radio = self.ed_radios.get(ed)
            if radio is None:
                ledgers.append(class_a_ledger([], [], 0.0, T, cfg.ed_tx_power))
                continue
            window = cfg.rx_window_symbols * symbol_duration(radio.params)
            ledgers.append(class_a_ledger(radio.starts, radio.ends, window, T, cfg.ed_tx_power))
        m.ed_ledgers = ledgers
        m.ed_energy_mj = np.array([ed_energy(l, ed_model) for l in ledgers])
        relay_model = EnergyModel.from_profile(PROFILES[EU868.id], cfg.rx_window_symbols)
        ism = PROFILES[ISM2G4.id]
        # the 2.4 GHz side of a relay listens for the whole run
        listen_mj = ism.supply_voltage * ism.rx_current * T
        rl = []
        for rid, radio in sorted(self.relay_radios.items()):
            rl.append(class_a_ledger(radio.starts, radio.ends, 0.0, T, cfg.relay_tx_power))
            m.relay_dropped_frames += radio.buffer.dropped_frames
        m.relay_ledgers = rl
        m.relay_energy_mj = np.array([ed_energy(l, relay_model) + listen_mj for l in rl])
        return m


def run(scenario: Scenario) -> RunMetrics:
    sim = NetworkSim(scenario)
    sim.loop()
    return sim.finish()
