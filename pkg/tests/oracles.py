"""Independent reference implementations used by the tests.

Nothing here imports simulator internals beyond plain data types, so a
shared bug cannot make an oracle agree with the code under test.
"""

from __future__ import annotations

import math


def toa_reference(sf: int, bw_hz: float, payload: int, cr: int = 1, preamble: int = 8,
                  explicit_header: bool = True, crc: bool = True) -> float:
    """LoRa frame duration from the transceiver datasheet formula."""
    t_sym = (1 << sf) / bw_hz
    ldro = t_sym * 1000.0 > 16.0
    ih = 0 if explicit_header else 1
    payload_nsym = 8 + max(
        math.ceil((8.0 * payload - 4.0 * sf + 28 + 16 * int(crc) - 20 * ih)
                  / (4.0 * (sf - 2 * int(ldro)))) * (cr + 4),
        0,
    )
    t_preamble = (preamble + 4.25) * t_sym
    return t_preamble + payload_nsym * t_sym


def segment_hits_open_box(a, b, box) -> bool:
    """Slab test: does the closed segment ab meet the open rectangle ``box``?"""
    (ax, ay), (bx, by) = a, b
    x0, y0, x1, y1 = box
    lo, hi = 0.0, 1.0
    for p, d, l, u in ((ax, bx - ax, x0, x1), (ay, by - ay, y0, y1)):
        if d == 0:
            if not l < p < u:
                return False
            continue
        t1, t2 = (l - p) / d, (u - p) / d
        if t1 > t2:
            t1, t2 = t2, t1
        lo, hi = max(lo, t1), min(hi, t2)
    return lo < hi


def brute_blocked(a, b, boxes) -> bool:
    return any(segment_hits_open_box(a, b, box) for box in boxes)


def brute_outcomes(frames, powers, gamma_db, sens):
    """Re-derive delivery for every frame by enumerating all pairs.

    ``frames`` are dicts with keys node, rx, band, channel, sf, start, end.
    ``sens(band, sf)`` returns the receiver sensitivity in dBm.
    """
    result = []
    for i, f in enumerate(frames):
        p = powers[(f["node"], f["rx"])]
        if p < sens(f["band"], f["sf"]):
            result.append(False)
            continue
        lin = 0.0
        for j, g in enumerate(frames):
            if i == j:
                continue
            same = g["band"] == f["band"] and g["channel"] == f["channel"] and g["sf"] == f["sf"]
            overlap = min(f["end"], g["end"]) - max(f["start"], g["start"]) > 0
            if same and overlap:
                lin += 10 ** (powers[(g["node"], f["rx"])] / 10)
        if lin == 0:
            result.append(True)
        else:
            result.append(p - 10 * math.log10(lin) >= gamma_db)
    return result
