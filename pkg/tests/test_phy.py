import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mhlora.errors import ConfigError, PayloadSizeError
from mhlora.phy import (
    BW_EU868,
    BW_ISM2G4,
    EU868,
    ISM2G4,
    SX1272,
    SX1280,
    CaptureTable,
    RadioParams,
    max_payload,
    sensitivity,
    symbol_duration,
    time_on_air,
)


def eu(sf, **kw):
    return RadioParams(EU868, sf, BW_EU868, **kw)


def ism(sf, **kw):
    return RadioParams(ISM2G4, sf, BW_ISM2G4, tx_power=12.5, **kw)


@pytest.mark.parametrize("params,expected", [
    (eu(7), 1.024e-3),
    (eu(12), 32.768e-3),
    (ism(7), 128 / 203000),
])
def test_symbol_duration(params, expected):
    assert symbol_duration(params) == pytest.approx(expected, rel=1e-12)


def test_symbol_duration_203k_hand_value():
    assert symbol_duration(ism(7)) * 1e3 == pytest.approx(0.63054, abs=1e-5)


def test_toa_sf7_10_bytes_hand_value():
    # 8 preamble + 4.25 + 8 + ceil((80-28+28+16)/28)*5 = 40.25 symbols
    assert time_on_air(eu(7), 10) == pytest.approx(40.25 * 1.024e-3, abs=1e-12)
    assert time_on_air(eu(7), 10) * 1e3 == pytest.approx(41.216, abs=1e-9)


def test_toa_sf12_uses_low_data_rate_optimisation():
    # 32.768 ms symbols > 16 ms, so the denominator is 4*(12-2) = 40
    n_payload = 8 + math.ceil((8 * 51 - 48 + 28 + 16) / 40) * 5
    assert time_on_air(eu(12), 51) == pytest.approx((12.25 + n_payload) * 32.768e-3, abs=1e-12)


@pytest.mark.parametrize("nbytes", [0, -3])
def test_toa_rejects_empty_payload(nbytes):
    with pytest.raises(PayloadSizeError):
        time_on_air(eu(7), nbytes)


def test_toa_rejects_oversize_payload():
    with pytest.raises(PayloadSizeError):
        time_on_air(eu(12), 52)
    assert time_on_air(eu(12), 51) > 0


@pytest.mark.parametrize("sf,limit", [(5, 222), (6, 222), (7, 222), (8, 222), (9, 115),
                                      (10, 51), (11, 51), (12, 51)])
def test_max_payload(sf, limit):
    assert max_payload(sf) == limit


def test_max_payload_non_increasing():
    values = [max_payload(sf) for sf in range(7, 13)]
    assert values == sorted(values, reverse=True)


def test_sensitivity_datasheet_entries():
    assert sensitivity(SX1272, 12, BW_EU868) == -137
    assert sensitivity(SX1272, 7, BW_EU868) == -124


def test_sensitivity_missing_entry_is_config_error():
    with pytest.raises(ConfigError):
        sensitivity(SX1272, 5, BW_EU868)
    with pytest.raises(ConfigError):
        sensitivity(SX1280, 7, BW_EU868)


@pytest.mark.parametrize("profile,band,bw", [(SX1272, EU868, BW_EU868), (SX1280, ISM2G4, BW_ISM2G4)])
def test_sensitivity_strictly_decreasing_in_sf(profile, band, bw):
    values = [sensitivity(profile, sf, bw) for sf in band.spreading_factors]
    assert all(b < a for a, b in zip(values, values[1:]))


def test_band_constants():
    assert EU868.channel_count == 3 and EU868.duty_cycle_limit == 0.01
    assert ISM2G4.channel_count == 16 and ISM2G4.duty_cycle_limit is None
    assert EU868.spreading_factors == tuple(range(7, 13))
    assert ISM2G4.spreading_factors == tuple(range(5, 13))


def test_low_sf_only_on_2g4():
    with pytest.raises(ConfigError):
        RadioParams(EU868, 6, BW_EU868)
    assert ism(5).sf == 5


def test_tx_power_cap():
    with pytest.raises(ConfigError):
        RadioParams(ISM2G4, 7, BW_ISM2G4, tx_power=13.0)
    with pytest.raises(ConfigError):
        RadioParams(EU868, 7, BW_EU868, tx_power=21.0)


def test_capture_table_diagonal_extension():
    t = CaptureTable.from_diagonal({7: 1.0, 8: 2.0, 9: 3.0, 10: 4.0, 11: 5.0, 12: 6.0})
    assert t[5] == t[6] == t[7] == 1.0
    assert CaptureTable.uniform(6.0)[12] == 6.0


payloads = st.integers(min_value=1, max_value=51)


@given(sf=st.integers(7, 12), a=payloads, b=payloads)
def test_toa_monotone_in_payload(sf, a, b):
    lo, hi = sorted((a, b))
    assert time_on_air(eu(sf), lo) <= time_on_air(eu(sf), hi)


@given(nbytes=payloads, band=st.sampled_from(["eu", "ism"]))
def test_toa_strictly_increasing_in_sf(nbytes, band):
    make = eu if band == "eu" else ism
    sfs = EU868.spreading_factors if band == "eu" else ISM2G4.spreading_factors
    toas = [time_on_air(make(sf), nbytes) for sf in sfs]
    assert all(b > a for a, b in zip(toas, toas[1:]))
