import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from analysis.fom import FomInputs, fom_ja


def test_published_operating_point():
    res = fom_ja(FomInputs(23.62e-12, 131.8e-6, 0.034))
    assert round(res.fom_ja_db, 1) == -236.0
    assert res.fom_db == pytest.approx(res.fom_ja_db - 10 * math.log10(0.034))


@pytest.mark.parametrize("sigma,power,area", [
    (0.0, 1e-3, 1.0),
    (1e-12, 0.0, 1.0),
    (1e-12, 1e-3, -1.0),
    (math.nan, 1e-3, 1.0),
    (1e-12, math.inf, 1.0),
])
def test_rejects_non_positive_inputs(sigma, power, area):
    with pytest.raises(ValueError):
        FomInputs(sigma, power, area)


@given(st.floats(min_value=1e-15, max_value=1e-9))
def test_doubling_jitter_adds_6_db(sigma):
    a = fom_ja(FomInputs(sigma, 1e-3, 1.0)).fom_ja_db
    b = fom_ja(FomInputs(2 * sigma, 1e-3, 1.0)).fom_ja_db
    assert b - a == pytest.approx(20 * math.log10(2))


def test_reference_units():
    # 1 ps, 1 mW, 1 mm^2 -> -240 dB
    assert fom_ja(FomInputs(1e-12, 1e-3, 1.0)).fom_ja_db == pytest.approx(-240.0)


@given(sigma=st.floats(min_value=1e-15, max_value=1e-9), power=st.floats(min_value=1e-6, max_value=1.0),
       area=st.floats(min_value=1e-3, max_value=10.0), k=st.floats(min_value=1.01, max_value=100.0))
def test_more_power_or_area_is_worse(sigma, power, area, k):
    base = fom_ja(FomInputs(sigma, power, area))
    more_power = fom_ja(FomInputs(sigma, k * power, area))
    more_area = fom_ja(FomInputs(sigma, power, k * area))
    assert more_power.fom_ja_db > base.fom_ja_db and more_power.fom_db > base.fom_db
    assert more_area.fom_ja_db > base.fom_ja_db
    assert more_area.fom_db == pytest.approx(base.fom_db)
