"""
Digital coarse FLL: count VCO cycles over N reference periods, compare the
count against two thresholds and walk the current-DAC code one step at a
time until the count lands in the dead zone, then disengage for good.
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import List, Tuple

from model.errors import ConfigError

log = logging.getLogger(__name__)

_EPS = 1e-9


@dataclass(frozen=True)
class FllState:
    code: int
    engaged: bool
    count_lo: int
    count_hi: int
    max_code: int
    periods_elapsed: int = 0
    cycle_count: int = 0


def threshold_counts(band_lo: float, band_hi: float, mult_M: int, window_N: int) -> Tuple[int, int]:
    return (int(math.ceil(band_lo * mult_M * window_N - _EPS)),
            int(math.floor(band_hi * mult_M * window_N + _EPS)))


def thresholds(cfg) -> Tuple[int, int]:
    lo, hi = threshold_counts(cfg.fll_band_lo, cfg.fll_band_hi, cfg.mult_M, cfg.fll_window_N)
    if lo >= hi:
        n = cfg.fll_window_N
        while threshold_counts(cfg.fll_band_lo, cfg.fll_band_hi, cfg.mult_M, n)[0] >= \
                threshold_counts(cfg.fll_band_lo, cfg.fll_band_hi, cfg.mult_M, n)[1]:
            n += 1
        raise ConfigError(f"FLL band ({cfg.fll_band_lo}, {cfg.fll_band_hi}) of f_out cannot be resolved "
                          f"with fll_window_N = {cfg.fll_window_N}: count_lo {lo} >= count_hi {hi}; "
                          f"minimum N is {n}")
    return lo, hi


def initial_state(cfg, code: int = None) -> FllState:
    lo, hi = thresholds(cfg)
    code = cfg.fll_start_code if code is None else code
    if not 0 <= code <= cfg.max_code:
        raise ValueError(f"DAC code {code} outside [0, {cfg.max_code}]")
    return FllState(code=code, engaged=True, count_lo=lo, count_hi=hi, max_code=cfg.max_code)


def count_cycles(f_vco: float, f_ref: float, N: int) -> int:
    """
    Complete VCO periods in N reference periods.
    """
    return int(math.floor(N * f_vco / f_ref + _EPS))


def fll_step(state: FllState, count: int) -> FllState:
    if not state.engaged:
        return state
    if count < state.count_lo:
        if state.code >= state.max_code:
            log.warning("FLL DAC saturated at code %d with count %d < %d", state.code, count, state.count_lo)
            return state
        return replace(state, code=state.code + 1)
    if count > state.count_hi:
        if state.code <= 0:
            log.warning("FLL DAC saturated at code 0 with count %d > %d", count, state.count_hi)
            return state
        return replace(state, code=state.code - 1)
    log.info("FLL disengaged at code %d (count %d in [%d, %d])", state.code, count, state.count_lo, state.count_hi)
    return replace(state, engaged=False)


def tick(state: FllState, rising_edges: int, window_N: int) -> FllState:
    """
    Accumulate one reference period of VCO cycles; act on every N-th period
    while engaged. After disengage the counter keeps running for monitoring only.
    """
    st = replace(state, periods_elapsed=state.periods_elapsed + 1, cycle_count=state.cycle_count + rising_edges)
    if st.periods_elapsed < window_N:
        return st
    count = st.cycle_count
    st = replace(st, periods_elapsed=0, cycle_count=0)
    return fll_step(st, count) if st.engaged else st


def acquire(cfg, start_code: int = None) -> List[int]:
    """
    Codes visited by the FLL driven by the analytic cycle count at v_ctr,
    ending with the code it disengages on.
    """
    from loop.oscillator import inst_freq

    st = initial_state(cfg, start_code)
    path = [st.code]
    for _ in range(cfg.max_code + 2):
        count = count_cycles(inst_freq(st.code, cfg.v_ctr, cfg), cfg.f_ref, cfg.fll_window_N)
        nxt = fll_step(st, count)
        if not nxt.engaged:
            return path
        if nxt.code == st.code:
            raise ConfigError(f"FLL stuck at saturated code {st.code}: the DAC range does not cover the band")
        st = nxt
        path.append(st.code)
    raise ConfigError("FLL did not reach the dead zone within 2^dac_bits steps")
