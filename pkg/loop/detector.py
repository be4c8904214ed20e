"""
Integrating sub-sampling phase detector merged with its loop filter.

During a pulse window the detector pushes +i_chg into C_S while the VCO
output is high and pulls -i_chg while it is low. The charge lands on the
C_S node, which is also the VCO control node; between pulses C_S shares
charge with C1 through R1.
"""
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from loop.oscillator import Transition
from loop.stimulus import PulseWindow
from model.trace import NO_TRANSITION


@dataclass(frozen=True)
class FilterState:
    v_cs: float
    v_c1: float

    @classmethod
    def at(cls, v: float) -> "FilterState":
        return cls(v, v)


@dataclass(frozen=True)
class PdResult:
    delta_q: float
    delta_v: float
    t_x_offset: float = NO_TRANSITION


def _segment(current: float, target: float, length: float, t_soft: float):
    """
    Charge and end current of one segment where the current relaxes toward `target`.
    """
    if t_soft <= 0:
        return target * length, target
    decay = math.exp(-length / t_soft)
    q = target * length + (current - target) * t_soft * (1.0 - decay)
    return q, target + (current - target) * decay


def pd_integrate(window: PulseWindow, transitions: Sequence[Transition], polarity_at_start: int,
                 i_chg: float, t_soft: float = 0.0) -> float:
    """
    Net charge (C) into the C_S node over the window. The current is
    +i_chg while the VCO output is high and -i_chg while it is low; it
    switches at every transition, instantly or with time constant t_soft.
    """
    level = 1 if polarity_at_start > 0 else -1
    current = level * i_chg
    t = window.t_start
    q = 0.0
    for tr in transitions:
        dq, current = _segment(current, level * i_chg, tr.time - t, t_soft)
        q += dq
        t = tr.time
        level = int(tr.direction)
    dq, _ = _segment(current, level * i_chg, window.t_end - t, t_soft)
    return q + dq


def pd_result(window: PulseWindow, transitions: Sequence[Transition], polarity_at_start: int, cfg) -> PdResult:
    q = pd_integrate(window, transitions, polarity_at_start, cfg.i_chg, cfg.t_soft)
    q += cfg.i_offset * window.width
    tx = transitions[0].time - window.t_start if transitions else NO_TRANSITION
    return PdResult(q, q / cfg.c_s, tx)


def pd_characteristic(delta_t, cfg):
    """
    Closed-form single-rising-transition characteristic, dV(dt) = (i_chg/c_s)*(t_pul - 2*dt),
    saturating outside [0, t_pul]. Accepts scalars or arrays.
    """
    dt = np.clip(delta_t, 0.0, cfg.t_pul)
    dv = cfg.i_chg / cfg.c_s * (cfg.t_pul - 2.0 * dt)
    return float(dv) if np.ndim(dv) == 0 else dv


def pd_gain(cfg) -> float:
    return 2.0 * cfg.i_chg / cfg.c_s


# --- loop filter ---

def filter_tau(cfg) -> float:
    return cfg.r1 * cfg.c_s * cfg.c1 / (cfg.c_s + cfg.c1)


def _relax(state: FilterState, hold_time: float, cfg) -> FilterState:
    ctot = cfg.c_s + cfg.c1
    v_inf = (cfg.c_s * state.v_cs + cfg.c1 * state.v_c1) / ctot
    tau = filter_tau(cfg)
    decay = math.exp(-hold_time / tau) if tau > 0 else 0.0
    return FilterState(v_inf + (state.v_cs - v_inf) * decay, v_inf + (state.v_c1 - v_inf) * decay)


def filter_apply(state: FilterState, delta_q: float, hold_time: float, cfg) -> FilterState:
    """
    Deposit delta_q on C_S, then let C_S and C1 share charge through R1 for hold_time.
    """
    if hold_time < 0:
        raise ValueError(f"hold_time must be >= 0 (got {hold_time!r})")
    deposited = FilterState(state.v_cs + delta_q / cfg.c_s, state.v_c1)
    if hold_time == 0:
        return deposited
    return _relax(deposited, hold_time, cfg)


def relax_average(state: FilterState, hold_time: float, cfg) -> float:
    """
    Mean v_cs while `state` relaxes for hold_time (no new charge).
    """
    if hold_time <= 0:
        return state.v_cs
    v_inf = (cfg.c_s * state.v_cs + cfg.c1 * state.v_c1) / (cfg.c_s + cfg.c1)
    tau = filter_tau(cfg)
    if tau <= 0:
        return v_inf
    return v_inf + (state.v_cs - v_inf) * tau / hold_time * (1.0 - math.exp(-hold_time / tau))


def total_charge(state: FilterState, cfg) -> float:
    return cfg.c_s * state.v_cs + cfg.c1 * state.v_c1
