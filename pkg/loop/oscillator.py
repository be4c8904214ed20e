"""
Behavioral 32-phase ring-oscillator VCO.

The VCO is described by its unwrapped tap-0 phase. Tap 0's differential
output is high while the phase lies in (2n*pi, (2n+1)*pi): it rises at
phase = 0 (mod 2*pi) and falls at phase = pi (mod 2*pi). Between loop
updates the frequency is constant, so every crossing time is solved in
closed form from the linear phase ramp.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, replace
from typing import List, NamedTuple, Tuple

import numpy as np
from scipy.signal import lfilter

from loop.stimulus import PulseWindow

log = logging.getLogger(__name__)

N_TAPS = 32
TWO_PI = 2.0 * math.pi
F_FLOOR = 1e3            # Hz, inst_freq never goes below this
FLICKER_SPAN = 1e3       # flicker shaping covers [corner/FLICKER_SPAN, corner]
FLICKER_PER_DECADE = 2


class Edge(enum.IntEnum):
    RISE = 1
    FALL = -1


class Transition(NamedTuple):
    time: float
    direction: Edge


@dataclass(frozen=True)
class VcoState:
    phase: float = 0.0
    t_last: float = 0.0
    coarse_code: int = 0
    v_c: float = 0.0
    flicker: Tuple[float, ...] = ()


def inst_freq(coarse_code: int, v_c: float, cfg) -> float:
    f = cfg.f_base_min + coarse_code * cfg.f_base_step + cfg.k_vco * (v_c - cfg.v_ctr)
    if f < F_FLOOR:
        log.warning("VCO frequency %.6g Hz clamped to %.3g Hz (code %d, v_c %.6g V)", f, F_FLOOR, coarse_code, v_c)
        return F_FLOOR
    return f


def tap_phase_offset(k: int) -> float:
    if not 0 <= k < N_TAPS:
        raise ValueError(f"tap index {k} outside [0, {N_TAPS})")
    return TWO_PI * k / N_TAPS


# --- phase noise ---

def _flicker_sections(noise) -> List[Tuple[float, float]]:
    """
    (corner Hz, stationary variance Hz^2) of the first-order sections whose
    sum approximates S_f(f) = vco_white_fm * corner / f over the flicker span.
    """
    fc = noise.vco_flicker_corner
    if fc <= 0 or noise.vco_white_fm <= 0:
        return []
    n = int(round(math.log10(FLICKER_SPAN) * FLICKER_PER_DECADE)) + 1
    corners = fc / FLICKER_SPAN * 10.0 ** (np.arange(n) / FLICKER_PER_DECADE)
    # equal weight per log-spaced section: plateau A_i = S_w*fc/f_i * ln10/(rho*pi/2)
    scale = math.log(10.0) / (FLICKER_PER_DECADE * math.pi / 2)
    out = []
    for fi in corners:
        plateau = noise.vco_white_fm * fc / fi * scale
        out.append((float(fi), plateau * math.pi * fi / 2))
    return out


def advance(state: VcoState, dt: float, f: float, noise=None, rng: np.random.Generator = None) -> VcoState:
    """
    Move the VCO forward by dt seconds at frequency f, adding the configured
    frequency-noise increment when noise is enabled.
    """
    if dt < 0:
        raise ValueError(f"dt must be >= 0 (got {dt!r})")
    if dt == 0:
        return state
    dphi = TWO_PI * f * dt
    flicker = state.flicker
    if noise is not None and noise.enabled and rng is not None:
        inc, flicker = phase_noise_increments(dt, 1, noise, rng, flicker)
        dphi += float(inc[0])
    return replace(state, phase=state.phase + dphi, t_last=state.t_last + dt, flicker=flicker)


def phase_noise_increments(dt: float, n: int, noise, rng: np.random.Generator,
                           flicker: Tuple[float, ...] = ()) -> Tuple[np.ndarray, Tuple[float, ...]]:
    """
    n consecutive noise-only phase increments (radians) for steps of dt and
    the flicker section states after the last step. An empty or mismatched
    `flicker` starts the sections from their stationary distribution.
    """
    out = np.zeros(n)
    if not noise.enabled:
        return out, flicker
    if noise.vco_white_fm > 0:
        out += TWO_PI * math.sqrt(noise.vco_white_fm / 2.0 * dt) * rng.standard_normal(n)
    sections = _flicker_sections(noise)
    if not sections:
        return out, flicker
    if len(flicker) != len(sections):
        flicker = tuple(math.sqrt(var) * rng.standard_normal() for _, var in sections)
    last = []
    for x0, (fi, var) in zip(flicker, sections):
        a = math.exp(-TWO_PI * fi * dt)
        x = lfilter([math.sqrt(var * (1 - a * a))], [1.0, -a], rng.standard_normal(n), zi=[a * x0])[0]
        prev = np.concatenate(([x0], x[:-1]))
        # trapezoidal phase of the section frequency over each step
        out += TWO_PI * dt * 0.5 * (prev + x)
        last.append(float(x[-1]))
    return out, tuple(last)


# --- transitions ---

def _phase_at(state: VcoState, t: float, f: float, tap: int) -> float:
    return state.phase + TWO_PI * f * (t - state.t_last) + tap_phase_offset(tap)


def polarity_at(state: VcoState, t: float, f: float, tap: int = 0) -> int:
    """
    Level entering time t: +1 high, -1 low. A crossing exactly at t is
    left to transitions_in, which reports it as the first transition.
    """
    seg = math.ceil(_phase_at(state, t, f, tap) / math.pi) - 1
    return 1 if seg % 2 == 0 else -1


def transitions_in(state: VcoState, window: PulseWindow, f: float, tap: int = 0) -> List[Transition]:
    """
    Every zero crossing of the tap's differential output inside the window,
    in time order. `state` must not be later than the window start.
    """
    phi0 = _phase_at(state, window.t_start, f, tap)
    phi1 = phi0 + TWO_PI * f * window.width
    out = []
    n = math.ceil(phi0 / math.pi)
    while n * math.pi <= phi1:
        t = window.t_start + (n * math.pi - phi0) / (TWO_PI * f)
        if t > window.t_end:
            break
        out.append(Transition(t, Edge.RISE if n % 2 == 0 else Edge.FALL))
        n += 1
    return out


def count_rising(phase0: float, phase1: float) -> int:
    """
    Rising crossings of tap 0 while the phase moves from phase0 to phase1.
    """
    return int(math.floor(phase1 / TWO_PI) - math.floor(phase0 / TWO_PI))
