"""
Transient engine: one loop update per reference edge.

While the FLL is engaged the fine control is pinned at v_ctr and the VCO
runs on the DAC code alone. After the FLL disengages, every reference edge
opens a pulse window, the detector integrates the VCO transitions inside
it, the charge lands on C_S and relaxes into C1 until the next edge. All
intra-cycle solutions are exact, so the run is paced by reference edges
rather than by a fixed time step.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from loop.detector import FilterState, filter_apply, pd_result, relax_average
from loop.fll import FllState, initial_state, tick
from loop.oscillator import (TWO_PI, Edge, VcoState, advance, count_rising, inst_freq,
                             polarity_at, transitions_in)
from loop.stimulus import ref_edges, window_for_edge
from model.config import SimConfig, validate
from model.errors import AnalysisError, ConfigError, SimulationError
from model.trace import NO_TRANSITION, CycleRecord, records_to_frame

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LockReport:
    locked: bool
    lock_time: float
    f_error_ppm: float
    residual_dv: float
    lock_cycle: int = -1


@dataclass(frozen=True)
class RunResult:
    trace: List[CycleRecord]
    lock: LockReport
    final_state: Tuple[VcoState, FilterState, FllState]

    def frame(self) -> pd.DataFrame:
        return records_to_frame(self.trace)


def _streams(seed: int) -> Tuple[np.random.Generator, np.random.Generator]:
    """
    Independent generators for reference jitter and VCO noise.
    """
    jitter, vco = np.random.SeedSequence(int(seed) & (2 ** 64 - 1)).spawn(2)
    return np.random.default_rng(jitter), np.random.default_rng(vco)


def reference_edges(cfg: SimConfig, n: int, rng: np.random.Generator) -> np.ndarray:
    """
    n edge times: the jittered reference of ref_edges, moved by the
    configured frequency step and phase step.
    """
    t_ref = cfg.t_ref
    jitter = cfg.noise.ref_jitter_rms if cfg.noise.enabled else 0.0
    edges = ref_edges(cfg.f_ref, n, jitter, rng)
    k = np.arange(n, dtype=np.float64)
    shift = np.zeros(n)
    if cfg.ref_step_time > 0 and cfg.ref_step_ppm != 0:
        k_step = math.ceil(cfg.ref_step_time / t_ref - 1e-9)
        later = k >= k_step
        shift[later] = (k[later] - k_step) * t_ref * (1.0 / (1.0 + cfg.ref_step_ppm * 1e-6) - 1.0)
    if cfg.ref_phase_step_time > 0 and cfg.ref_phase_step != 0:
        shift[k * t_ref + shift >= cfg.ref_phase_step_time] -= cfg.ref_phase_step / (TWO_PI * cfg.f_ref)
    return edges + shift


def target_frequency(cfg: SimConfig) -> float:
    """
    Output frequency the loop should settle to at the end of the run.
    """
    f_ref = cfg.f_ref
    if cfg.ref_step_time > 0 and cfg.ref_step_ppm != 0 and cfg.ref_step_time < cfg.duration:
        f_ref *= 1.0 + cfg.ref_step_ppm * 1e-6
    return cfg.mult_M * f_ref


class _CaptureAid:
    """
    Upward sweep current that runs until the lock edge stops drifting.

    Whole VCO periods inside the window integrate to zero, so the detector
    can only push back with the charge of the remainder r = t_pul mod T_out,
    at most i_chg*min(r, T_out - r). The sweep charge is scaled the same way.
    """

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        t_out = 1.0 / cfg.f_out
        r = math.fmod(cfg.t_pul, t_out)
        self.q = cfg.i_sweep * min(r, t_out - r)
        self.active = self.q > 0
        self.streak = 0
        self.last: Optional[float] = None

    def charge(self) -> float:
        return self.q if self.active else 0.0

    def observe(self, cycle: int, fall_offset: Optional[float]):
        if not self.active:
            return
        cfg = self.cfg
        if fall_offset is None:
            self.streak, self.last = 0, None
            return
        steady = self.last is not None and abs(fall_offset - self.last) < cfg.capture_tol
        self.streak = self.streak + 1 if steady else 0
        self.last = fall_offset
        if self.streak >= cfg.capture_cycles:
            self.active = False
            log.info("phase captured at cycle %d; capture aid off", cycle)


def run_transient(cfg: SimConfig) -> RunResult:
    violations = validate(cfg)
    if violations:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(map(str, violations)))

    jitter_rng, vco_rng = _streams(cfg.seed)
    n = cfg.n_cycles
    edges = reference_edges(cfg, n + 1, jitter_rng)
    noise = cfg.noise

    fll = initial_state(cfg)
    filt = FilterState.at(cfg.v_ctr)
    vco = VcoState(phase=0.0, t_last=float(edges[0]), coarse_code=fll.code, v_c=cfg.v_ctr)
    aid = _CaptureAid(cfg)
    trace: List[CycleRecord] = []

    for k in range(n):
        t0, t1 = float(edges[k]), float(edges[k + 1])
        period = t1 - t0
        phase_start = vco.phase
        tx = NO_TRANSITION

        if fll.engaged:
            f = inst_freq(fll.code, cfg.v_ctr, cfg)
            vco = advance(vco, period, f, noise, vco_rng)
            fll = tick(fll, count_rising(phase_start, vco.phase), cfg.fll_window_N)
            v_avg, dv = cfg.v_ctr, 0.0
        else:
            window = window_for_edge(t0, cfg.t_pul)
            f_w = inst_freq(fll.code, filt.v_cs, cfg)
            transitions = transitions_in(vco, window, f_w)
            pd = pd_result(window, transitions, polarity_at(vco, t0, f_w), cfg)
            q = pd.delta_q + aid.charge()
            vco = advance(vco, cfg.t_pul, f_w)

            hold = period - cfg.t_pul
            v_window = filt.v_cs
            v_hold = relax_average(FilterState(filt.v_cs + q / cfg.c_s, filt.v_c1), hold, cfg)
            filt = filter_apply(filt, q, hold, cfg)
            vco = advance(vco, hold, inst_freq(fll.code, v_hold, cfg), noise, vco_rng)
            fll = tick(fll, count_rising(phase_start, vco.phase), cfg.fll_window_N)

            v_avg = (v_window * cfg.t_pul + v_hold * hold) / period
            dv = q / cfg.c_s
            tx = pd.t_x_offset
            falls = [tr.time - t0 for tr in transitions if tr.direction == Edge.FALL]
            aid.observe(k, falls[0] if falls else None)

        vco = replace(vco, coarse_code=fll.code, v_c=filt.v_cs)
        f_inst = (vco.phase - phase_start) / (TWO_PI * period)
        if not (math.isfinite(f_inst) and math.isfinite(filt.v_cs) and math.isfinite(filt.v_c1)):
            raise SimulationError(k, f"non-finite loop state (f={f_inst!r}, v_cs={filt.v_cs!r}, v_c1={filt.v_c1!r})")
        trace.append(CycleRecord(k, t0, v_avg, f_inst, fll.code, fll.engaged, dv, tx))

    lock = lock_report(trace, cfg)
    if lock.locked:
        log.info("locked at %.6g s, frequency error %.3g ppm", lock.lock_time, lock.f_error_ppm)
    else:
        log.info("no lock within %.6g s", cfg.duration)
    return RunResult(trace, lock, (vco, filt, fll))


# --- trace views ---

TraceLike = Union[Sequence[CycleRecord], pd.DataFrame]


def _columns(trace: TraceLike):
    if isinstance(trace, pd.DataFrame):
        return (trace["t_s"].to_numpy(np.float64), trace["f_Hz"].to_numpy(np.float64),
                trace["fll_engaged"].to_numpy().astype(bool), trace["dv_pd_V"].to_numpy(np.float64))
    return (np.array([r.t for r in trace], dtype=np.float64),
            np.array([r.f_inst for r in trace], dtype=np.float64),
            np.array([r.fll_engaged for r in trace], dtype=bool),
            np.array([r.delta_v_pd for r in trace], dtype=np.float64))


def _moving_sum(x: np.ndarray, n: int) -> np.ndarray:
    c = np.concatenate(([0], np.cumsum(x)))
    return c[n:] - c[:-n]


def detect_lock(trace: TraceLike, f_target: float, tol_ppm: float, window_cycles: int,
                avg_cycles: int = 1) -> LockReport:
    """
    Locked when some run of window_cycles consecutive records stays within
    tol_ppm of f_target with the FLL disengaged; lock_time is the start of
    the first such run.

    With avg_cycles > 1 each record is judged on the mean frequency of the
    avg_cycles records starting at it, and the FLL must stay disengaged over
    all of them.
    """
    if window_cycles < 2:
        raise ValueError(f"window_cycles must be >= 2 (got {window_cycles})")
    if avg_cycles < 1:
        raise ValueError(f"avg_cycles must be >= 1 (got {avg_cycles})")
    t, f, engaged, dv = _columns(trace)
    if len(t) == 0:
        return LockReport(False, math.nan, math.nan, math.nan)
    err = (f - f_target) / f_target
    tail = slice(max(0, len(f) - window_cycles), len(f))
    f_error_ppm = float(np.mean(err[tail]) * 1e6)
    residual = float(abs(dv[-1]))
    if len(f) < avg_cycles:
        return LockReport(False, math.nan, f_error_ppm, residual)
    if avg_cycles == 1:
        ok = (np.abs(err) <= tol_ppm * 1e-6) & ~engaged
    else:
        mean_err = _moving_sum(f - f_target, avg_cycles) / avg_cycles / f_target
        ok = (np.abs(mean_err) <= tol_ppm * 1e-6) & (_moving_sum(engaged.astype(np.int64), avg_cycles) == 0)
    if len(ok) >= window_cycles:
        runs = np.convolve(ok.astype(np.int64), np.ones(window_cycles, dtype=np.int64), mode="valid")
        hits = np.flatnonzero(runs == window_cycles)
        if hits.size:
            i = int(hits[0])
            return LockReport(True, float(t[i]), f_error_ppm, residual, i)
    return LockReport(False, math.nan, f_error_ppm, residual)


def lock_averaging(cfg: SimConfig) -> int:
    """
    Records averaged per lock decision: lock_avg_cycles when set, otherwise
    1 for a noiseless run and lock_window when a noise source is active.
    """
    if cfg.lock_avg_cycles > 0:
        return cfg.lock_avg_cycles
    n = cfg.noise
    noisy = n.enabled and (n.ref_jitter_rms > 0 or n.vco_white_fm > 0)
    return cfg.lock_window if noisy else 1


def lock_report(trace: TraceLike, cfg: SimConfig) -> LockReport:
    return detect_lock(trace, target_frequency(cfg), cfg.lock_tol_ppm, cfg.lock_window, lock_averaging(cfg))


def _edge_phases(trace: TraceLike, cfg: SimConfig):
    t, f, _, _ = _columns(trace)
    if len(t) < 2:
        raise AnalysisError("need at least two trace records to rebuild the VCO phase")
    t_all = np.append(t, t[-1] + (t[-1] - t[-2]))
    excess_inc = TWO_PI * (f - cfg.f_out) * np.diff(t_all)
    return t_all, np.concatenate(([0.0], np.cumsum(excess_inc)))


def edge_phase_samples(trace: TraceLike, cfg: SimConfig, start_cycle: int = 0) -> np.ndarray:
    """
    Excess output phase (rad) at every reference edge from start_cycle on,
    i.e. the phase sampled at f_ref.
    """
    _, phi = _edge_phases(trace, cfg)
    return phi[start_cycle:-1]


def synthesize_phase_samples(trace: TraceLike, cfg: SimConfig, fs: float,
                             start_cycle: int = 0, f_min: Optional[float] = None) -> np.ndarray:
    """
    Excess phase of the VCO against 2*pi*f_out*t, sampled at fs. The phase is
    piecewise linear between reference edges; a control ripple at f_ref adds
    its FM term (k_vco*ripple_amp/f_ref)*sin(2*pi*f_ref*t).
    """
    if fs < 4 * cfg.f_out:
        raise AnalysisError(f"fs = {fs:g} Hz is below 4*f_out = {4 * cfg.f_out:g} Hz")
    t_all, phi = _edge_phases(trace, cfg)
    t_start, t_end = t_all[start_cycle], t_all[-1]
    if f_min is not None and t_end - t_start < 2.0 / f_min:
        raise AnalysisError(f"trace covers {t_end - t_start:g} s; resolving {f_min:g} Hz needs at least "
                            f"{2.0 / f_min:g} s")
    ts = t_start + np.arange(int(math.floor((t_end - t_start) * fs))) / fs
    out = np.interp(ts, t_all, phi)
    if cfg.ripple_amp:
        out += cfg.k_vco * cfg.ripple_amp / cfg.f_ref * np.sin(TWO_PI * cfg.f_ref * ts)
    return out
