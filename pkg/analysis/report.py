"""
Summary report of one simulated trace, and calibration of the VCO noise
level against a jitter target.
"""
import logging
import math
from dataclasses import replace
from typing import Dict

import numpy as np
import pandas as pd

from analysis.fom import FomInputs, fom_ja
from analysis.spectrum import estimate_psd, integrate_jitter, spur_level
from loop.engine import LockReport, edge_phase_samples, lock_report, run_transient, synthesize_phase_samples
from model.config import SimConfig
from model.errors import AnalysisError
from model.trace import records_to_frame

log = logging.getLogger(__name__)

SUMMARY_KEYS = ["sigma_s", "ref_sigma_s", "spur_dbc", "spur_freq_hz", "fom_ja_db", "fom_db",
                "lock_time_s", "f_error_ppm", "locked"]

MAX_SPUR_SAMPLES = 2 ** 21


def _segment(n: int, wanted: int) -> int:
    seg = wanted
    while seg > n:
        seg //= 2
    return seg


def _band_jitter(phase: np.ndarray, fs: float, f1: float, f2: float, f_carrier: float, cfg: SimConfig) -> float:
    a = cfg.analysis
    seg = _segment(phase.size, a.segment_len)
    if seg < 16:
        raise AnalysisError(f"{phase.size} samples are too few for a jitter estimate")
    spec = estimate_psd(phase, fs, seg, a.overlap, a.detrend)
    return integrate_jitter(spec, f1, min(f2, spec.freqs[-1]), f_carrier)


def analysis_start(trace: pd.DataFrame, cfg: SimConfig, lock: LockReport = None) -> int:
    """
    First cycle used for spectra: the lock point, or the second half of an unlocked run.
    """
    lock = lock_report(trace, cfg) if lock is None else lock
    return lock.lock_cycle if lock.locked else len(trace) // 2


def measure_jitter(trace: pd.DataFrame, cfg: SimConfig, f1: float = None, f2: float = None) -> float:
    f1 = cfg.analysis.jitter_f1 if f1 is None else f1
    f2 = cfg.analysis.jitter_f2 if f2 is None else f2
    phase = edge_phase_samples(trace, cfg, analysis_start(trace, cfg))
    return _band_jitter(phase, cfg.f_ref, f1, f2, cfg.f_out, cfg)


def reference_jitter(trace: pd.DataFrame, cfg: SimConfig) -> float:
    """
    rms reference-edge jitter over [jitter_f1, ref_jitter_f2].
    """
    t = trace["t_s"].to_numpy(np.float64)
    k = np.arange(t.size)
    dev = t - t[0] - k / cfg.f_ref
    phase = 2.0 * math.pi * cfg.f_ref * (dev - np.polyval(np.polyfit(k, dev, 1), k))
    return _band_jitter(phase, cfg.f_ref, cfg.analysis.jitter_f1, cfg.analysis.ref_jitter_f2, cfg.f_ref, cfg)


def summarize(trace: pd.DataFrame, cfg: SimConfig) -> Dict[str, float]:
    """
    Report keys computed from the trace table alone, so a trace read back
    from CSV reproduces the same numbers.
    """
    lock = lock_report(trace, cfg)
    start = analysis_start(trace, cfg, lock)
    out = dict.fromkeys(SUMMARY_KEYS, math.nan)
    out.update(lock_time_s=lock.lock_time, f_error_ppm=lock.f_error_ppm, locked=int(lock.locked))

    try:
        out["sigma_s"] = _band_jitter(edge_phase_samples(trace, cfg, start), cfg.f_ref,
                                      cfg.analysis.jitter_f1, cfg.analysis.jitter_f2, cfg.f_out, cfg)
    except AnalysisError as e:
        log.warning("output jitter not measured: %s", e)
    try:
        out["ref_sigma_s"] = reference_jitter(trace, cfg)
    except AnalysisError as e:
        log.warning("reference jitter not measured: %s", e)
    try:
        fs = 4.0 * cfg.f_out
        phase = synthesize_phase_samples(trace, cfg, fs, start)[-MAX_SPUR_SAMPLES:]
        seg = _segment(phase.size, cfg.analysis.spur_segment_len)
        spec = estimate_psd(phase, fs, seg, cfg.analysis.overlap, cfg.analysis.detrend)
        spur = spur_level(spec, cfg.f_out, cfg.f_ref)
        out["spur_dbc"], out["spur_freq_hz"] = spur.level_dbc, spur.freq_hz
    except AnalysisError as e:
        log.warning("reference spur not measured: %s", e)

    if math.isfinite(out["sigma_s"]) and out["sigma_s"] > 0:
        res = fom_ja(FomInputs(out["sigma_s"], cfg.fom.power, cfg.fom.area))
        out["fom_ja_db"], out["fom_db"] = res.fom_ja_db, res.fom_db
    return out


def calibrate_vco_noise(cfg: SimConfig, sigma_target: float, f1: float = None, f2: float = None) -> SimConfig:
    """
    Config whose white-FM level makes the simulated jitter over [f1, f2]
    equal sigma_target. Two runs with the same seed fix the affine law
    sigma^2 = A + B*vco_white_fm of the locked loop.
    """
    w0 = cfg.noise.vco_white_fm if cfg.noise.vco_white_fm > 0 else 1.0
    sig = []
    for w in (w0, 2.0 * w0):
        c = replace(cfg, noise=replace(cfg.noise, enabled=True, vco_white_fm=w))
        sig.append(measure_jitter(records_to_frame(run_transient(c).trace), c, f1, f2))
    b = (sig[1] ** 2 - sig[0] ** 2) / w0
    a = sig[0] ** 2 - b * w0
    if b <= 0:
        raise AnalysisError("jitter does not grow with the VCO noise level; cannot calibrate")
    w = (sigma_target ** 2 - a) / b
    if w <= 0:
        raise AnalysisError(f"reference jitter alone gives {math.sqrt(max(a, 0.0)):g} s, above the target "
                            f"{sigma_target:g} s")
    log.info("calibrated vco_white_fm = %.6g Hz^2/Hz for %.4g s", w, sigma_target)
    return replace(cfg, noise=replace(cfg.noise, enabled=True, vco_white_fm=w))
