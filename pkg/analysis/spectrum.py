"""
Phase-noise spectrum estimation, band-integrated jitter and reference spurs.

Spectra are one-sided densities of the excess phase S_phi(f) in rad^2/Hz,
reported as single-sideband L(f) = 10*log10(S_phi(f)/2) dBc/Hz.
"""
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import signal
from scipy.integrate import trapezoid

from model.errors import AnalysisError

L_FLOOR_DBC = -400.0
_P_FLOOR = 10.0 ** (L_FLOOR_DBC / 10.0)


@dataclass(frozen=True)
class SpectrumEstimate:
    freqs: np.ndarray
    l_dbchz: np.ndarray
    resolution_bw: float
    n_averages: int

    @property
    def s_phi(self) -> np.ndarray:
        return 2.0 * 10.0 ** (self.l_dbchz / 10.0)

    @property
    def bin_width(self) -> float:
        return float(self.freqs[1] - self.freqs[0]) if len(self.freqs) > 1 else self.resolution_bw


class SpurReport(NamedTuple):
    level_dbc: float
    freq_hz: float


def to_dbc(s_phi) -> np.ndarray:
    half = np.asarray(s_phi, dtype=np.float64) / 2.0
    return np.where(half > _P_FLOOR, 10.0 * np.log10(np.maximum(half, _P_FLOOR)), L_FLOOR_DBC)


def estimate_psd(phase_samples, fs: float, segment_len: int, overlap: float = 0.5,
                 detrend: str = "constant") -> SpectrumEstimate:
    """
    Averaged Hann-windowed periodogram (Welch) of an excess-phase record.
    A phase tone of amplitude a integrates to a^2/2 rad^2.
    """
    x = np.asarray(phase_samples, dtype=np.float64)
    if segment_len <= 0 or segment_len & (segment_len - 1):
        raise ValueError(f"segment_len must be a power of two (got {segment_len})")
    if not 0.0 <= overlap <= 0.9:
        raise ValueError(f"overlap must lie in [0, 0.9] (got {overlap})")
    if x.size < segment_len:
        raise AnalysisError(f"{x.size} samples are too few for segment_len {segment_len}; "
                            f"need at least {segment_len} ({segment_len / fs:g} s at fs = {fs:g} Hz)")
    noverlap = int(overlap * segment_len)
    f, pxx = signal.welch(x, fs=fs, window="hann", nperseg=segment_len, noverlap=noverlap,
                          detrend=False if detrend == "none" else detrend,
                          scaling="density", return_onesided=True)
    n_avg = (x.size - noverlap) // (segment_len - noverlap)
    # DC carries no phase-noise information
    return SpectrumEstimate(f[1:], to_dbc(pxx[1:]), fs / segment_len, int(n_avg))


def integrate_jitter(spec: SpectrumEstimate, f1: float, f2: float, f_out: float) -> float:
    """
    rms jitter (s) from L(f) integrated over [f1, f2]:
    sqrt(2 * integral of 10^(L/10) df) / (2*pi*f_out), trapezoidal over bins.
    """
    if f2 < f1:
        raise ValueError(f"integration band needs f1 <= f2 (got {f1:g}, {f2:g})")
    if f1 < spec.freqs[0] or f2 > spec.freqs[-1]:
        raise AnalysisError(f"band [{f1:g}, {f2:g}] Hz outside the spectrum span "
                            f"[{spec.freqs[0]:g}, {spec.freqs[-1]:g}] Hz; the lowest offset needs a "
                            f"record of at least {1.0 / f1:g} s per segment")
    if f1 == f2:
        return 0.0
    lin = 10.0 ** (spec.l_dbchz / 10.0)
    inside = (spec.freqs > f1) & (spec.freqs < f2)
    ff = np.concatenate(([f1], spec.freqs[inside], [f2]))
    pp = np.concatenate(([np.interp(f1, spec.freqs, lin)], lin[inside], [np.interp(f2, spec.freqs, lin)]))
    return math.sqrt(2.0 * trapezoid(pp, ff)) / (2.0 * math.pi * f_out)


def tone_power(spec: SpectrumEstimate, f_tone: float, half_width: int = 2) -> float:
    """
    Phase power (rad^2) of a discrete tone: S_phi summed over +-half_width
    bins around the local peak nearest f_tone.
    """
    s = spec.s_phi
    i0 = int(np.argmin(np.abs(spec.freqs - f_tone)))
    lo, hi = max(0, i0 - half_width), min(len(s), i0 + half_width + 1)
    peak = lo + int(np.argmax(s[lo:hi]))
    lo, hi = max(0, peak - half_width), min(len(s), peak + half_width + 1)
    return float(np.sum(s[lo:hi]) * spec.bin_width)


def spur_level(spec: SpectrumEstimate, f_out: float, f_offset: float) -> SpurReport:
    """
    Reference spur at f_out +- f_offset in dBc. A real excess phase puts equal
    sidebands on both sides, so the upper one stands for the worse of the two.
    """
    if spec.resolution_bw >= f_offset / 10:
        need = 10.0 / f_offset
        raise AnalysisError(f"resolution {spec.resolution_bw:g} Hz cannot resolve a tone at {f_offset:g} Hz; "
                            f"segments must span at least {need:g} s")
    if f_offset > spec.freqs[-1]:
        raise AnalysisError(f"offset {f_offset:g} Hz beyond the spectrum span {spec.freqs[-1]:g} Hz")
    p = tone_power(spec, f_offset)
    level = 10.0 * math.log10(p / 2.0) if p / 2.0 > _P_FLOOR else L_FLOOR_DBC
    return SpurReport(level, f_out + f_offset)
