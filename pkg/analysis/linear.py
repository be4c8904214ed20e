"""
Continuous-time small-signal model of the loop, valid while the loop
bandwidth stays well below f_ref.

    k_pd_i   = 2*i_chg*f_ref / (2*pi*f_out)                 A/rad
    Z(s)     = (1 + s*r1*c1) / (s*(c_s + c1)*(1 + s*r1*c_p)),  c_p = c_s*c1/(c_s + c1)
    G(s)     = k_pd_i * Z(s) * 2*pi*k_vco / s
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, NamedTuple, Optional, Tuple

import numpy as np
from scipy import signal
from scipy.optimize import brentq

log = logging.getLogger(__name__)

NTF_FLOOR_DB = -200.0


@dataclass(frozen=True)
class LoopModel:
    k_pd_i: float      # A/rad
    c_total: float     # F, c_s + c1
    tau_z: float       # s, r1*c1
    tau_p: float       # s, r1*c_p
    k_vco_rad: float   # rad/s/V
    mult_M: int
    f_ref: float

    @property
    def z_num(self) -> np.ndarray:
        return np.array([self.tau_z, 1.0])

    @property
    def z_den(self) -> np.ndarray:
        return np.array([self.c_total * self.tau_p, self.c_total, 0.0])

    @property
    def zero_hz(self) -> float:
        return 1.0 / (2.0 * math.pi * self.tau_z) if self.tau_z > 0 else math.inf


class StabilityReport(NamedTuple):
    unity_gain_bw: float
    phase_margin: float
    stable: Optional[bool]


def build_loop_model(cfg) -> LoopModel:
    c_p = cfg.c_s * cfg.c1 / (cfg.c_s + cfg.c1)
    return LoopModel(
        k_pd_i=2.0 * cfg.i_chg * cfg.f_ref / (2.0 * math.pi * cfg.f_out),
        c_total=cfg.c_s + cfg.c1,
        tau_z=cfg.r1 * cfg.c1,
        tau_p=cfg.r1 * c_p,
        k_vco_rad=2.0 * math.pi * cfg.k_vco,
        mult_M=cfg.mult_M,
        f_ref=cfg.f_ref,
    )


def z_filter(model: LoopModel, f):
    s = 2j * np.pi * np.asarray(f, dtype=np.float64)
    return np.polyval(model.z_num, s) / np.polyval(model.z_den, s)


def open_loop(model: LoopModel, f):
    s = 2j * np.pi * np.asarray(f, dtype=np.float64)
    return model.k_pd_i * z_filter(model, f) * model.k_vco_rad / s


def open_loop_phase_deg(model: LoopModel, f):
    """
    Unwrapped phase of G: two integrators, the filter zero and its pole.
    """
    w = 2.0 * np.pi * np.asarray(f, dtype=np.float64)
    return -180.0 + np.degrees(np.arctan(w * model.tau_z) - np.arctan(w * model.tau_p))


def stability(model: LoopModel) -> StabilityReport:
    lo, hi = 1.0, model.f_ref / 2.0

    def excess(log_f):
        return math.log(abs(open_loop(model, 10.0 ** log_f)))

    a, b = math.log10(lo), math.log10(hi)
    if excess(a) * excess(b) > 0:
        log.warning("no unity-gain crossing of the open loop in [%g, %g] Hz", lo, hi)
        return StabilityReport(math.nan, math.nan, None)
    ugb = 10.0 ** brentq(excess, a, b, xtol=1e-12)
    pm = 180.0 + float(open_loop_phase_deg(model, ugb))
    if ugb >= model.f_ref / 10:
        log.warning("unity-gain bandwidth %.4g Hz exceeds f_ref/10; the continuous model is unreliable", ugb)
    return StabilityReport(ugb, pm, pm > 0)


def closed_loop(model: LoopModel, f) -> Tuple[np.ndarray, np.ndarray]:
    """
    (G/(1+G), 1/(1+G)): reference NTF divided by M, and the VCO NTF.
    """
    g = open_loop(model, f)
    return g / (1.0 + g), 1.0 / (1.0 + g)


def _db(x):
    mag = np.abs(x)
    out = np.where(mag > 0, 20.0 * np.log10(np.maximum(mag, 1e-300)), NTF_FLOOR_DB)
    out = np.maximum(out, NTF_FLOOR_DB)
    return float(out) if np.ndim(out) == 0 else out


def noise_transfer(model: LoopModel, source: str, f):
    """
    |NTF| in dB at offset f: reference source M*G/(1+G), VCO source 1/(1+G).
    """
    h, t = closed_loop(model, f)
    if source == "reference":
        return _db(model.mult_M * h)
    if source == "vco":
        return _db(t)
    raise ValueError(f"unknown noise source '{source}' (expected 'reference' or 'vco')")


def control_response(model: LoopModel) -> signal.lti:
    """
    V_C(s)/theta_ref(s), theta_ref in reference radians.
    """
    kk = model.k_pd_i * model.k_vco_rad
    num = model.mult_M * model.k_pd_i * np.array([model.tau_z, 1.0, 0.0])
    den = np.array([model.c_total * model.tau_p, model.c_total, kk * model.tau_z, kk])
    return signal.lti(num, den)


def step_response(model: LoopModel, t, theta: float = 1.0) -> np.ndarray:
    """
    Control-voltage change after a reference phase step of theta rad at t = 0.
    """
    t = np.asarray(t, dtype=np.float64)
    _, y = signal.step(control_response(model), T=t)
    return theta * y


def design_report(cfg) -> Dict[str, float]:
    model = build_loop_model(cfg)
    st = stability(model)
    return {
        "k_pd_i_A_per_rad": model.k_pd_i,
        "ugb_hz": st.unity_gain_bw,
        "pm_deg": st.phase_margin,
        "zero_hz": model.zero_hz,
    }
