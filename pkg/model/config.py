"""
Simulation configuration: every physical and loop parameter of one ISSPLL
instance, the noise sources, run controls and the analysis/FOM settings.

All quantities are SI (seconds, hertz, volts, amperes, farads, ohms) except
FOM area, which is in mm^2. Config files are YAML with one mapping per
section (loop, vco, fll, noise, run, analysis, fom).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml

from model.errors import ConfigError


def _f(section: str, unit: str, help: str, **kw) -> Any:
    return field(metadata={"section": section, "unit": unit, "help": help}, **kw)


@dataclass(frozen=True)
class NoiseSpec:
    ref_jitter_rms: float = _f("noise", "s", "white per-edge reference jitter (rms)", default=0.0)
    vco_white_fm: float = _f("noise", "Hz^2/Hz", "one-sided white frequency-noise density of the VCO", default=0.0)
    vco_flicker_corner: float = _f("noise", "Hz", "flicker FM corner frequency (0 disables flicker)", default=0.0)
    enabled: bool = _f("noise", "-", "master switch for every noise source", default=False)


@dataclass(frozen=True)
class AnalysisSpec:
    jitter_f1: float = _f("analysis", "Hz", "lower edge of the output jitter integration band", default=1e3)
    jitter_f2: float = _f("analysis", "Hz", "upper edge of the output jitter integration band", default=1e5)
    ref_jitter_f2: float = _f("analysis", "Hz", "upper edge of the reference jitter integration band", default=1e6)
    segment_len: int = _f("analysis", "samples", "Welch segment length for the jitter spectrum (power of two)", default=65536)
    overlap: float = _f("analysis", "-", "Welch segment overlap fraction in [0, 0.9]", default=0.5)
    spur_segment_len: int = _f("analysis", "samples", "Welch segment length for the spur spectrum (power of two)", default=16384)
    detrend: str = _f("analysis", "-", "per-segment detrend passed to the Welch estimator", default="constant")


@dataclass(frozen=True)
class FomSpec:
    power: float = _f("fom", "W", "total PLL power used by the FOM report", default=131.8e-6)
    area: float = _f("fom", "mm^2", "PLL area used by the FOM report", default=0.034)


@dataclass(frozen=True)
class SimConfig:
    # --- loop ---
    f_ref: float = _f("loop", "Hz", "reference frequency", default=25e6)
    mult_M: int = _f("loop", "-", "frequency multiplication factor (f_out = mult_M * f_ref)", default=10)
    t_pul: float = _f("loop", "s", "sampling pulse width", default=2e-9)
    pulse_code: Optional[int] = _f("loop", "code", "pulse-width code 0..15; overrides t_pul when set", default=None)
    i_bias: float = _f("loop", "A", "PD bias current I_B", default=10e-6)
    i_chg: Optional[float] = _f("loop", "A", "net capacitor charging current 2*di (defaults to i_bias)", default=None)
    c_s: float = _f("loop", "F", "PD integration capacitor C_S (loop-filter node)", default=1e-12)
    r1: float = _f("loop", "ohm", "loop-filter series resistor R1", default=9e3)
    c1: float = _f("loop", "F", "loop-filter series capacitor C1", default=140e-12)
    t_soft: float = _f("loop", "s", "PD current soft-switch time constant (0 = hard switching)", default=0.0)
    i_offset: float = _f("loop", "A", "constant offset current during the pulse window", default=0.0)
    i_sweep: float = _f("loop", "A", "capture-aid current during the window until phase capture", default=2e-6)
    capture_tol: float = _f("loop", "s", "max cycle-to-cycle drift of the lock edge counted as captured", default=10e-12)
    capture_cycles: int = _f("loop", "cycles", "consecutive captured cycles that switch the capture aid off", default=64)
    # --- vco ---
    k_vco: float = _f("vco", "Hz/V", "VCO fine-tuning gain", default=175e6)
    v_ctr: float = _f("vco", "V", "control-voltage center", default=0.6)
    v_swing: float = _f("vco", "V", "usable control range half-width around v_ctr", default=0.4)
    f_base_min: float = _f("vco", "Hz", "free-running frequency at DAC code 0", default=200e6)
    f_base_step: float = _f("vco", "Hz/code", "free-running frequency step per DAC code", default=1e6)
    # --- fll ---
    dac_bits: int = _f("fll", "bits", "coarse current-DAC resolution", default=6)
    fll_window_N: int = _f("fll", "periods", "reference periods per cycle count", default=4)
    fll_band_lo: float = _f("fll", "-", "dead-zone lower edge as a fraction of f_out", default=0.90)
    fll_band_hi: float = _f("fll", "-", "dead-zone upper edge as a fraction of f_out", default=0.95)
    fll_start_code: Optional[int] = _f("fll", "code", "initial DAC code (defaults to the maximum code)", default=None)
    # --- noise ---
    noise: NoiseSpec = field(default_factory=NoiseSpec, metadata={"section": "noise"})
    # --- run ---
    duration: float = _f("run", "s", "simulated time", default=400e-6)
    seed: int = _f("run", "-", "64-bit random seed", default=1)
    lock_tol_ppm: float = _f("run", "ppm", "lock frequency tolerance", default=10.0)
    lock_window: int = _f("run", "cycles", "consecutive in-tolerance cycles that qualify as lock", default=1000)
    lock_avg_cycles: int = _f("run", "cycles", "records averaged per lock decision (0 = 1 without noise, lock_window with noise)",
                              default=0)
    ref_step_ppm: float = _f("run", "ppm", "reference frequency step applied at ref_step_time", default=0.0)
    ref_step_time: float = _f("run", "s", "time of the reference frequency step (0 disables)", default=0.0)
    ref_phase_step: float = _f("run", "rad", "reference phase step; positive moves reference edges earlier", default=0.0)
    ref_phase_step_time: float = _f("run", "s", "time of the reference phase step (0 disables)", default=0.0)
    ripple_amp: float = _f("run", "V", "control ripple at f_ref injected into the synthesized output phase", default=0.0)
    # --- analysis / fom ---
    analysis: AnalysisSpec = field(default_factory=AnalysisSpec, metadata={"section": "analysis"})
    fom: FomSpec = field(default_factory=FomSpec, metadata={"section": "fom"})

    def __post_init__(self):
        if self.i_chg is None:
            object.__setattr__(self, "i_chg", self.i_bias)
        if self.fll_start_code is None:
            object.__setattr__(self, "fll_start_code", 2 ** self.dac_bits - 1)
        if self.pulse_code is not None:
            from loop.stimulus import width_from_code
            object.__setattr__(self, "t_pul", width_from_code(self.pulse_code))

    @property
    def t_ref(self) -> float:
        return 1.0 / self.f_ref

    @property
    def f_out(self) -> float:
        return self.mult_M * self.f_ref

    @property
    def max_code(self) -> int:
        return 2 ** self.dac_bits - 1

    @property
    def n_cycles(self) -> int:
        return int(math.floor(self.duration * self.f_ref + 1e-9))


@dataclass(frozen=True)
class Violation:
    field: str
    message: str

    def __str__(self):
        return f"{self.field}: {self.message}"


def _is_pow2(n) -> bool:
    return isinstance(n, int) and not isinstance(n, bool) and n > 0 and (n & (n - 1)) == 0


def validate(config: SimConfig) -> List[Violation]:
    """
    Return every violated invariant of `config`; an empty list means valid.
    Never raises: callers decide what to do with the violations.
    """
    from loop.fll import count_cycles, threshold_counts

    c = config
    out: List[Violation] = []

    def need(ok: bool, name: str, msg: str):
        if not ok:
            out.append(Violation(name, msg))

    for name in ("f_ref", "t_pul", "i_bias", "i_chg", "c_s", "r1", "c1", "k_vco",
                 "f_base_min", "f_base_step", "duration"):
        v = getattr(c, name)
        need(math.isfinite(v) and v > 0, name, f"{name} must be > 0 (got {v!r})")
    for name in ("mult_M", "fll_window_N", "dac_bits", "capture_cycles"):
        v = getattr(c, name)
        need(v >= 1, name, f"{name} must be >= 1 (got {v!r})")
    for name in ("t_soft", "i_sweep", "capture_tol", "v_swing"):
        v = getattr(c, name)
        need(v >= 0, name, f"{name} must be >= 0 (got {v!r})")
    if out:
        # later checks divide by these
        return out

    need(c.t_pul < c.t_ref, "t_pul",
         f"t_pul < 1/f_ref violated: t_pul = {c.t_pul:g} s, 1/f_ref = {c.t_ref:g} s")
    need(0 < c.fll_band_lo < c.fll_band_hi < 1, "fll_band_lo",
         f"fll_band_lo < fll_band_hi < 1 violated: ({c.fll_band_lo:g}, {c.fll_band_hi:g})")
    need(0 <= c.fll_start_code <= c.max_code, "fll_start_code",
         f"fll_start_code must lie in [0, {c.max_code}] (got {c.fll_start_code})")
    if c.pulse_code is not None:
        need(0 <= c.pulse_code <= 15, "pulse_code", f"pulse_code must lie in [0, 15] (got {c.pulse_code})")

    lo = c.f_base_min - c.k_vco * c.v_swing
    hi = c.f_base_min + c.max_code * c.f_base_step + c.k_vco * c.v_swing
    need(lo <= c.f_out <= hi, "mult_M",
         f"mult_M*f_ref = {c.f_out:g} Hz outside the reachable VCO range [{lo:g}, {hi:g}] Hz")

    if 0 < c.fll_band_lo < c.fll_band_hi < 1:
        count_lo, count_hi = threshold_counts(c.fll_band_lo, c.fll_band_hi, c.mult_M, c.fll_window_N)
        if count_lo >= count_hi:
            n_min = c.fll_window_N
            while True:
                n_min += 1
                a, b = threshold_counts(c.fll_band_lo, c.fll_band_hi, c.mult_M, n_min)
                if a < b:
                    break
            out.append(Violation("fll_window_N",
                                 f"FLL band unresolvable with fll_window_N = {c.fll_window_N} "
                                 f"(count_lo {count_lo} >= count_hi {count_hi}); minimum N is {n_min}"))
        else:
            step_counts = c.f_base_step * c.fll_window_N / c.f_ref
            need(step_counts <= count_hi - count_lo, "f_base_step",
                 f"f_base_step*fll_window_N/f_ref = {step_counts:g} counts exceeds the dead zone "
                 f"width {count_hi - count_lo}; the FLL could jump the band")
            # the FLL walks from either end of the DAC and must reach the dead zone
            bottom = count_cycles(c.f_base_min, c.f_ref, c.fll_window_N)
            top = count_cycles(c.f_base_min + c.max_code * c.f_base_step, c.f_ref, c.fll_window_N)
            need(bottom <= count_hi, "f_base_min",
                 f"FLL band unreachable: DAC code 0 already counts {bottom} > count_hi {count_hi} "
                 f"(f_base_min = {c.f_base_min:g} Hz, band top {c.fll_band_hi * c.f_out:g} Hz)")
            need(top >= count_lo, "f_base_step",
                 f"FLL band unreachable: DAC code {c.max_code} counts only {top} < count_lo {count_lo} "
                 f"(top code {c.f_base_min + c.max_code * c.f_base_step:g} Hz, band bottom "
                 f"{c.fll_band_lo * c.f_out:g} Hz)")

    n = c.noise
    for name in ("ref_jitter_rms", "vco_white_fm", "vco_flicker_corner"):
        v = getattr(n, name)
        need(v >= 0, name, f"{name} must be >= 0 (got {v!r})")
    need(n.ref_jitter_rms < c.t_ref / 10, "ref_jitter_rms",
         f"ref_jitter_rms must be < T_REF/10 = {c.t_ref / 10:g} s to keep edges increasing")

    need(c.duration >= c.t_ref, "duration", "duration must cover at least one reference period")
    need(c.lock_window >= 2, "lock_window", f"lock_window must be >= 2 (got {c.lock_window})")
    need(c.lock_tol_ppm > 0, "lock_tol_ppm", "lock_tol_ppm must be > 0")
    need(c.lock_avg_cycles >= 0, "lock_avg_cycles", f"lock_avg_cycles must be >= 0 (got {c.lock_avg_cycles})")
    for name in ("ref_step_time", "ref_phase_step_time"):
        need(getattr(c, name) >= 0, name, f"{name} must be >= 0")

    a = c.analysis
    need(_is_pow2(a.segment_len), "segment_len", f"segment_len must be a power of two (got {a.segment_len})")
    need(_is_pow2(a.spur_segment_len), "spur_segment_len",
         f"spur_segment_len must be a power of two (got {a.spur_segment_len})")
    need(0 <= a.overlap <= 0.9, "overlap", f"overlap must lie in [0, 0.9] (got {a.overlap})")
    need(0 < a.jitter_f1 < a.jitter_f2, "jitter_f1", "jitter band needs 0 < jitter_f1 < jitter_f2")
    need(a.jitter_f1 < a.ref_jitter_f2, "ref_jitter_f2", "ref_jitter_f2 must exceed jitter_f1")
    need(a.detrend in ("constant", "linear", "none"), "detrend", "detrend must be constant, linear or none")

    need(c.fom.power > 0, "power", "fom power must be > 0")
    need(c.fom.area > 0, "area", "fom area must be > 0")
    return out


# --- config files ---

_NESTED = {"noise": NoiseSpec, "analysis": AnalysisSpec, "fom": FomSpec}


def _field_table() -> Dict[str, Dict[str, Tuple[type, Any]]]:
    """
    section -> {key: (owner class, dataclass field)}
    """
    table: Dict[str, Dict[str, Tuple[type, Any]]] = {}
    for f in fields(SimConfig):
        sec = f.metadata["section"]
        if f.name in _NESTED:
            for sub in fields(_NESTED[f.name]):
                table.setdefault(sec, {})[sub.name] = (_NESTED[f.name], sub)
        else:
            table.setdefault(sec, {})[f.name] = (SimConfig, f)
    return table


def config_keys() -> List[Tuple[str, str, str, str, Any]]:
    """
    (section, key, unit, help, default) for every config key, in declaration order.
    """
    out = []
    for sec, keys in _field_table().items():
        for key, (_, f) in keys.items():
            default = f.default if f.default is not None else "derived"
            out.append((sec, key, f.metadata["unit"], f.metadata["help"], default))
    return out


def numeric_keys() -> List[str]:
    return [key for _, key, _, _, default in config_keys()
            if key not in ("enabled", "detrend") and (isinstance(default, (int, float)) or default == "derived")]


def _coerce(key: str, value: Any, f) -> Any:
    kind = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    if value is None:
        return None
    if "bool" in kind:
        if isinstance(value, bool):
            return value
        s = str(value).strip().lower()
        if s in ("1", "true", "yes", "on"):
            return True
        if s in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {value!r}")
    if "int" in kind:
        x = float(value)
        if not x.is_integer():
            raise ValueError(f"{key}: expected an integer, got {value!r}")
        return int(x)
    if "float" in kind:
        if isinstance(value, bool):
            raise ValueError(f"{key}: expected a number, got {value!r}")
        return float(value)
    return str(value)


def _key_lines(text: str) -> Dict[Tuple[str, str], int]:
    lines: Dict[Tuple[str, str], int] = {}
    root = yaml.compose(text)
    if not isinstance(root, yaml.MappingNode):
        return lines
    for sec_node, body in root.value:
        lines[(sec_node.value, "")] = sec_node.start_mark.line + 1
        if isinstance(body, yaml.MappingNode):
            for k, _ in body.value:
                lines[(sec_node.value, k.value)] = k.start_mark.line + 1
    return lines


def config_from_mapping(raw: Dict[str, Any], source: str = "<config>",
                        lines: Optional[Dict[Tuple[str, str], int]] = None) -> SimConfig:
    lines = lines or {}
    table = _field_table()

    def where(sec: str, key: str = "") -> str:
        ln = lines.get((sec, key)) or lines.get((sec, ""))
        return f"{source}:{ln}" if ln else source

    top: Dict[str, Any] = {}
    nested: Dict[str, Dict[str, Any]] = {name: {} for name in _NESTED}
    for sec, body in (raw or {}).items():
        if sec not in table:
            raise ConfigError(f"{where(sec)}: unknown section [{sec}] (expected one of {', '.join(table)})")
        if body is None:
            continue
        if not isinstance(body, dict):
            raise ConfigError(f"{where(sec)}: section [{sec}] must be a mapping of key: value")
        for key, value in body.items():
            if key not in table[sec]:
                raise ConfigError(f"{where(sec, key)}: unknown key '{key}' in [{sec}]")
            owner, f = table[sec][key]
            try:
                v = _coerce(key, value, f)
            except (TypeError, ValueError) as e:
                raise ConfigError(f"{where(sec, key)}: {e}") from None
            if owner is SimConfig:
                top[key] = v
            else:
                nested[sec][key] = v

    cfg = SimConfig(
        noise=NoiseSpec(**nested["noise"]),
        analysis=AnalysisSpec(**nested["analysis"]),
        fom=FomSpec(**nested["fom"]),
        **top,
    )
    violations = validate(cfg)
    if violations:
        key_section = {key: sec for sec, keys in table.items() for key in keys}
        msgs = [f"{where(key_section.get(v.field, ''), v.field)}: {v.message}" for v in violations]
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(msgs))
    return cfg


def load_config(path: Path) -> SimConfig:
    """
    Read a sectioned YAML config. Errors name the file and line.
    """
    path = Path(path)
    text = path.read_text()
    try:
        raw = yaml.safe_load(text)
        lines = _key_lines(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        loc = f"{path}:{mark.line + 1}" if mark is not None else str(path)
        raise ConfigError(f"{loc}: {getattr(e, 'problem', None) or e}") from None
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError(f"{path}:1: top level must be a mapping of sections")
    return config_from_mapping(raw or {}, source=str(path), lines=lines)


def _as_field_type(f, value):
    kind = f.type if isinstance(f.type, str) else str(f.type)
    if "int" in kind and "float" not in kind:
        return int(round(value))
    return value


def with_value(cfg: SimConfig, key: str, value: float) -> SimConfig:
    """
    Copy of `cfg` with one config key replaced (nested sections included).
    Integer keys take the nearest integer.
    """
    for name, cls in _NESTED.items():
        sub = {f.name: f for f in fields(cls)}
        if key in sub:
            value = _as_field_type(sub[key], value)
            return replace(cfg, **{name: replace(getattr(cfg, name), **{key: value})})
    top = {f.name: f for f in fields(SimConfig)}
    if key not in top:
        raise ConfigError(f"unknown config key '{key}'")
    changes: Dict[str, Any] = {key: _as_field_type(top[key], value)}
    # derived defaults follow their source unless set explicitly
    if key == "i_bias" and cfg.i_chg == cfg.i_bias:
        changes["i_chg"] = None
    if key == "dac_bits" and cfg.fll_start_code == cfg.max_code:
        changes["fll_start_code"] = None
    return replace(cfg, **changes)
