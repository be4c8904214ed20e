"""
Reference edges and the sampling-pulse windows derived from them.
"""
from dataclasses import dataclass
from typing import Union

import numpy as np

PULSE_WIDTH_MIN = 1e-9
PULSE_WIDTH_MAX = 5e-9
PULSE_CODES = 16


@dataclass(frozen=True)
class PulseWindow:
    t_start: float
    t_end: float
    width: float


@dataclass(frozen=True)
class PulseWidthCode:
    code: int

    def __post_init__(self):
        if not 0 <= int(self.code) < PULSE_CODES:
            raise ValueError(f"pulse width code {self.code} outside [0, {PULSE_CODES - 1}]")


def width_from_code(code: Union[int, PulseWidthCode]) -> float:
    """
    Capacitor-bank code -> pulse width, linear from 1 ns (code 0) to 5 ns (code 15).
    """
    c = code.code if isinstance(code, PulseWidthCode) else PulseWidthCode(int(code)).code
    return PULSE_WIDTH_MIN + c * (PULSE_WIDTH_MAX - PULSE_WIDTH_MIN) / (PULSE_CODES - 1)


def window_for_edge(edge_time: float, width: float) -> PulseWindow:
    if not width > 0:
        raise ValueError(f"pulse width must be > 0 (got {width!r})")
    return PulseWindow(edge_time, edge_time + width, width)


def ref_edges(f_ref: float, n: int, jitter: float = 0.0,
              seed: Union[int, np.random.Generator, None] = 0) -> np.ndarray:
    """
    Edge k at k/f_ref plus independent zero-mean Gaussian jitter of rms `jitter`.
    The same seed always gives the same edges.
    """
    if n < 1:
        raise ValueError(f"need at least one edge (n = {n})")
    t_ref = 1.0 / f_ref
    if jitter >= t_ref / 10:
        raise ValueError(f"reference jitter {jitter:g} s must stay below T_REF/10 = {t_ref / 10:g} s")
    edges = np.arange(n, dtype=np.float64) * t_ref
    if jitter > 0:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        edges = edges + rng.normal(0.0, jitter, size=n)
    return edges
