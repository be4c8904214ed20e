import math
from dataclasses import dataclass
from typing import NamedTuple


@dataclass(frozen=True)
class FomInputs:
    sigma_j: float  # s, integrated rms jitter
    power: float    # W
    area: float     # mm^2

    def __post_init__(self):
        for name in ("sigma_j", "power", "area"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"FOM input {name} must be a finite number > 0 (got {v!r})")


class FomResult(NamedTuple):
    fom_ja_db: float
    fom_db: float


def fom_ja(inputs: FomInputs) -> FomResult:
    """
    Area-normalized jitter-power FOM:
    20*log10(sigma/1 s) + 10*log10(P/1 mW) + 10*log10(A/1 mm^2),
    returned together with the jitter-power FOM without the area term.
    """
    fom = 20.0 * math.log10(inputs.sigma_j) + 10.0 * math.log10(inputs.power / 1e-3)
    return FomResult(fom + 10.0 * math.log10(inputs.area), fom)
