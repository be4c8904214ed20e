import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
import pandas as pd

# sentinel for "no VCO transition in the window"
NO_TRANSITION = math.nan

TRACE_COLUMNS = ["cycle", "t_s", "v_c_V", "f_Hz", "fll_code", "fll_engaged", "dv_pd_V", "tx_off_s"]


@dataclass(frozen=True)
class CycleRecord:
    cycle_index: int
    t: float
    v_c: float
    f_inst: float
    fll_code: int
    fll_engaged: bool
    delta_v_pd: float
    t_x_offset: float = NO_TRANSITION


def records_to_frame(records: Iterable[CycleRecord]) -> pd.DataFrame:
    rows = [(r.cycle_index, r.t, r.v_c, r.f_inst, r.fll_code, int(r.fll_engaged), r.delta_v_pd, r.t_x_offset)
            for r in records]
    df = pd.DataFrame(rows, columns=TRACE_COLUMNS)
    return df.astype({"cycle": "int64", "fll_code": "int64", "fll_engaged": "int64"})


def write_trace_csv(path: Path, trace) -> Path:
    """
    One row per reference cycle. Floats carry 17 significant digits so a
    read-back trace is bit-identical to the simulated one.
    """
    df = trace if isinstance(trace, pd.DataFrame) else records_to_frame(trace)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(df.to_csv(index=False, float_format="%.17g", na_rep="nan"))
    return path


def read_trace_csv(path: Path) -> pd.DataFrame:
    df = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in TRACE_COLUMNS if c not in df.columns]
    if missing:
        raise ValueError(f"{path}: trace is missing columns {missing}")
    df["tx_off_s"] = df["tx_off_s"].astype(np.float64)
    return df[TRACE_COLUMNS]
