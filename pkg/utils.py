import math
from pathlib import Path
from typing import Dict, Iterable, List

import numpy as np
import pandas as pd


def format_report(values: Dict[str, float]) -> str:
    """
    Plain-text key=value report, one key per line. Floats keep 17 significant
    digits so a report read back compares equal.
    """
    lines = []
    for k, v in values.items():
        if isinstance(v, (bool, np.bool_)):
            v = int(v)
        if isinstance(v, (int, np.integer)):
            lines.append(f"{k}={int(v)}")
        elif v is None or (isinstance(v, float) and math.isnan(v)):
            lines.append(f"{k}=nan")
        else:
            lines.append(f"{k}={float(v):.17g}")
    return "\n".join(lines) + "\n"


def write_report(path: Path, values: Dict[str, float]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_report(values))
    return path


def read_report(path: Path) -> Dict[str, float]:
    out = {}
    for ln, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{ln}: expected key=value, got {line!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = float(v)
    return out


def sweep_points(start: float, stop: float, steps: int) -> List[float]:
    if steps < 1:
        raise ValueError(f"steps must be >= 1 (got {steps})")
    if steps == 1:
        return [float(start)]
    return [float(x) for x in np.linspace(start, stop, steps)]


def rows_to_frame(rows: Iterable[Dict[str, float]], param: str) -> pd.DataFrame:
    """
    Sweep rows ordered by parameter value, parameter column first.
    """
    df = pd.DataFrame(list(rows))
    cols = [param] + [c for c in df.columns if c != param]
    return df[cols].sort_values(param, kind="stable").reset_index(drop=True)
