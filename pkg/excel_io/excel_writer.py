import math
import numbers
import re
from typing import List, Sequence

import pandas as pd


def _safe_sheet_name(name: str) -> str:
    r"""
    Excel limits: name <= 31 chars; cannot contain : \ / ? * [ ]
    """
    s = str(name)
    s = re.sub(r'[:\\/?*\[\]]', '-', s)  # replace illegal chars
    s = s.strip() or "Sheet"
    return s[:31]  # Excel hard limit


def write_sweep_sheet(writer, sheet_name: str, sweep: pd.DataFrame, param: str,
                      title: str = None, charted: Sequence[str] = (), notes: List[str] = None):
    """
    Writes one worksheet:
      - a title row
      - the sweep table: parameter column first, one row per point
      - one scatter chart per charted column against the parameter
    """
    sheet = _safe_sheet_name(sheet_name)
    ws = writer.book.add_worksheet(sheet)
    cols = list(sweep.columns)

    ws.write_row(0, 0, [title or f"sweep of {param}"])
    ws.write_row(2, 0, cols)

    row_start = 3
    for i, row in enumerate(sweep.itertuples(index=False, name=None), start=row_start):
        for j, v in enumerate(row):
            if isinstance(v, numbers.Real) and math.isfinite(v):
                ws.write_number(i, j, float(v))
            else:
                ws.write_blank(i, j, None)
    last = row_start + len(sweep) - 1

    r = last + 2
    for note in notes or []:
        ws.write(r, 0, f"Note: {note}")
        r += 1

    # Charts: each metric vs the swept parameter
    if len(sweep) == 0:
        return
    x = cols.index(param)
    for n, name in enumerate(c for c in charted if c in cols):
        y = cols.index(name)
        chart = writer.book.add_chart({"type": "scatter", "subtype": "straight_with_markers"})
        chart.add_series({
            "name": name,
            "categories": [sheet, row_start, x, last, x],
            "values":     [sheet, row_start, y, last, y],
        })
        chart.set_title({"name": name[:31]})
        chart.set_x_axis({"name": param})
        chart.set_legend({"none": True})
        ws.insert_chart(r + 1 + 16 * n, 0, chart)
