"""Deterministic CSV emission.

Floats are written with 17 significant digits so a double round-trips
exactly, and rows always end with a bare newline regardless of platform:
rerunning a scenario with the same seed must reproduce files byte for byte.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def write_csv_table(path, header, rows) -> Path:
    """Write rows (iterables of cells) under a header; returns the path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    lines.extend(",".join(format_value(cell) for cell in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="ascii", newline="")
    return path


def columns_table(path, header, columns) -> Path:
    """Column-oriented convenience: equal-length 1-d arrays, zipped to rows."""
    arrays = [np.asarray(col) for col in columns]
    n = {len(a) for a in arrays}
    if len(n) != 1:
        raise ValueError("columns must share one length")
    return write_csv_table(path, header, zip(*arrays))
