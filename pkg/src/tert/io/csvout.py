"""CSV export with round-trip-exact float formatting."""

from __future__ import annotations

import csv


def format_cell(value) -> str:
    """Floats are printed with 17 significant digits so parsing them back
    reproduces the exact double."""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def export_csv(header: list[str], rows: list, path) -> None:
    """Write rows (sequences or dicts keyed by header) as RFC-4180 CSV."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            if isinstance(row, dict):
                row = [row[h] for h in header]
            writer.writerow([format_cell(v) for v in row])


def export_matrix_csv(matrix, path, col_prefix: str = "c") -> None:
    """Write a 2-D array with generated column names c0..cN-1."""
    import numpy as np

    matrix = np.asarray(matrix)
    header = [f"{col_prefix}{j}" for j in range(matrix.shape[1])]
    export_csv(header, [[float(v) for v in row] for row in matrix], path)
