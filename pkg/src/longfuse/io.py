"""CSV reading and writing for the command line workflow.

Files are RFC-4180 style with a header row.  Every cell is numeric; a
missing value is written as ``NA`` and read back from ``NA``, ``NaN`` or
an empty cell.  Tables in memory are plain mappings of column name to
float array with NaN marking missing entries, which is exactly what
:func:`longfuse.dataset.concatenate` accepts.
"""

from __future__ import annotations

import csv
from typing import Mapping

import numpy as np

from .errors import DataError

__all__ = ["read_table_csv", "write_table_csv"]

_MISSING_TOKENS = {"", "NA", "NaN", "nan"}


def read_table_csv(path: str) -> dict[str, np.ndarray]:
    """Read a numeric CSV into a column mapping (NaN for missing cells)."""
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        names = [h.strip() for h in header]
        if any(not n for n in names):
            raise DataError(f"{path}: blank column name in header")
        if len(set(names)) != len(names):
            raise DataError(f"{path}: duplicate column names in header")
        columns: list[list[float]] = [[] for _ in names]
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(names):
                raise DataError(
                    f"{path}:{lineno}: expected {len(names)} cells, got {len(row)}"
                )
            for j, cell in enumerate(row):
                token = cell.strip()
                if token in _MISSING_TOKENS:
                    columns[j].append(np.nan)
                    continue
                try:
                    columns[j].append(float(token))
                except ValueError:
                    raise DataError(
                        f"{path}:{lineno}: column {names[j]!r}: "
                        f"cannot parse {cell!r} as a number"
                    ) from None
    if not columns[0]:
        raise DataError(f"{path}: no data rows")
    return {n: np.array(c, dtype=float) for n, c in zip(names, columns)}


def write_table_csv(path: str, table: Mapping[str, np.ndarray]) -> None:
    """Write a column mapping as CSV; NaN cells become ``NA``."""
    names = list(table)
    arrays = [np.asarray(table[n], dtype=float) for n in names]
    n_rows = arrays[0].shape[0]
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(names)
        for i in range(n_rows):
            writer.writerow(
                ["NA" if np.isnan(a[i]) else repr(float(a[i])) for a in arrays]
            )
