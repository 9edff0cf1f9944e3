"""Strict CSV ingestion: header required, numeric cells, 0/1 outcome."""

from __future__ import annotations

import csv

import numpy as np

from .data import Dataset
from .errors import DataError


def read_csv_dataset(path: str, outcome: str) -> Dataset:
    """Load a comma-separated file into a Dataset.

    Rejects missing values, non-numeric cells and non-{0,1} outcome values
    with row/column diagnostics (rows counted from 1, header is row 1).
    """
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        header = [h.strip() for h in header]
        if outcome not in header:
            raise DataError(f"{path}: outcome column {outcome!r} not in header {header}")
        columns: dict[str, list[float]] = {name: [] for name in header}
        for rowno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(
                    f"{path}: row {rowno} has {len(row)} cells, expected {len(header)}"
                )
            for name, cell in zip(header, row):
                cell = cell.strip()
                if cell == "":
                    raise DataError(f"{path}: row {rowno}, column {name!r}: missing value")
                try:
                    value = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: row {rowno}, column {name!r}: "
                        f"non-numeric cell {cell!r}"
                    ) from None
                if name == outcome and value not in (0.0, 1.0):
                    raise DataError(
                        f"{path}: row {rowno}, column {name!r}: "
                        f"outcome must be 0 or 1, got {cell}"
                    )
                columns[name].append(value)
    y = np.array(columns.pop(outcome))
    if y.size == 0:
        raise DataError(f"{path}: no data rows")
    return Dataset(y=y, columns={k: np.array(v) for k, v in columns.items()})
