"""Columnar dataset of a binary outcome plus named numeric covariates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, UnknownColumn


@dataclass(frozen=True)
class Dataset:
    """Binary-outcome dataset with named numeric columns.

    The outcome vector ``y`` must contain only 0s and 1s; every named
    column must be finite and have the same length as ``y``.
    """

    y: np.ndarray
    columns: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.ndim != 1 or y.size < 1:
            raise DataError("outcome must be a non-empty 1-D vector")
        if not np.all(np.isin(y, (0.0, 1.0))):
            bad = int(np.flatnonzero(~np.isin(y, (0.0, 1.0)))[0])
            raise DataError(f"outcome must be 0/1; offending value at row {bad}")
        object.__setattr__(self, "y", y)
        cols = {}
        for name, values in self.columns.items():
            v = np.asarray(values, dtype=float)
            if v.shape != y.shape:
                raise DataError(
                    f"column {name!r} has length {v.size}, expected {y.size}"
                )
            if not np.all(np.isfinite(v)):
                bad = int(np.flatnonzero(~np.isfinite(v))[0])
                raise DataError(f"column {name!r} has a non-finite value at row {bad}")
            cols[name] = v
        object.__setattr__(self, "columns", cols)

    @property
    def n(self) -> int:
        return self.y.size

    def column(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise UnknownColumn(name) from None

    def with_column(self, name: str, values) -> "Dataset":
        """Copy of the dataset with one column replaced (or added)."""
        cols = dict(self.columns)
        cols[name] = np.asarray(values, dtype=float)
        return Dataset(y=self.y, columns=cols)

    def take(self, idx) -> "Dataset":
        """Row subset / resample by integer index array."""
        idx = np.asarray(idx, dtype=int)
        return Dataset(
            y=self.y[idx],
            columns={k: v[idx] for k, v in self.columns.items()},
        )
