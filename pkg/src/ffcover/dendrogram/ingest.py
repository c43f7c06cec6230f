"""CSV ingest for dendrogram fitting."""

from __future__ import annotations

import csv
import math

import numpy as np

from ..errors import IngestError


def read_data_csv(path, columns=None, *, log_transform: bool = False, standardize: bool = False,
                  min_columns: int = 1) -> tuple[np.ndarray, list[str]]:
    """Load selected numeric columns from a CSV file with a header row.

    ``log_transform`` takes natural logs (values must be positive);
    ``standardize`` subtracts column means and divides by the sample
    standard deviation (``ddof=1``).  Errors name the offending row and
    column.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise IngestError(f"{path}: empty file")
        header = [h.strip() for h in header]
        names = list(columns) if columns else header
        missing = [c for c in names if c not in header]
        if missing:
            raise IngestError(f"{path}: missing column {missing[0]!r}")
        idx = [header.index(c) for c in names]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            vals = []
            for c, k in zip(names, idx):
                cell = row[k].strip() if k < len(row) else ""
                try:
                    x = float(cell)
                except ValueError:
                    raise IngestError(f"{path}:{lineno}: column {c!r} has non-numeric value {cell!r}") from None
                if not math.isfinite(x):
                    raise IngestError(f"{path}:{lineno}: column {c!r} is not finite")
                if log_transform:
                    if x <= 0:
                        raise IngestError(f"{path}:{lineno}: column {c!r} must be positive to log-transform")
                    x = math.log(x)
                vals.append(x)
            rows.append(vals)
    if len(names) < min_columns:
        raise IngestError(f"{path}: need at least {min_columns} numeric columns, got {len(names)}")
    data = np.array(rows, dtype=float).reshape(len(rows), len(names))
    if standardize:
        if len(data) < 2:
            raise IngestError(f"{path}: need at least 2 rows to standardize")
        sd = data.std(axis=0, ddof=1)
        if np.any(sd == 0):
            raise IngestError(f"{path}: column {names[int(np.argmin(sd))]!r} is constant")
        data = (data - data.mean(axis=0)) / sd
    return data, names
