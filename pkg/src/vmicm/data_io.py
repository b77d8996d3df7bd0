"""CSV ingestion and emission for datasets.

Schema: a header row with column ``y``, loading columns ``x1..xq``, and gene
columns ``g1..gp`` (``p`` may be zero).  The intercept gene column is implicit
and prepended by the loader.  Floats are written with 17 significant digits
so a write/read round trip is exact.
"""
from __future__ import annotations

import csv
import re
from pathlib import Path

import numpy as np

from .exceptions import SchemaError
from .model import Dataset

FLOAT_FMT = "{:.17g}"


def _column_layout(header: list[str]) -> tuple[int, list[int], list[int]]:
    names = [h.strip() for h in header]
    if len(set(names)) != len(names):
        raise SchemaError("duplicate column names in header")
    xcols, gcols = {}, {}
    y_idx = None
    for idx, name in enumerate(names):
        if name == "y":
            y_idx = idx
        elif m := re.fullmatch(r"x([1-9][0-9]*)", name):
            xcols[int(m.group(1))] = idx
        elif m := re.fullmatch(r"g([1-9][0-9]*)", name):
            gcols[int(m.group(1))] = idx
        else:
            raise SchemaError(f"unexpected column {name!r} (want y, x1..xq, g1..gp)")
    if y_idx is None:
        raise SchemaError("missing required column 'y'")
    if not xcols:
        raise SchemaError("need at least one loading column x1")
    for label, cols in (("x", xcols), ("g", gcols)):
        if cols and sorted(cols) != list(range(1, max(cols) + 1)):
            raise SchemaError(f"{label}-columns must be consecutive from {label}1")
    return y_idx, [xcols[i] for i in sorted(xcols)], [gcols[i] for i in sorted(gcols)]


def load_dataset(path) -> Dataset:
    """Parse a dataset CSV; report the offending row/column on bad cells."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        y_idx, x_idx, g_idx = _column_layout(header)
        rows = []
        for rownum, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise SchemaError(f"{path}: row {rownum} has {len(row)} cells, "
                                  f"expected {len(header)}")
            parsed = []
            for idx, cell in enumerate(row):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise SchemaError(
                        f"{path}: non-numeric value {cell!r} at row {rownum}, "
                        f"column {header[idx].strip()!r}") from None
            rows.append(parsed)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    data = np.asarray(rows)
    if not np.isfinite(data).all():
        bad = np.argwhere(~np.isfinite(data))[0]
        raise SchemaError(f"{path}: non-finite value at row {bad[0] + 2}, "
                          f"column {header[bad[1]].strip()!r}")
    y = data[:, y_idx]
    x = data[:, x_idx]
    g = np.column_stack([np.ones(len(rows))] + [data[:, j] for j in g_idx]) \
        if g_idx else np.ones((len(rows), 1))
    return Dataset(y=y, x=x, g=g)


def write_dataset(path, dataset: Dataset) -> None:
    """Emit a dataset in the loader's schema (intercept column dropped)."""
    path = Path(path)
    header = (["y"] + [f"x{j}" for j in range(1, dataset.q + 1)]
              + [f"g{k}" for k in range(1, dataset.p + 1)])
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(dataset.n):
            cells = [dataset.y[i], *dataset.x[i], *dataset.g[i, 1:]]
            writer.writerow([FLOAT_FMT.format(c) for c in cells])
