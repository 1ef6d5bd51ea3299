"""Dataset container, delimited-text ingestion and mechanical validity checks.

A record is (y, delta1, delta2, z, w, x1..xm) where y is the follow-up time,
delta1/delta2 flag an observed event / dependent censoring, z is the binary
treatment, w the binary instrument and x the covariate vector. The covariate
schema declares which columns are continuous and which are discrete codes.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace

import numpy as np

REQUIRED_COLUMNS = ("y", "delta1", "delta2", "z", "w")


class DataError(ValueError):
    """Raised when a dataset or record violates a structural invariant."""


@dataclass(frozen=True)
class CovariateSchema:
    """Covariate column labels and their kind ('continuous' or 'discrete')."""

    names: tuple
    kinds: tuple

    def __post_init__(self):
        if len(self.names) != len(self.kinds):
            raise DataError("schema names and kinds must have equal length")
        if len(set(self.names)) != len(self.names):
            raise DataError("covariate labels must be unique")
        for kind in self.kinds:
            if kind not in ("continuous", "discrete"):
                raise DataError(f"unknown covariate kind {kind!r}")

    @property
    def m(self):
        return len(self.names)

    @property
    def m_c(self):
        return sum(k == "continuous" for k in self.kinds)

    @property
    def continuous_idx(self):
        return np.array([i for i, k in enumerate(self.kinds) if k == "continuous"], dtype=int)

    @property
    def discrete_idx(self):
        return np.array([i for i, k in enumerate(self.kinds) if k == "discrete"], dtype=int)


@dataclass(frozen=True)
class Dataset:
    """Immutable column-oriented sample of n i.i.d. records."""

    y: np.ndarray
    delta1: np.ndarray
    delta2: np.ndarray
    z: np.ndarray
    w: np.ndarray
    x: np.ndarray
    schema: CovariateSchema

    def __post_init__(self):
        n = self.y.shape[0]
        for name in ("delta1", "delta2", "z", "w"):
            if getattr(self, name).shape != (n,):
                raise DataError(f"column {name} has wrong length")
        if self.x.shape != (n, self.schema.m):
            raise DataError("covariate matrix does not match schema width")
        if n < 1:
            raise DataError("dataset must contain at least one record")
        for arr in (self.y, self.delta1, self.delta2, self.z, self.w, self.x):
            arr.setflags(write=False)

    @property
    def n(self):
        return self.y.shape[0]

    def subset(self, idx):
        """New Dataset holding rows ``idx`` (order preserved, duplicates allowed)."""
        idx = np.asarray(idx)
        return Dataset(
            y=self.y[idx].copy(),
            delta1=self.delta1[idx].copy(),
            delta2=self.delta2[idx].copy(),
            z=self.z[idx].copy(),
            w=self.w[idx].copy(),
            x=self.x[idx].copy(),
            schema=self.schema,
        )


def _validate_row(row_no, y, d1, d2, z, w):
    if y <= 0:
        raise DataError(f"row {row_no}: nonpositive follow-up time y={y}")
    for label, val in (("delta1", d1), ("delta2", d2), ("z", z), ("w", w)):
        if val not in (0.0, 1.0):
            raise DataError(f"row {row_no}: indicator {label}={val} outside {{0,1}}")
    if d1 + d2 > 1:
        raise DataError(f"row {row_no}: delta1=delta2=1 is impossible (Y is a single minimum)")


def load_dataset(source, schema):
    """Read a comma-separated file with header y,delta1,delta2,z,w,<covariates>.

    ``source`` is a path or a text stream. Rows are validated one by one;
    the first violation raises DataError naming the offending row (the header
    is row 1). Missing values are rejected.
    """
    if isinstance(source, (str, bytes)):
        with open(source, "r", newline="") as fh:
            return load_dataset(fh, schema)
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("empty input: missing header row") from None
    header = [h.strip() for h in header]
    expected = list(REQUIRED_COLUMNS) + list(schema.names)
    if header != expected:
        missing = [c for c in expected if c not in header]
        if missing:
            raise DataError(f"missing column(s): {', '.join(missing)}")
        raise DataError(f"header {header} does not match expected {expected}")

    cols = {name: [] for name in expected}
    for row_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(expected):
            raise DataError(f"row {row_no}: expected {len(expected)} cells, got {len(row)}")
        vals = []
        for label, cell in zip(expected, row):
            cell = cell.strip()
            if cell == "":
                raise DataError(f"row {row_no}: missing value in column {label}")
            try:
                vals.append(float(cell))
            except ValueError:
                raise DataError(f"row {row_no}: non-numeric cell {cell!r} in column {label}") from None
        y, d1, d2, z, w = vals[:5]
        _validate_row(row_no, y, d1, d2, z, w)
        for label, val in zip(expected, vals):
            cols[label].append(val)

    if not cols["y"]:
        raise DataError("no data rows")
    x = np.column_stack([cols[name] for name in schema.names]) if schema.m else np.empty((len(cols["y"]), 0))
    return Dataset(
        y=np.asarray(cols["y"]),
        delta1=np.asarray(cols["delta1"]),
        delta2=np.asarray(cols["delta2"]),
        z=np.asarray(cols["z"]),
        w=np.asarray(cols["w"]),
        x=x,
        schema=schema,
    )


def write_dataset(dataset, dest):
    """Write the dataset as comma-separated text with 17 significant digits.

    Round-trips bit-exactly through load_dataset.
    """
    if isinstance(dest, (str, bytes)):
        with open(dest, "w", newline="") as fh:
            write_dataset(dataset, fh)
            return
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(list(REQUIRED_COLUMNS) + list(dataset.schema.names))
    for i in range(dataset.n):
        row = [dataset.y[i], dataset.delta1[i], dataset.delta2[i], dataset.z[i], dataset.w[i]]
        row += list(dataset.x[i])
        writer.writerow([f"{v:.17g}" for v in row])


def dataset_to_string(dataset):
    buf = io.StringIO()
    write_dataset(dataset, buf)
    return buf.getvalue()


def check_full_rank(dataset, rel_tol=1e-10):
    """Numerical full-rank diagnostic for the sample covariance of (Z, X).

    Returns (ok, ratio) where ratio is smallest/largest singular value of the
    covariance matrix. Requires n > m + 1.
    """
    if dataset.n <= dataset.schema.m + 1:
        raise DataError("full-rank check needs n > m + 1")
    design = np.column_stack([dataset.z, dataset.x])
    cov = np.cov(design, rowvar=False)
    cov = np.atleast_2d(cov)
    sv = np.linalg.svd(cov, compute_uv=False)
    ratio = float(sv[-1] / sv[0]) if sv[0] > 0 else 0.0
    return ratio > rel_tol, ratio


def standardize_column(dataset, column):
    """Return a copy of the dataset with a continuous column scaled to mean 0, sd 1."""
    if column not in dataset.schema.names:
        raise DataError(f"unknown column {column!r}")
    j = dataset.schema.names.index(column)
    if dataset.schema.kinds[j] != "continuous":
        raise DataError(f"column {column!r} is not continuous")
    col = dataset.x[:, j]
    sd = np.std(col, ddof=1)
    if sd == 0 or not np.isfinite(sd):
        raise DataError(f"column {column!r} has zero variance")
    x = dataset.x.copy()
    x[:, j] = (col - np.mean(col)) / sd
    return replace(dataset, x=x)
