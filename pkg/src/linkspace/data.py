"""Tabular input, variable roles, coordinate transforms, scores and grouping.

Everything in this module is a pure function: inputs are parsed, imputed and
transformed into immutable numpy-backed containers that the clustering and
tour machinery consume.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

MAX_GROUPS = 13

PD_TOLERANCE = 1e-10  # smallest/largest eigenvalue ratio for accepting a covariance


class DataError(ValueError):
    """Raised for malformed input data or invalid transform requests."""


@dataclass(frozen=True)
class Dataset:
    """Raw parsed table: column-ordered, numeric columns hold NaN for missing."""

    n_rows: int
    names: tuple[str, ...]
    numeric: dict[str, np.ndarray]        # float arrays, NaN = missing
    categorical: dict[str, list[str]]     # everything that failed numeric parse

    def is_numeric(self, name: str) -> bool:
        return name in self.numeric


@dataclass(frozen=True)
class SpacedDataset:
    """Variables split into clustering space, linked space and extras."""

    clustering: np.ndarray                # n x p_c
    linked: np.ndarray                    # n x p_l
    extras: np.ndarray                    # n x p_k (may have 0 columns)
    clustering_names: tuple[str, ...]
    linked_names: tuple[str, ...]
    extras_names: tuple[str, ...]
    labels: tuple[str, ...] | None = None
    flag_columns: tuple[tuple[str, ...], ...] = ()
    flag_names: tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return self.clustering.shape[0]


@dataclass(frozen=True)
class CoordinateMatrix:
    """Transformed coordinates used for distances, clustering and display."""

    values: np.ndarray
    transform_id: str
    space: str = "clustering"

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise DataError("coordinate matrix contains non-finite entries")


@dataclass(frozen=True)
class CovarianceSpec:
    """Symmetric positive definite covariance with a reference point."""

    matrix: np.ndarray
    reference_point: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        r = np.asarray(self.reference_point, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DataError("covariance matrix must be square")
        if not np.allclose(m, m.T, atol=1e-9):
            raise DataError("covariance matrix must be symmetric")
        if r.shape != (m.shape[0],):
            raise DataError(
                f"reference point length {r.shape} does not match dimension {m.shape[0]}"
            )
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "reference_point", r)

    def inverse(self) -> np.ndarray:
        """Inverse of the covariance; rejects non-SPD or ill-conditioned input."""
        eigvals = np.linalg.eigvalsh(self.matrix)
        if eigvals[0] <= PD_TOLERANCE * max(eigvals[-1], 0.0):
            raise DataError("covariance matrix is singular or not positive definite")
        return np.linalg.inv(self.matrix)


@dataclass(frozen=True)
class ScoreVector:
    name: str
    values: np.ndarray


@dataclass(frozen=True)
class BinAssignment:
    n_bins: int
    bin_of: np.ndarray                    # 1-based bin index per observation
    boundaries: np.ndarray                # strictly ascending inner boundaries


@dataclass(frozen=True)
class GroupAssignment:
    group_of: np.ndarray                  # 1-based group index per observation
    group_names: tuple[str, ...]


def parse_dataset(raw: bytes | str, delimiter: str = ",") -> Dataset:
    """Parse CSV text with a header row into a Dataset.

    A column is numeric iff every non-missing cell parses as a float;
    "NA" and empty cells count as missing.
    """
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    reader = csv.reader(io.StringIO(raw), delimiter=delimiter)
    rows = [row for row in reader if row]
    if len(rows) < 2:
        raise DataError("input needs a header row and at least one data row")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        dupes = sorted({h for h in header if header.count(h) > 1})
        raise DataError(f"duplicate column names: {', '.join(dupes)}")
    width = len(header)
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != width:
            raise DataError(f"row {i} has {len(row)} fields, expected {width}")

    cells = [[c.strip() for c in row] for row in rows[1:]]
    n = len(cells)
    numeric: dict[str, np.ndarray] = {}
    categorical: dict[str, list[str]] = {}
    for j, name in enumerate(header):
        col = [row[j] for row in cells]
        parsed = np.empty(n)
        ok = True
        for i, cell in enumerate(col):
            if cell == "" or cell == "NA":
                parsed[i] = np.nan
            else:
                try:
                    parsed[i] = float(cell)
                except ValueError:
                    ok = False
                    break
        if ok:
            numeric[name] = parsed
        else:
            categorical[name] = col
    return Dataset(n_rows=n, names=tuple(header), numeric=numeric, categorical=categorical)


def impute_missing(m: np.ndarray) -> np.ndarray:
    """Replace NaN cells with the column median of non-missing values."""
    m = np.asarray(m, dtype=float)
    out = m.copy()
    for j in range(m.shape[1]):
        col = m[:, j]
        mask = np.isnan(col)
        if mask.all():
            raise DataError(f"column {j} has no non-missing values")
        if mask.any():
            out[mask, j] = np.median(col[~mask])
    return out


def assign_roles(
    ds: Dataset,
    clustering: list[str],
    linked: list[str],
    label: str | None = None,
    flags: list[str] | None = None,
) -> SpacedDataset:
    """Split dataset columns into clustering / linked / extras by name.

    Unassigned numeric columns become extras.  Numeric matrices are
    median-imputed so the result carries no missing values.
    """
    flags = flags or []
    for name in [*clustering, *linked, *flags] + ([label] if label else []):
        if name not in ds.names:
            raise DataError(f"unknown variable: {name}")
    overlap = set(clustering) & set(linked)
    if overlap:
        raise DataError(f"variables assigned to both spaces: {', '.join(sorted(overlap))}")
    if not clustering:
        raise DataError("clustering space is empty")
    if not linked:
        raise DataError("linked space is empty")
    for name in clustering + linked:
        if not ds.is_numeric(name):
            raise DataError(f"variable {name} is not numeric")

    assigned = set(clustering) | set(linked) | {label} | set(flags)
    extras_names = [n for n in ds.names if ds.is_numeric(n) and n not in assigned]

    def matrix(names: list[str]) -> np.ndarray:
        if not names:
            return np.empty((ds.n_rows, 0))
        return impute_missing(np.column_stack([ds.numeric[n] for n in names]))

    labels = None
    if label is not None:
        if ds.is_numeric(label):
            labels = tuple(str(v) for v in ds.numeric[label])
        else:
            labels = tuple(ds.categorical[label])
    flag_cols = []
    for name in flags:
        if ds.is_numeric(name):
            flag_cols.append(tuple(str(v) for v in ds.numeric[name]))
        else:
            flag_cols.append(tuple(ds.categorical[name]))

    return SpacedDataset(
        clustering=matrix(clustering),
        linked=matrix(linked),
        extras=matrix(extras_names),
        clustering_names=tuple(clustering),
        linked_names=tuple(linked),
        extras_names=tuple(extras_names),
        labels=labels,
        flag_columns=tuple(flag_cols),
        flag_names=tuple(flags),
    )


def center_scale_coords(
    m: np.ndarray, center: bool = True, scale: bool = True, space: str = "clustering"
) -> CoordinateMatrix:
    """Per-column centering and/or scaling (sd with n-1 denominator)."""
    m = np.asarray(m, dtype=float)
    out = m.copy()
    if center:
        out = out - out.mean(axis=0)
    if scale:
        sd = m.std(axis=0, ddof=1)
        const = np.where(sd == 0)[0]
        if const.size:
            raise DataError(f"cannot scale constant column {const[0]}")
        out = out / sd
    tid = {"": "raw", "c": "center", "s": "scale", "cs": "center+scale"}[
        ("c" if center else "") + ("s" if scale else "")
    ]
    return CoordinateMatrix(values=out, transform_id=tid, space=space)


def pull_coords(m: np.ndarray, cov: CovarianceSpec, space: str = "clustering") -> CoordinateMatrix:
    """Covariance-weighted residual coordinates relative to the reference point.

    Output column j is the j-th row of the inverse covariance applied to the
    centered observation, normalized by the square root of the inverse
    covariance diagonal, so Euclidean distance on the result approximates a
    chi-squared statistic.
    """
    m = np.asarray(m, dtype=float)
    inv = cov.inverse()
    centered = m - cov.reference_point
    out = centered @ inv / np.sqrt(np.diag(inv))
    return CoordinateMatrix(values=out, transform_id="pull", space=space)


def chi2_score(m: np.ndarray, cov: CovarianceSpec, name: str = "chi2") -> ScoreVector:
    """Quadratic-form score (y - z)' Sigma^-1 (y - z) per observation."""
    m = np.asarray(m, dtype=float)
    inv = cov.inverse()
    centered = m - cov.reference_point
    values = np.einsum("ij,jk,ik->i", centered, inv, centered)
    return ScoreVector(name=name, values=values)


def external_score(values: np.ndarray, name: str, n: int | None = None) -> ScoreVector:
    """Wrap externally computed per-observation scores, validating shape."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 1:
        raise DataError("score values must be a flat vector")
    if n is not None and values.shape[0] != n:
        raise DataError(f"score length {values.shape[0]} does not match n={n}")
    bad = np.where(~np.isfinite(values))[0]
    if bad.size:
        raise DataError(f"non-finite score at index {bad[0]}")
    return ScoreVector(name=name, values=values)


def quantile_bins(s: ScoreVector, n_bins: int) -> BinAssignment:
    """Assign observations to score-quantile bins.

    Boundaries sit at quantiles i/n_bins (linear interpolation between order
    statistics); each observation goes to the first bin whose upper boundary
    covers its score.  Duplicate boundaries collapse, leaving trailing bins
    empty.
    """
    if n_bins < 2:
        raise DataError("n_bins must be at least 2")
    values = s.values
    if values.shape[0] < n_bins:
        raise DataError("fewer observations than bins")
    qs = np.arange(1, n_bins) / n_bins
    boundaries = np.unique(np.quantile(values, qs))
    bin_of = np.searchsorted(boundaries, values, side="left") + 1
    return BinAssignment(n_bins=n_bins, bin_of=bin_of, boundaries=boundaries)


def cross_groups(flags: list[tuple[str, ...]] | list[list[str]]) -> GroupAssignment:
    """Combine flag columns into one group per observed value combination."""
    if not flags:
        raise DataError("at least one flag column is required")
    n = len(flags[0])
    for col in flags:
        if len(col) != n:
            raise DataError("flag columns differ in length")
    combos = ["/".join(str(col[i]) for col in flags) for i in range(n)]
    names = sorted(set(combos))
    if len(names) > MAX_GROUPS:
        raise DataError(
            f"{len(names)} group combinations exceed the {MAX_GROUPS}-group display limit"
        )
    index = {name: g + 1 for g, name in enumerate(names)}
    group_of = np.array([index[c] for c in combos], dtype=int)
    return GroupAssignment(group_of=group_of, group_names=tuple(names))
