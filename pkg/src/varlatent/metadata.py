"""Univariate descriptors of a variable: summary statistics, histogram PDF,
and a rasterized empirical CDF."""
from __future__ import annotations

from dataclasses import astuple, dataclass

import numpy as np

from .ingest import DataTable

ENTROPY_BINS = 20
PDF_BINS = 20
CDF_GRID_X = 26
CDF_GRID_Y = 25

STAT_NAMES = ("mean", "std", "entropy", "ks_uniform", "symmetry")


@dataclass(frozen=True)
class StatVector:
    mean: float
    std: float
    entropy: float
    ks_uniform: float
    symmetry: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self))


def _scaled(col: np.ndarray) -> np.ndarray:
    """Min-max scale onto [0, 1]; a constant vector sits at 0.5."""
    lo, hi = col.min(), col.max()
    if hi == lo:
        return np.full(col.shape, 0.5)
    return (col - lo) / (hi - lo)


def bin_index(col: np.ndarray, bins: int) -> np.ndarray:
    """Equal-width bin of each value over [min, max]; the max lands in the top bin."""
    idx = np.floor(_scaled(col) * bins).astype(np.int64)
    return np.minimum(idx, bins - 1)


def _check(col) -> np.ndarray:
    col = np.asarray(col, dtype=np.float64).ravel()
    if col.size < 2:
        raise ValueError(f"need at least 2 values, got {col.size}")
    return col


def empirical_pdf(col, bins: int = PDF_BINS) -> np.ndarray:
    """Equal-width histogram over [min, max], normalized to total mass 1."""
    if bins < 2:
        raise ValueError("bins must be >= 2")
    col = np.asarray(col, dtype=np.float64).ravel()
    counts = np.bincount(bin_index(col, bins), minlength=bins).astype(np.float64)
    return counts / counts.sum()


def univariate_stats(col) -> StatVector:
    """Mean, population std, 20-bin entropy (nats), KS distance to uniform, skew.

    ``ks_uniform`` compares the ECDF of the min-max scaled values with the
    uniform CDF on [0, 1]; ``symmetry`` is (mean - median) / std, 0 for a
    constant vector.
    """
    col = _check(col)
    mean = float(col.mean())
    std = float(col.std())
    p = empirical_pdf(col, ENTROPY_BINS)
    nz = p[p > 0]
    entropy = float(-(nz * np.log(nz)).sum()) + 0.0
    u = np.sort(_scaled(col))
    n = u.size
    i = np.arange(1, n + 1)
    ks = float(max(np.max(i / n - u), np.max(u - (i - 1) / n)))
    symmetry = 0.0 if std == 0 else float((mean - np.median(col)) / std)
    return StatVector(mean, std, max(entropy, 0.0), min(max(ks, 0.0), 1.0), symmetry)


def empirical_cdf_grid(col) -> np.ndarray:
    """Binary 25 x 26 raster of the ECDF, flattened row-major (650 values).

    Column ``x`` covers one of 26 equal-width cells of the scaled support;
    it holds a single 1 in the probability row ``y`` (of 25) containing the
    ECDF value at the cell center.
    """
    col = _check(col)
    u = np.sort(_scaled(col))
    centers = (np.arange(CDF_GRID_X) + 0.5) / CDF_GRID_X
    F = np.searchsorted(u, centers, side="right") / u.size
    y = np.minimum(np.floor(F * CDF_GRID_Y).astype(np.int64), CDF_GRID_Y - 1)
    grid = np.zeros((CDF_GRID_Y, CDF_GRID_X))
    grid[y, np.arange(CDF_GRID_X)] = 1.0
    return grid.ravel()


def stats_table(t: DataTable) -> DataTable:
    """One row per variable with the five statistics as columns."""
    rows = np.array([univariate_stats(t.values[:, k]).as_array() for k in range(t.n_cols)])
    return DataTable(list(STAT_NAMES), rows, list(t.variable_names))


def pdf_table(t: DataTable, bins: int = PDF_BINS) -> DataTable:
    rows = np.array([empirical_pdf(t.values[:, k], bins) for k in range(t.n_cols)])
    return DataTable([f"pdf_{b}" for b in range(bins)], rows, list(t.variable_names))


def cdf_grid_table(t: DataTable) -> DataTable:
    rows = np.array([empirical_cdf_grid(t.values[:, k]) for k in range(t.n_cols)])
    names = [f"cdf_{y}_{x}" for y in range(CDF_GRID_Y) for x in range(CDF_GRID_X)]
    return DataTable(names, rows, list(t.variable_names))
