"""Pairwise dependence matrices between variables.

Correlations (Pearson, Spearman, Kendall tau-b), their squares, cosine
similarity, and three measures read off 2-D equal-width histograms: mutual
information, a weighted Jaccard overlap against the independence product,
and the same overlap against a diagonal reference ("linear" Jaccard).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .ingest import DataError, DataTable, minmax_normalize
from .metadata import bin_index

CORRELATIONS = ("pearson", "spearman", "kendall")
METRICS = (
    "pearson", "spearman", "kendall",
    "pearson_r2", "spearman_r2", "kendall_r2",
    "cosine", "jaccard", "jaccard_linear", "mutual_info",
)
# produced by the gradient-field aggregations, not by metric_matrix
DERIVED_METRICS = ("cp_mean", "cp_of_means")
TRANSFORMS = ("none", "laplacian", "ones_complement")
SIGNED_METRICS = ("pearson", "spearman", "kendall", "cosine")


@dataclass
class AdjacencyMatrix:
    names: list[str]
    values: np.ndarray
    metric: str
    transform: str = "none"

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        k = len(self.names)
        if self.values.shape != (k, k):
            raise ValueError(f"values shape {self.values.shape} does not match {k} names")
        if self.metric not in METRICS + DERIVED_METRICS:
            raise ValueError(f"unknown metric {self.metric!r}; valid: {', '.join(METRICS)}")
        if self.transform not in TRANSFORMS:
            raise ValueError(f"unknown transform {self.transform!r}; valid: {', '.join(TRANSFORMS)}")

    def to_table(self) -> DataTable:
        return DataTable(list(self.names), self.values.copy(), list(self.names))

    def upper(self) -> np.ndarray:
        """Strict upper-triangle entries, row-major."""
        return self.values[np.triu_indices(len(self.names), 1)]


@dataclass
class JointDensity2D:
    grid: np.ndarray
    bins: int


def default_bins(n: int) -> int:
    """Histogram bins per axis giving about 2.5 expected counts per 2-D cell, within [2, 20]."""
    return int(min(20, max(2, math.ceil(math.sqrt(n / 2.5)))))


def _require_varying(t: DataTable) -> None:
    const = np.all(t.values == t.values[:1], axis=0)
    if const.any():
        name = t.variable_names[int(np.argmax(const))]
        raise DataError(f"column {name!r} is constant; correlation undefined")


def _pearson(x: np.ndarray) -> np.ndarray:
    xc = x - x.mean(axis=0)
    xc = xc / np.sqrt((xc * xc).sum(axis=0))
    r = xc.T @ xc
    r = np.clip((r + r.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(r, 1.0)
    return r


def _kendall_tau_b(x: np.ndarray) -> np.ndarray:
    """Tau-b for every column pair from exact concordance counts.

    For each observation i the signs of x[j] - x[i] (j > i) form one block of
    the pair-sign matrix S; S^T S accumulates (concordant - discordant), and the
    count of nonzero signs per column gives the untied-pair totals.
    """
    n, k = x.shape
    s_sum = np.zeros((k, k))
    untied = np.zeros(k)
    block: list[np.ndarray] = []
    rows = 0
    limit = max(2000, 4_000_000 // max(k, 1))
    for i in range(n - 1):
        s = np.sign(x[i + 1:] - x[i])
        block.append(s)
        rows += s.shape[0]
        if rows >= limit or i == n - 2:
            b = np.concatenate(block)
            s_sum += b.T @ b
            untied += np.count_nonzero(b, axis=0)
            block, rows = [], 0
    tau = s_sum / np.sqrt(np.outer(untied, untied))
    tau = np.clip((tau + tau.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(tau, 1.0)
    return tau


def correlation_matrix(t: DataTable, method: str = "pearson") -> AdjacencyMatrix:
    """Pearson, Spearman (Pearson on average ranks) or Kendall tau-b."""
    if method not in CORRELATIONS:
        raise ValueError(f"unknown correlation {method!r}; valid: {', '.join(CORRELATIONS)}")
    if t.n_rows < 3:
        raise DataError(f"need at least 3 observations, got {t.n_rows}")
    _require_varying(t)
    if method == "pearson":
        r = _pearson(t.values)
    elif method == "spearman":
        r = _pearson(rankdata(t.values, axis=0, method="average"))
    else:
        r = _kendall_tau_b(t.values)
    return AdjacencyMatrix(list(t.variable_names), r, method)


def r2_matrix(c: AdjacencyMatrix) -> AdjacencyMatrix:
    if c.metric not in CORRELATIONS or c.transform != "none":
        raise ValueError(f"r2_matrix needs an untransformed correlation, got {c.metric}/{c.transform}")
    return AdjacencyMatrix(list(c.names), c.values**2, f"{c.metric}_r2")


def cosine_matrix(t: DataTable) -> AdjacencyMatrix:
    """Uncentered cosine similarity of the columns as given."""
    norms = np.sqrt((t.values**2).sum(axis=0))
    if np.any(norms == 0):
        name = t.variable_names[int(np.argmin(norms))]
        raise DataError(f"column {name!r} has zero norm")
    u = t.values / norms
    c = u.T @ u
    c = np.clip((c + c.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(c, 1.0)
    return AdjacencyMatrix(list(t.variable_names), c, "cosine")


def joint_density(x, y, bins: int) -> JointDensity2D:
    """2-D equal-width histogram of min-max scaled (x, y) with total mass 1."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise ValueError("need at least 2 observations")
    if bins < 2:
        raise ValueError("bins must be >= 2")
    flat = bin_index(x, bins) * bins + bin_index(y, bins)
    grid = np.bincount(flat, minlength=bins * bins).reshape(bins, bins) / x.size
    return JointDensity2D(grid, bins)


def _joint_blocks(t: DataTable, bins: int, chunk: int | None = None):
    """Yield (start, P) where P[a, :, b, :] is the joint density of column
    start+a with every column b, all from one one-hot product."""
    n, k = t.shape
    idx = np.column_stack([bin_index(t.values[:, c], bins) for c in range(k)])
    onehot = np.zeros((n, k * bins))
    onehot[np.arange(n)[:, None], np.arange(k) * bins + idx] = 1.0
    chunk = chunk or max(1, 2_000_000 // (k * bins * bins))
    for start in range(0, k, chunk):
        stop = min(k, start + chunk)
        counts = onehot[:, start * bins:stop * bins].T @ onehot
        yield start, counts.reshape(stop - start, bins, k, bins) / n


def _resolve_bins(t: DataTable, bins: int | None) -> int:
    bins = default_bins(t.n_rows) if bins is None else int(bins)
    if bins < 2:
        raise ValueError("bins must be >= 2")
    return bins


def mutual_information_matrix(t: DataTable, bins: int | None = None) -> AdjacencyMatrix:
    """Histogram mutual information in nats; the diagonal is each marginal entropy."""
    bins = _resolve_bins(t, bins)
    k = t.n_cols
    mi = np.zeros((k, k))
    for start, P in _joint_blocks(t, bins):
        px = P.sum(axis=3)  # (c, B, K)
        pa = px[:, :, start:start + P.shape[0]].diagonal(axis1=0, axis2=2).T  # (c, B)
        pb = P.sum(axis=1)  # (c, K, B)
        ref = pa[:, :, None, None] * pb[:, None, :, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(P > 0, P * np.log(P / ref), 0.0)
        mi[start:start + P.shape[0]] = terms.sum(axis=(1, 3))
    mi = np.maximum((mi + mi.T) / 2.0, 0.0)
    return AdjacencyMatrix(list(t.variable_names), mi, "mutual_info")


def jaccard_matrix(t: DataTable, bins: int | None = None, variant: str = "plain") -> AdjacencyMatrix:
    """Weighted Jaccard sum(min(P, Q)) / sum(max(P, Q)) of each joint density
    P against a reference Q: the product of marginals ("plain") or uniform
    mass on the diagonal cells ("linear")."""
    if variant not in ("plain", "linear"):
        raise ValueError(f"variant must be 'plain' or 'linear', got {variant!r}")
    bins = _resolve_bins(t, bins)
    k = t.n_cols
    out = np.zeros((k, k))
    diag = np.eye(bins) / bins
    for start, P in _joint_blocks(t, bins):
        if variant == "linear":
            Q = np.broadcast_to(diag[None, :, None, :], P.shape)
        else:
            pa = P.sum(axis=3)[:, :, start:start + P.shape[0]].diagonal(axis1=0, axis2=2).T
            pb = P.sum(axis=1)
            Q = pa[:, :, None, None] * pb[:, None, :, :]
        out[start:start + P.shape[0]] = np.minimum(P, Q).sum(axis=(1, 3)) / np.maximum(P, Q).sum(axis=(1, 3))
    out = np.clip((out + out.T) / 2.0, 0.0, 1.0)
    metric = "jaccard_linear" if variant == "linear" else "jaccard"
    return AdjacencyMatrix(list(t.variable_names), out, metric)


def laplacian_transform(a: AdjacencyMatrix) -> AdjacencyMatrix:
    """D - A with D the diagonal of full row sums."""
    if a.transform != "none":
        raise ValueError("matrix is already transformed")
    if np.any(a.values < 0):
        raise ValueError(f"laplacian needs nonnegative entries; {a.metric} has negatives")
    lap = np.diag(a.values.sum(axis=1)) - a.values
    return AdjacencyMatrix(list(a.names), lap, a.metric, "laplacian")


def ones_complement_transform(a: AdjacencyMatrix, tol: float = 1e-9) -> AdjacencyMatrix:
    """Elementwise |1 - a|, turning a [0, 1] similarity into a distance."""
    if a.values.min() < -tol or a.values.max() > 1.0 + tol:
        raise ValueError(f"ones_complement needs entries in [0, 1]; {a.metric} spans "
                         f"[{a.values.min():.4g}, {a.values.max():.4g}]")
    v = np.clip(a.values, 0.0, 1.0)
    return AdjacencyMatrix(list(a.names), np.abs(1.0 - v), a.metric, "ones_complement")


def metric_matrix(t: DataTable, metric: str, transform: str = "none", bins: int | None = None) -> AdjacencyMatrix:
    """Any named metric followed by an optional transform.

    Cosine similarity is taken on the min-max normalized columns.
    """
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; valid: {', '.join(METRICS)}")
    if transform not in TRANSFORMS:
        raise ValueError(f"unknown transform {transform!r}; valid: {', '.join(TRANSFORMS)}")
    if metric in CORRELATIONS:
        a = correlation_matrix(t, metric)
    elif metric.endswith("_r2"):
        a = r2_matrix(correlation_matrix(t, metric[:-3]))
    elif metric == "cosine":
        a = cosine_matrix(minmax_normalize(t)[0])
    elif metric == "mutual_info":
        a = mutual_information_matrix(t, bins)
    else:
        a = jaccard_matrix(t, bins, "linear" if metric == "jaccard_linear" else "plain")
    if transform == "laplacian":
        a = laplacian_transform(a)
    elif transform == "ones_complement":
        a = ones_complement_transform(a)
    return a


@dataclass
class MetricReport:
    pairs: list[tuple[str, str]]
    columns: tuple[str, ...]
    values: np.ndarray

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["var_a", "var_b", *self.columns])
            for (a, b), row in zip(self.pairs, self.values):
                w.writerow([a, b, *(repr(float(v)) for v in row)])


def metric_comparison_report(t: DataTable, bins: int | None = None) -> MetricReport:
    """All ten metrics for every unordered variable pair."""
    mats = {m: metric_matrix(t, m, bins=bins).values for m in METRICS}
    k = t.n_cols
    iu = list(combinations(range(k), 2))
    values = np.array([[mats[m][i, j] for m in METRICS] for i, j in iu]).reshape(len(iu), len(METRICS))
    pairs = [(t.variable_names[i], t.variable_names[j]) for i, j in iu]
    return MetricReport(pairs, METRICS, values)
