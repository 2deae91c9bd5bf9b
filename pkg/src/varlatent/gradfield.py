"""Gradient fields of variables over the observation latent plane.

Each variable is linearly interpolated (Delaunay barycentric) onto a regular
grid over the unit square ``Lu``, differentiated numerically, and paired
with every other variable through the 2-D cross product of their gradient
vectors at each spot. Four aggregations collapse the resulting
variables x variables x spots tensor into autoencoder inputs.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.interpolate import LinearNDInterpolator, NearestNDInterpolator
from scipy.spatial import QhullError

from ._random import make_rng
from .ingest import DataTable
from .latent import LatentTable, compute_frames
from .metrics import AdjacencyMatrix
from .vae import TrainConfig, fit_select

DEFAULT_GRID = 35


@dataclass
class GridField:
    """Values on a G x G grid over [0, 1]^2; ``values[a, b]`` sits at (a*h, b*h)."""

    values: np.ndarray

    @property
    def resolution(self) -> int:
        return self.values.shape[-1]

    @property
    def spacing(self) -> float:
        return 1.0 / (self.resolution - 1)


@dataclass
class GradientField:
    xV: np.ndarray
    yV: np.ndarray


@dataclass
class CrossProductTensor:
    """Signed ``values[i, j, n]`` = cross product of gradients of i and j at spot n."""

    names: list[str]
    values: np.ndarray
    spot_keys: list[str]
    spots: str = "observations"

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    def pair_index(self, a: str, b: str) -> tuple[int, int]:
        try:
            return self.names.index(a), self.names.index(b)
        except ValueError:
            missing = a if a not in self.names else b
            raise KeyError(f"unknown variable {missing!r}") from None


def grid_nodes(G: int = DEFAULT_GRID) -> np.ndarray:
    """(G*G, 2) node coordinates, row-major over (axis-1 index, axis-2 index)."""
    axis = np.linspace(0.0, 1.0, G)
    a, b = np.meshgrid(axis, axis, indexing="ij")
    return np.column_stack([a.ravel(), b.ravel()])


def interpolate(points, values, G: int = DEFAULT_GRID) -> np.ndarray:
    """Piecewise-linear interpolation of scattered values onto the G x G grid.

    ``values`` may be (N,) or (N, K); the result is (G, G) or (K, G, G).
    Nodes outside the convex hull of ``points`` take the nearest point's value.
    """
    points = np.asarray(points, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    single = values.ndim == 1
    vals = values[:, None] if single else values
    if points.shape[0] < 3:
        raise ValueError("need at least 3 points to interpolate")
    if np.linalg.matrix_rank(points - points.mean(axis=0)) < 2:
        raise ValueError("points are collinear; no triangulation exists")
    nodes = grid_nodes(G)
    try:
        lin = LinearNDInterpolator(points, vals, fill_value=np.nan)(nodes)
    except QhullError as exc:
        raise ValueError(f"triangulation failed: {exc}") from None
    outside = np.isnan(lin).any(axis=1)
    if outside.any():
        lin[outside] = NearestNDInterpolator(points, vals)(nodes[outside])
    out = lin.T.reshape(vals.shape[1], G, G)
    return out[0] if single else out


def gradients(f) -> GradientField:
    """Central differences inside, one-sided differences on the border.

    Accepts a :class:`GridField` or raw (..., G, G) arrays; axis -2 is the
    first latent axis (x), axis -1 the second (y).
    """
    v = f.values if isinstance(f, GridField) else np.asarray(f, dtype=np.float64)
    G = v.shape[-1]
    h = 1.0 / (G - 1)
    xV = np.empty_like(v)
    yV = np.empty_like(v)
    xV[..., 1:-1, :] = (v[..., 2:, :] - v[..., :-2, :]) / (2 * h)
    xV[..., 0, :] = (v[..., 1, :] - v[..., 0, :]) / h
    xV[..., -1, :] = (v[..., -1, :] - v[..., -2, :]) / h
    yV[..., :, 1:-1] = (v[..., :, 2:] - v[..., :, :-2]) / (2 * h)
    yV[..., :, 0] = (v[..., :, 1] - v[..., :, 0]) / h
    yV[..., :, -1] = (v[..., :, -1] - v[..., :, -2]) / h
    return GradientField(xV, yV)


def spot_cross_product(gi: GradientField, gj: GradientField) -> np.ndarray:
    """Signed xV_i * yV_j - yV_i * xV_j at every spot."""
    if np.shape(gi.xV) != np.shape(gj.xV):
        raise ValueError(f"shape mismatch: {np.shape(gi.xV)} vs {np.shape(gj.xV)}")
    return np.asarray(gi.xV) * np.asarray(gj.yV) - np.asarray(gi.yV) * np.asarray(gj.xV)


def spot_cross_product_polar(gi: GradientField, gj: GradientField) -> np.ndarray:
    """Same quantity from vector lengths and angles: r_i * r_j * sin(a_j - a_i)."""
    ri, rj = np.hypot(gi.xV, gi.yV), np.hypot(gj.xV, gj.yV)
    ai, aj = np.arctan2(gi.yV, gi.xV), np.arctan2(gj.yV, gj.xV)
    return ri * rj * np.sin(aj - ai)


def nearest_nodes(points, G: int = DEFAULT_GRID) -> tuple[np.ndarray, np.ndarray]:
    """Grid indices (a, b) of the node nearest to each Lu point."""
    pts = np.clip(np.asarray(points, dtype=np.float64), 0.0, 1.0)
    idx = np.rint(pts * (G - 1)).astype(np.int64)
    return idx[:, 0], idx[:, 1]


def spot_values_at_observations(cp_grid: np.ndarray, points) -> np.ndarray:
    """Look up each observation's value at its nearest grid node.

    ``cp_grid`` is (..., G, G); the result is (..., N).
    """
    G = cp_grid.shape[-1]
    a, b = nearest_nodes(points, G)
    return cp_grid[..., a, b]


@dataclass
class GradientMap:
    """All variables interpolated and differentiated over one observation latent."""

    names: list[str]
    fields: np.ndarray  # (K, G, G)
    grads: GradientField  # (K, G, G) each
    points: np.ndarray  # (N, 2) Lu of observations
    keys: list[str]

    @property
    def resolution(self) -> int:
        return self.fields.shape[-1]

    def field(self, name: str) -> GridField:
        return GridField(self.fields[self._idx(name)])

    def _idx(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown variable {name!r}") from None

    def spot_gradients(self, spots: str = "observations") -> tuple[np.ndarray, np.ndarray, list[str]]:
        """(K, S) gradient components at the chosen spots and the spot keys."""
        if spots == "observations":
            a, b = nearest_nodes(self.points, self.resolution)
            return self.grads.xV[:, a, b], self.grads.yV[:, a, b], list(self.keys)
        if spots == "grid":
            G = self.resolution
            keys = [f"node_{i}_{j}" for i in range(G) for j in range(G)]
            return (self.grads.xV.reshape(len(self.names), -1),
                    self.grads.yV.reshape(len(self.names), -1), keys)
        raise ValueError(f"spots must be 'observations' or 'grid', got {spots!r}")

    def cross_products(self, spots: str = "observations") -> CrossProductTensor:
        xv, yv, keys = self.spot_gradients(spots)
        cp = xv[:, None, :] * yv[None, :, :] - yv[:, None, :] * xv[None, :, :]
        return CrossProductTensor(list(self.names), cp, keys, spots)

    def pair_map(self, a: str, b: str) -> np.ndarray:
        """Signed cross-product map of two variables over the whole grid."""
        i, j = self._idx(a), self._idx(b)
        return spot_cross_product(GradientField(self.grads.xV[i], self.grads.yV[i]),
                                  GradientField(self.grads.xV[j], self.grads.yV[j]))


def gradient_map(data: DataTable, observations: LatentTable, G: int = DEFAULT_GRID) -> GradientMap:
    """Interpolate every column of ``data`` over the observations' Lu frame.

    Rows of ``data`` must line up with ``observations.keys``.
    """
    if observations.Lu is None:
        compute_frames(observations)
    if list(data.row_ids) != list(observations.keys):
        raise ValueError("data rows and latent keys differ")
    fields = interpolate(observations.Lu, data.values, G)
    return GradientMap(list(data.variable_names), fields, gradients(fields),
                       observations.Lu.copy(), list(observations.keys))


# --------------------------------------------------------------------------
# aggregations


def aggregate_option1(cp: CrossProductTensor) -> AdjacencyMatrix:
    """Mean |cross product| over spots for every pair."""
    m = cp.magnitude.mean(axis=2)
    m = (m + m.T) / 2.0
    np.fill_diagonal(m, 0.0)
    return AdjacencyMatrix(list(cp.names), m, "cp_mean")


def aggregate_option2(names: Sequence[str], xV: np.ndarray, yV: np.ndarray) -> AdjacencyMatrix:
    """Signed cross product of each variable's mean gradient vector.

    ``xV`` and ``yV`` are (K, S) gradient components at the spots.
    """
    mx = np.asarray(xV).mean(axis=1)
    my = np.asarray(yV).mean(axis=1)
    m = np.outer(mx, my) - np.outer(my, mx)
    return AdjacencyMatrix(list(names), m, "cp_of_means")


def default_budget(k: int, n: int) -> int:
    return min(k * n, 40 * k)


def aggregate_option3(cp: CrossProductTensor, column_budget: int | None = None, seed: int = 0) -> DataTable:
    """Rows are variables i; columns are (j, spot) pairs of |cp|, subsampled."""
    k, _, n = cp.values.shape
    full = k * n
    budget = default_budget(k, n) if column_budget is None else int(column_budget)
    if not 1 <= budget <= full:
        raise ValueError(f"column budget {budget} outside 1..{full}")
    mag = cp.magnitude.reshape(k, full)
    names = [f"{cp.names[j]}@{cp.spot_keys[s]}" for j in range(k) for s in range(n)]
    if budget < full:
        cols = np.sort(make_rng(seed).choice(full, size=budget, replace=False))
        mag = mag[:, cols]
        names = [names[c] for c in cols]
    return DataTable(names, mag, list(cp.names))


def option4_rows(cp: CrossProductTensor, row_budget: int | None = None, seed: int = 0) -> DataTable:
    """Rows are (i, spot) pairs, columns variables j, subsampled to ``row_budget``."""
    k, _, n = cp.values.shape
    full = k * n
    budget = default_budget(k, n) if row_budget is None else int(row_budget)
    if not 1 <= budget <= full:
        raise ValueError(f"row budget {budget} outside 1..{full}")
    rows = np.arange(full)
    if budget < full:
        rows = np.sort(make_rng(seed).choice(full, size=budget, replace=False))
    i_idx, s_idx = rows // n, rows % n
    missing = sorted(set(range(k)) - set(i_idx.tolist()))
    if missing:
        raise ValueError(f"row budget {budget} leaves no rows for {[cp.names[m] for m in missing]}")
    values = cp.magnitude[i_idx, :, s_idx]
    keys = [f"{cp.names[i]}@{cp.spot_keys[s]}" for i, s in zip(i_idx, s_idx)]
    return DataTable(list(cp.names), values, keys)


def average_by_variable(lt: LatentTable, names: Sequence[str]) -> LatentTable:
    """Mean latent coordinates of the ``<name>@<spot>`` rows of each variable."""
    owners = [k.rsplit("@", 1)[0] for k in lt.keys]
    mu = np.array([lt.mu[[o == nm for o in owners]].mean(axis=0) for nm in names])
    lv = np.array([lt.log_var[[o == nm for o in owners]].mean(axis=0) for nm in names])
    return LatentTable(list(names), mu, lv)


def aggregate_option4(cp: CrossProductTensor, row_budget: int | None = None, seed: int = 0,
                      cfg: TrainConfig | None = None) -> tuple[LatentTable, dict]:
    """Encode (i, spot) rows with a beta-VAE, then average coordinates per variable."""
    cfg = cfg or TrainConfig(seed=seed)
    table = option4_rows(cp, row_budget, seed)
    top = table.values.max()
    if top > 0:
        table = DataTable(table.variable_names, table.values / top, table.row_ids)
    model, lt, report = fit_select(table, cfg, train_copies=1, monitor_copies=0)
    out = compute_frames(average_by_variable(lt, cp.names))
    out.extra.update(model=model, input=table, spot_latent=lt)
    return out, report


def cross_product_timeseries(cp: CrossProductTensor, a: str, b: str,
                             order: Sequence | None = None) -> tuple[list[str], np.ndarray]:
    """|cp| of one pair across observation spots, sorted by ``order`` keys if given."""
    i, j = cp.pair_index(a, b)
    series = cp.magnitude[i, j]
    keys = list(cp.spot_keys)
    if order is not None:
        perm = sorted(range(len(keys)), key=lambda s: order[s])
        keys = [keys[s] for s in perm]
        series = series[perm]
    return keys, series
