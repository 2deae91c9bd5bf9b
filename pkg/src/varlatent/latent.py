"""Latent coordinate tables and their display frames.

The raw posterior means ``L`` are standardized per axis (``Ln``), pushed
through the standard normal CDF into the unit square (``Lu``), or mapped
radially into the unit disk (``Lp``).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import erf, ndtr

from .ingest import strip_copy_suffix

_BELOW_ONE = np.nextafter(1.0, 0.0)
# a few ulps of headroom so rounding in x * scale cannot land on the circle
_DISK_CAP = 1.0 - 2.0**-48


class DedupeError(ValueError):
    """Copies of one key encoded to different points."""


@dataclass
class LatentTable:
    keys: list[str]
    mu: np.ndarray
    log_var: np.ndarray
    Ln: np.ndarray | None = None
    Lu: np.ndarray | None = None
    Lp: np.ndarray | None = None
    groups: list[str] | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.mu = np.asarray(self.mu, dtype=np.float64).reshape(-1, 2)
        self.log_var = np.asarray(self.log_var, dtype=np.float64).reshape(-1, 2)
        if len(self.keys) != self.mu.shape[0] or self.log_var.shape != self.mu.shape:
            raise ValueError("keys, mu and log_var disagree in length")
        if not (np.all(np.isfinite(self.mu)) and np.all(np.isfinite(self.log_var))):
            raise ValueError("latent coordinates must be finite")

    def __len__(self) -> int:
        return len(self.keys)

    def index(self, key: str) -> int:
        return self.keys.index(key)

    def frame(self, name: str) -> np.ndarray:
        if name == "L":
            return self.mu
        arr = getattr(self, name)
        if arr is None:
            raise ValueError(f"frame {name} has not been computed")
        return arr

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            head = ["key", "L1", "L2", "Lu1", "Lu2", "Lp1", "Lp2"]
            if self.groups is not None:
                head.append("group")
            w.writerow(head)
            Lu = self.Lu if self.Lu is not None else np.full_like(self.mu, np.nan)
            Lp = self.Lp if self.Lp is not None else np.full_like(self.mu, np.nan)
            for i, key in enumerate(self.keys):
                row = [key, *(repr(float(v)) for v in (*self.mu[i], *Lu[i], *Lp[i]))]
                if self.groups is not None:
                    row.append(self.groups[i])
                w.writerow(row)


def read_latent_csv(path: str | Path) -> LatentTable:
    """Read a table written by :meth:`LatentTable.write_csv` (log-variances are not stored)."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    keys = [r["key"] for r in rows]
    mu = np.array([[float(r["L1"]), float(r["L2"])] for r in rows])
    lt = LatentTable(keys, mu, np.zeros_like(mu))
    if rows and rows[0].get("Lu1") not in (None, "", "nan"):
        lt.Lu = np.array([[float(r["Lu1"]), float(r["Lu2"])] for r in rows])
        lt.Lp = np.array([[float(r["Lp1"]), float(r["Lp2"])] for r in rows])
        lt.Ln = standardize(mu)
    if rows and "group" in rows[0]:
        lt.groups = [r["group"] for r in rows]
    return lt


def dedupe(lt: LatentTable) -> LatentTable:
    """Collapse ``key#copy`` rows to one row per key, in first-seen order.

    Encoding is deterministic, so every copy must be bitwise identical.
    """
    order: list[str] = []
    first: dict[str, int] = {}
    for i, key in enumerate(lt.keys):
        base = strip_copy_suffix(key)
        if base not in first:
            first[base] = i
            order.append(base)
        else:
            j = first[base]
            if not (np.array_equal(lt.mu[i], lt.mu[j]) and np.array_equal(lt.log_var[i], lt.log_var[j])):
                raise DedupeError(f"copies of {base!r} encode differently: {lt.mu[j]} vs {lt.mu[i]}")
    idx = [first[k] for k in order]
    return LatentTable(order, lt.mu[idx].copy(), lt.log_var[idx].copy())


def standardize(points: np.ndarray) -> np.ndarray:
    """Per-axis (x - mean) / sample std over the point set."""
    points = np.asarray(points, dtype=np.float64)
    sd = points.std(axis=0, ddof=1) if len(points) > 1 else np.zeros(points.shape[1])
    if np.any(sd == 0):
        raise ValueError("latent axis has zero variance")
    return (points - points.mean(axis=0)) / sd


def _open_unit(u: np.ndarray) -> np.ndarray:
    # Phi saturates in double far out in the tails; keep the frame open
    return np.clip(u, np.finfo(float).tiny, _BELOW_ONE)


def uniform_square(points: np.ndarray) -> np.ndarray:
    return _open_unit(ndtr(standardize(points)))


def uniform_disk(points: np.ndarray) -> np.ndarray:
    """Keep each standardized point's angle; send its radius rho to 2*Phi(rho) - 1."""
    return disk_from_standardized(standardize(points))


def disk_from_standardized(ln: np.ndarray) -> np.ndarray:
    ln = np.asarray(ln, dtype=np.float64)
    rho = np.hypot(ln[:, 0], ln[:, 1])
    scale = np.zeros_like(rho)
    pos = rho > 0
    # 2*Phi(rho) - 1 == erf(rho / sqrt 2); saturates to 1.0 in double past rho ~ 8.3
    radius = np.minimum(erf(rho[pos] / np.sqrt(2.0)), _DISK_CAP)
    scale[pos] = radius / rho[pos]
    return ln * scale[:, None]


def to_uniform_square(lt: LatentTable) -> LatentTable:
    lt.Ln = standardize(lt.mu)
    lt.Lu = _open_unit(ndtr(lt.Ln))
    return lt


def to_uniform_disk(lt: LatentTable) -> LatentTable:
    lt.Ln = standardize(lt.mu)
    lt.Lp = disk_from_standardized(lt.Ln)
    return lt


def compute_frames(lt: LatentTable) -> LatentTable:
    return to_uniform_disk(to_uniform_square(lt))


def pairwise_distances(lt: LatentTable | np.ndarray, frame: str = "Lu") -> np.ndarray:
    pts = lt.frame(frame) if isinstance(lt, LatentTable) else np.asarray(lt, dtype=np.float64)
    diff = pts[:, None, :] - pts[None, :, :]
    d = np.sqrt((diff**2).sum(axis=-1))
    np.fill_diagonal(d, 0.0)
    return d


def density_grid(lt: LatentTable | np.ndarray, frame: str = "Lu", grid: int = 20) -> np.ndarray:
    """Normalized 2-D histogram of the points over their bounding box.

    Entry [i, j] counts axis-1 cell i and axis-2 cell j.
    """
    if grid < 2:
        raise ValueError("grid must be >= 2")
    pts = lt.frame(frame) if isinstance(lt, LatentTable) else np.asarray(lt, dtype=np.float64)
    cells = []
    for d in range(2):
        v = pts[:, d]
        lo, hi = v.min(), v.max()
        if hi == lo:
            c = np.full(v.shape, grid // 2)
        else:
            c = np.minimum(np.floor((v - lo) / (hi - lo) * grid).astype(int), grid - 1)
        cells.append(c)
    counts = np.zeros((grid, grid))
    np.add.at(counts, (cells[0], cells[1]), 1.0)
    return counts / counts.sum()


def group_mean_distance(lt: LatentTable, keys: Sequence[str], frame: str = "Lp") -> float:
    """Mean pairwise distance among the named points."""
    idx = [lt.index(k) for k in keys]
    d = pairwise_distances(lt.frame(frame)[idx])
    n = len(idx)
    return float(d.sum() / (n * (n - 1)))
