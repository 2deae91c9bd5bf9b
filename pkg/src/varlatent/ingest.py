"""Dataset entry points and row-level preparation.

Loaders (CSV, MNIST IDX, the synthetic generator), min-max normalization,
degenerate-column screening, and the duplication / shuffling / subsampling
steps used before autoencoder training.
"""
from __future__ import annotations

import csv
import gzip
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import ndtri

from ._random import make_rng, open_uniform

COPY_SEP = "#"


class DataError(ValueError):
    """Malformed or unusable input data."""


@dataclass
class DataTable:
    """Named observations x variables matrix.

    ``row_ids`` are observation keys, or variable keys once the table has been
    transposed into a variable-representation input.
    """

    variable_names: list[str]
    values: np.ndarray
    row_ids: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DataError(f"values must be 2-D, got shape {self.values.shape}")
        self.variable_names = [str(n) for n in self.variable_names]
        if len(self.variable_names) != self.values.shape[1]:
            raise DataError(
                f"{len(self.variable_names)} names for {self.values.shape[1]} columns"
            )
        if len(set(self.variable_names)) != len(self.variable_names):
            seen: set[str] = set()
            dup = next(n for n in self.variable_names if n in seen or seen.add(n))
            raise DataError(f"duplicate variable name {dup!r}")
        if not self.row_ids:
            self.row_ids = [str(i) for i in range(self.values.shape[0])]
        self.row_ids = [str(r) for r in self.row_ids]
        if len(self.row_ids) != self.values.shape[0]:
            raise DataError(f"{len(self.row_ids)} row ids for {self.values.shape[0]} rows")
        if not np.all(np.isfinite(self.values)):
            r, c = np.argwhere(~np.isfinite(self.values))[0]
            raise DataError(f"non-finite value at row {r}, column {self.variable_names[c]!r}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.variable_names.index(name)]
        except ValueError:
            raise KeyError(f"unknown variable {name!r}") from None

    def select_columns(self, names: Sequence[str]) -> "DataTable":
        idx = [self.variable_names.index(n) for n in names]
        return DataTable(list(names), self.values[:, idx], list(self.row_ids))

    def take_rows(self, idx: Sequence[int] | np.ndarray) -> "DataTable":
        idx = np.asarray(idx, dtype=int)
        return DataTable(list(self.variable_names), self.values[idx], [self.row_ids[i] for i in idx])

    def transpose(self) -> "DataTable":
        """Flip observations and variables: rows become variables."""
        return DataTable(list(self.row_ids), self.values.T.copy(), list(self.variable_names))

    def require_analysis_shape(self) -> None:
        if self.n_rows < 2 or self.n_cols < 2:
            raise DataError(f"need at least 2 rows and 2 columns, got {self.shape}")


@dataclass
class NormalizationRecord:
    """Per-column bounds that undo :func:`minmax_normalize`."""

    min: np.ndarray
    max: np.ndarray
    mode: str = "minmax_01"

    def apply(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if self.mode == "affine_from_signed":
            return (values + 1.0) / 2.0
        span = self.max - self.min
        out = np.full(values.shape, 0.5)
        ok = span > 0
        out[..., ok] = (values[..., ok] - self.min[ok]) / span[ok]
        return out

    def invert(self, scaled: np.ndarray) -> np.ndarray:
        scaled = np.asarray(scaled, dtype=np.float64)
        if self.mode == "affine_from_signed":
            return scaled * 2.0 - 1.0
        span = self.max - self.min
        # constant columns come back as their single value
        return self.min + scaled * span


# --------------------------------------------------------------------------
# loaders


def load_csv(path: str | Path, has_header: bool = True, id_column: bool = False) -> DataTable:
    """Read a comma-separated numeric table.

    With ``id_column`` the first column (a date or key) is kept as ``row_ids``
    instead of being parsed. Any empty or non-numeric cell raises
    :class:`DataError` naming its 1-based file row and column.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    start = 1 if has_header else 0
    width = len(rows[0])
    if has_header:
        header = [h.strip() for h in rows[0]]
        names = header[1:] if id_column else header
    else:
        names = [f"v{i}" for i in range(width - int(id_column))]
    if len(set(names)) != len(names):
        dups = sorted({n for n in names if names.count(n) > 1})
        raise DataError(f"{path}: duplicate header names {dups}")

    ids: list[str] = []
    values = np.empty((len(rows) - start, len(names)))
    for i, row in enumerate(rows[start:]):
        lineno = i + start + 1
        if len(row) != width:
            raise DataError(f"{path}: row {lineno} has {len(row)} cells, expected {width}")
        cells = row
        if id_column:
            ids.append(row[0].strip())
            cells = row[1:]
        for j, cell in enumerate(cells):
            col = j + 1 + int(id_column)
            text = cell.strip()
            if not text:
                raise DataError(f"{path}: missing value at (row {lineno}, col {col})")
            try:
                values[i, j] = float(text)
            except ValueError:
                raise DataError(
                    f"{path}: cannot parse {text!r} at (row {lineno}, col {col})"
                ) from None
    if not np.all(np.isfinite(values)):
        i, j = np.argwhere(~np.isfinite(values))[0]
        raise DataError(f"{path}: non-finite value at (row {i + start + 1}, col {j + 1 + int(id_column)})")
    return DataTable(names, values, ids)


def write_csv(t: DataTable, path: str | Path, id_header: str | None = "id") -> None:
    """Write ``t`` so that ``load_csv(path, id_column=id_header is not None)`` round-trips."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = list(t.variable_names)
        w.writerow(([id_header] + head) if id_header is not None else head)
        for rid, row in zip(t.row_ids, t.values):
            cells = [repr(float(v)) for v in row]
            w.writerow(([rid] + cells) if id_header is not None else cells)


def _open_maybe_gzip(path: Path):
    with path.open("rb") as fh:
        magic = fh.read(2)
    return gzip.open(path, "rb") if magic == b"\x1f\x8b" else path.open("rb")


def load_idx(images_path: str | Path, labels_path: str | Path, limit: int = 2000) -> DataTable:
    """Load the first ``limit`` MNIST images with their labels.

    Pixels become 784 columns ``px_<row>_<col>`` scaled by 1/255, followed by
    an integer ``label`` column. Gzipped files are read transparently.
    """
    images_path, labels_path = Path(images_path), Path(labels_path)
    with _open_maybe_gzip(images_path) as fh:
        raw = fh.read()
    if len(raw) < 16:
        raise DataError(f"{images_path}: truncated header")
    magic, count, nrows, ncols = struct.unpack(">IIII", raw[:16])
    if magic != 2051:
        raise DataError(f"{images_path}: bad magic number {magic}, expected 2051")
    with _open_maybe_gzip(labels_path) as fh:
        lraw = fh.read()
    if len(lraw) < 8:
        raise DataError(f"{labels_path}: truncated header")
    lmagic, lcount = struct.unpack(">II", lraw[:8])
    if lmagic != 2049:
        raise DataError(f"{labels_path}: bad magic number {lmagic}, expected 2049")
    if lcount != count:
        raise DataError(f"image count {count} != label count {lcount}")
    if limit < 1 or limit > count:
        raise DataError(f"limit {limit} outside 1..{count}")
    npx = nrows * ncols
    if len(raw) < 16 + limit * npx or len(lraw) < 8 + limit:
        raise DataError("truncated IDX payload")
    pixels = np.frombuffer(raw, dtype=np.uint8, count=limit * npx, offset=16)
    labels = np.frombuffer(lraw, dtype=np.uint8, count=limit, offset=8)
    values = np.empty((limit, npx + 1))
    values[:, :npx] = pixels.reshape(limit, npx) / 255.0
    values[:, npx] = labels
    names = [f"px_{r}_{c}" for r in range(nrows) for c in range(ncols)] + ["label"]
    return DataTable(names, values, [str(i) for i in range(limit)])


def write_idx(images: np.ndarray, labels: np.ndarray, images_path: str | Path, labels_path: str | Path) -> None:
    """Write uint8 images (n, rows, cols) and labels (n,) as gzipped IDX files."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, r, c = images.shape
    Path(images_path).write_bytes(gzip.compress(struct.pack(">IIII", 2051, n, r, c) + images.tobytes(), mtime=0))
    Path(labels_path).write_bytes(gzip.compress(struct.pack(">II", 2049, n) + labels.tobytes(), mtime=0))


# --------------------------------------------------------------------------
# column-level transforms


def screen_degenerate_variables(t: DataTable) -> tuple[DataTable, list[str]]:
    """Drop zero-variance columns, keeping the others in order."""
    const = np.all(t.values == t.values[:1], axis=0) if t.n_rows else np.ones(t.n_cols, bool)
    removed = [n for n, c in zip(t.variable_names, const) if c]
    if len(removed) == t.n_cols:
        raise DataError("every column is constant")
    keep = [n for n, c in zip(t.variable_names, const) if not c]
    return t.select_columns(keep), removed


def minmax_normalize(t: DataTable) -> tuple[DataTable, NormalizationRecord]:
    """Map each column affinely onto [0, 1]; constant columns become 0.5."""
    lo = t.values.min(axis=0)
    hi = t.values.max(axis=0)
    rec = NormalizationRecord(lo, hi, "minmax_01")
    out = np.clip(rec.apply(t.values), 0.0, 1.0)
    return DataTable(list(t.variable_names), out, list(t.row_ids)), rec


def rescale_signed(m, tol: float = 1e-9) -> DataTable:
    """Map a [-1, 1] adjacency matrix onto [0, 1] via (x + 1) / 2.

    Matrix rows become table rows keyed by variable name.
    """
    values = np.asarray(m.values, dtype=np.float64)
    if values.min() < -1.0 - tol or values.max() > 1.0 + tol:
        raise DataError(
            f"entries must lie in [-1, 1], found [{values.min():.6g}, {values.max():.6g}]"
        )
    out = np.clip((values + 1.0) / 2.0, 0.0, 1.0)
    return DataTable(list(m.names), out, list(m.names))


# --------------------------------------------------------------------------
# synthetic generator

SYNTHETIC_NAMES = (
    ["N_E_1", "N_E_2", "N_E_3"]
    + [f"N_S_1{s}{k}" for s in "pn" for k in (9, 7, 5, 3)]
    + ["N_I_12", "N_I_13", "N_I_23", "N_I_123", "N_A_12", "N_A_13", "N_A_23", "N_Q_1", "N_Q_2", "N_Q_3"]
    + ["U_E_1", "U_E_2", "U_E_3"]
    + [f"U_S_1{s}{k}" for s in "pn" for k in (9, 7, 5, 3)]
    + ["U_I_12", "U_I_13", "U_I_23", "U_A_12", "U_A_13", "U_A_23", "U_Q_1", "U_Q_2", "U_Q_3", "U_I_123", "U_C_1"]
    + ["E_E_1", "E_E_2", "E_E_3"]
    + [f"E_S_1{s}{k}" for s in "pn" for k in (9, 7, 5, 3)]
    + ["E_I_12", "E_I_13", "E_I_23", "E_A_12", "E_A_13", "E_A_23", "E_Q_1", "E_Q_2", "E_Q_3", "E_I_123"]
    + ["B_E_1"]
)


def generate_synthetic(seed: int = 0, num_obs: int = 250) -> DataTable:
    """The 65-variable dependency benchmark (250 observations by default).

    Independent parents are normal, uniform, exponential, and Bernoulli; the
    dependants are single-linear (``S``, sign ``p``/``n`` and strength
    0.3..0.9), interactive (``I``), additive (``A``), quadratic (``Q``), and
    circular (``C``) functions of them plus normal noise. Columns are drawn
    in a fixed order by inverse-CDF sampling from one Philox stream.
    """
    rng = make_rng(seed)
    n = num_obs

    def norm():
        return ndtri(open_uniform(rng, n))

    def expon():
        return -np.log1p(-open_uniform(rng, n))

    def uniform():
        return open_uniform(rng, n)

    def bernoulli(p=0.5):
        return (open_uniform(rng, n) < p).astype(np.float64)

    df: dict[str, np.ndarray] = {}

    def linear_family(prefix, parent):
        for sign, s in ((1.0, "p"), (-1.0, "n")):
            for k in (9, 7, 5, 3):
                w = k / 10.0
                df[f"{prefix}_S_1{s}{k}"] = sign * w * parent + (1.0 - w) * norm()

    for i in (1, 2, 3):
        df[f"N_E_{i}"] = norm()
    N1, N2, N3 = df["N_E_1"], df["N_E_2"], df["N_E_3"]
    linear_family("N", N1)
    df["N_I_12"] = N1 * N2 + 0.1 * norm()
    df["N_I_13"] = N1 * N3 + 0.1 * norm()
    df["N_I_23"] = N2 * N3 + 0.1 * norm()
    df["N_I_123"] = N1 * N2 * N3 + 0.1 * norm()
    df["N_A_12"] = N1 + N2 + 0.1 * norm()
    df["N_A_13"] = N1 + N3 + 0.1 * norm()
    df["N_A_23"] = N2 + N3 + 0.1 * norm()
    df["N_Q_1"] = 0.7 * N1**2 + 0.3 * norm()
    df["N_Q_2"] = 0.7 * N2**2 + 0.3 * norm()
    df["N_Q_3"] = 0.7 * N3**2 + 0.3 * norm()

    for i in (1, 2, 3):
        df[f"U_E_{i}"] = uniform()
    U1, U2, U3 = df["U_E_1"], df["U_E_2"], df["U_E_3"]
    linear_family("U", U1)
    df["U_I_12"] = U1 * U2 + 0.1 * norm()
    df["U_I_13"] = U1 * U3 + 0.1 * norm()
    df["U_I_23"] = U2 * U3 + 0.1 * norm()
    df["U_A_12"] = U1 + U2 + 0.1 * norm()
    df["U_A_13"] = U1 + U3 + 0.1 * norm()
    df["U_A_23"] = U2 + U3 + 0.1 * norm()
    # U_Q_1 squares U1, mirroring U_Q_2 and U_Q_3
    df["U_Q_1"] = 0.7 * U1**2 + 0.1 * norm()
    df["U_Q_2"] = 0.7 * U2**2 + 0.1 * norm()
    df["U_Q_3"] = 0.7 * U3**2 + 0.1 * norm()
    df["U_I_123"] = U1 * U2 * U3 + 0.1 * norm()
    branch = 2.0 * bernoulli(0.5) - 1.0
    df["U_C_1"] = (branch * np.sqrt(1.0 - (2.0 * U1 - 1.0) ** 2) + 1.0) / 2.0 + 0.1 * norm()

    for i in (1, 2, 3):
        df[f"E_E_{i}"] = expon()
    E1, E2, E3 = df["E_E_1"], df["E_E_2"], df["E_E_3"]
    linear_family("E", E1)
    df["E_I_12"] = E1 * E2 + 0.1 * norm()
    df["E_I_13"] = E1 * E3 + 0.1 * norm()
    df["E_I_23"] = E2 * E3 + 0.1 * norm()
    df["E_A_12"] = E1 + E2 + 0.1 * norm()
    df["E_A_13"] = E1 + E3 + 0.1 * norm()
    df["E_A_23"] = E2 + E3 + 0.1 * norm()
    df["E_Q_1"] = 0.7 * E1**2 + 0.3 * norm()
    df["E_Q_2"] = 0.7 * E2**2 + 0.3 * norm()
    df["E_Q_3"] = 0.7 * E3**2 + 0.3 * norm()
    df["E_I_123"] = E1 * E2 * E3 + 0.1 * norm()

    df["B_E_1"] = bernoulli(0.5)

    values = np.column_stack([df[name] for name in SYNTHETIC_NAMES])
    return DataTable(list(SYNTHETIC_NAMES), values, [str(i) for i in range(n)])


# --------------------------------------------------------------------------
# row preparation


def duplicate_rows(t: DataTable, factor: int) -> DataTable:
    """Stack ``factor`` exact copies of ``t`` (no noise).

    Row ids gain a ``#<copy>`` suffix so encodings can be deduplicated later.
    """
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    values = np.tile(t.values, (factor, 1))
    ids = [f"{rid}{COPY_SEP}{c}" for c in range(factor) for rid in t.row_ids]
    return DataTable(list(t.variable_names), values, ids)


def strip_copy_suffix(row_id: str) -> str:
    return row_id.rsplit(COPY_SEP, 1)[0] if COPY_SEP in row_id else row_id


def shuffle_rows(t: DataTable, seed: int) -> DataTable:
    perm = make_rng(seed).permutation(t.n_rows)
    return t.take_rows(perm)


def subsample(t: DataTable, axis: str, target: int, seed: int) -> DataTable:
    """Uniform sample without replacement along ``axis``, original order kept."""
    if axis not in ("rows", "columns"):
        raise ValueError(f"axis must be 'rows' or 'columns', got {axis!r}")
    length = t.n_rows if axis == "rows" else t.n_cols
    if not 1 <= target <= length:
        raise ValueError(f"target {target} outside 1..{length}")
    if target == length:
        return DataTable(list(t.variable_names), t.values.copy(), list(t.row_ids))
    idx = np.sort(make_rng(seed).choice(length, size=target, replace=False))
    if axis == "rows":
        return t.take_rows(idx)
    return t.select_columns([t.variable_names[i] for i in idx])


# --------------------------------------------------------------------------
# interest-rate series helpers

_TERM = re.compile(r"(\d+)\s*[- ]?\s*(month|mo|year|yr|y|m)\b", re.IGNORECASE)


def rate_attributes(name: str) -> tuple[str, float | None]:
    """Guess (type, term in months) from an interest-rate series name.

    Recognizes bank/overnight/prime rates, treasury bills, bonds, GICs, and
    conventional mortgages. Unknown names come back as ``("other", None)``.
    """
    low = name.lower()
    m = _TERM.search(low)
    term = None
    if m:
        qty = float(m.group(1))
        unit = m.group(2).lower()
        term = qty if unit.startswith("m") else qty * 12.0
    if "bill" in low or "t-bill" in low:
        kind = "tbill"
    elif "bond" in low or "benchmark" in low:
        kind = "bond"
    elif "mortgage" in low:
        kind = "mortgage"
    elif "gic" in low or "guaranteed" in low or "investment certificate" in low:
        kind = "gic"
    elif "overnight" in low or "target" in low:
        kind, term = "overnight", term if term is not None else 0.0
    elif "bank rate" in low:
        kind, term = "bank", term if term is not None else 0.0
    elif "prime" in low:
        kind = "prime"
    else:
        kind = "other"
    return kind, term
