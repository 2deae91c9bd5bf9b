"""One-hot encoding and reinforced entanglement of the resulting dummies."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ingest import DataError, DataTable

MAX_CATEGORIES = 64


@dataclass
class OneHotBlock:
    source: str
    categories: list
    dummy_names: list[str]

    @property
    def membership(self) -> dict[str, object]:
        return dict(zip(self.dummy_names, self.categories))


def _label(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(float(value))


def one_hot_encode(t: DataTable, column: str) -> tuple[DataTable, OneHotBlock]:
    """Replace ``column`` in place with one 0/1 column ``<column>_<value>`` per category."""
    if t.n_rows == 0:
        raise DataError(f"column {column!r} is empty")
    pos = t.variable_names.index(column) if column in t.variable_names else -1
    if pos < 0:
        raise KeyError(f"unknown column {column!r}")
    col = t.values[:, pos]
    cats = np.unique(col)
    if cats.size > MAX_CATEGORIES:
        raise DataError(f"column {column!r} has {cats.size} distinct values (max {MAX_CATEGORIES})")
    dummies = (col[:, None] == cats[None, :]).astype(np.float64)
    names = [f"{column}_{_label(c)}" for c in cats]
    values = np.concatenate([t.values[:, :pos], dummies, t.values[:, pos + 1:]], axis=1)
    new_names = t.variable_names[:pos] + names + t.variable_names[pos + 1:]
    block = OneHotBlock(column, [c.item() for c in cats], names)
    return DataTable(new_names, values, list(t.row_ids)), block


def reinforce_entanglement(inp: DataTable, block: OneHotBlock) -> DataTable:
    """Append M columns: all ones on the block's dummy rows, zeros elsewhere.

    ``inp`` is a variable-representation input (rows keyed by variable name).
    """
    rows = set(inp.row_ids)
    missing = [d for d in block.dummy_names if d not in rows]
    if missing:
        raise KeyError(f"dummy rows absent from input: {missing}")
    member = np.array([rid in set(block.dummy_names) for rid in inp.row_ids], dtype=np.float64)
    m = len(block.dummy_names)
    extra = np.repeat(member[:, None], m, axis=1)
    names = [f"reinforce_{block.source}_{k}" for k in range(m)]
    return DataTable(inp.variable_names + names, np.concatenate([inp.values, extra], axis=1), list(inp.row_ids))
