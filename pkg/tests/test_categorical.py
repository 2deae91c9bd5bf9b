import numpy as np
import pytest

from tests.conftest import table
from varlatent.categorical import MAX_CATEGORIES, one_hot_encode, reinforce_entanglement
from varlatent.ingest import DataError, DataTable
from varlatent.latent import pairwise_distances


def test_one_hot_in_place():
    t = table([1, 2, 3, 4], [0, 2, 0, 1], [5, 6, 7, 8], names=["a", "lab", "b"])
    out, block = one_hot_encode(t, "lab")
    assert out.variable_names == ["a", "lab_0", "lab_1", "lab_2", "b"]
    assert np.array_equal(out.values[:, 1:4], [[1, 0, 0], [0, 0, 1], [1, 0, 0], [0, 1, 0]])
    assert np.all(out.values[:, 1:4].sum(axis=1) == 1)
    assert block.membership == {"lab_0": 0, "lab_1": 1, "lab_2": 2}


def test_one_hot_errors():
    t = table(np.arange(MAX_CATEGORIES + 1.0), np.zeros(MAX_CATEGORIES + 1), names=["many", "z"])
    with pytest.raises(DataError, match="distinct"):
        one_hot_encode(t, "many")
    with pytest.raises(KeyError):
        one_hot_encode(t, "absent")


def _variable_rows(t):
    return t.transpose()


def test_reinforcement_columns_and_distance_law():
    rng = np.random.default_rng(0)
    t = table(rng.uniform(size=30), rng.integers(0, 3, 30), rng.uniform(size=30), names=["p", "lab", "q"])
    enc, block = one_hot_encode(t, "lab")
    inp = _variable_rows(enc)
    r = reinforce_entanglement(inp, block)
    m = len(block.dummy_names)
    assert r.n_cols == inp.n_cols + m
    extra = r.values[:, inp.n_cols:]
    dummy = [rid in block.dummy_names for rid in r.row_ids]
    assert np.all(extra[dummy] == 1) and np.all(extra[~np.array(dummy)] == 0)
    d0, d1 = pairwise_distances(inp.values) ** 2, pairwise_distances(r.values) ** 2
    idx = np.flatnonzero(dummy)
    other = np.flatnonzero(~np.array(dummy))
    assert np.allclose(d1[np.ix_(idx, idx)], d0[np.ix_(idx, idx)])
    assert np.allclose(d1[np.ix_(idx, other)], d0[np.ix_(idx, other)] + m)
    # the within-dummy share of total distance strictly shrinks
    assert d1[np.ix_(idx, idx)].mean() / d1.mean() < d0[np.ix_(idx, idx)].mean() / d0.mean()


def test_reinforcement_needs_dummy_rows():
    t = table([0, 1, 0], [1, 2, 3], names=["lab", "x"])
    _, block = one_hot_encode(t, "lab")
    inp = DataTable(["o0", "o1", "o2"], np.zeros((1, 3)), ["x"])
    with pytest.raises(KeyError, match="absent"):
        reinforce_entanglement(inp, block)
