import numpy as np
import pytest

from tests.conftest import table
from varlatent.gradfield import (
    CrossProductTensor,
    GradientField,
    aggregate_option1,
    aggregate_option2,
    aggregate_option3,
    cross_product_timeseries,
    default_budget,
    gradient_map,
    gradients,
    grid_nodes,
    interpolate,
    nearest_nodes,
    option4_rows,
    spot_cross_product,
    spot_cross_product_polar,
)
from varlatent.ingest import DataTable
from varlatent.latent import LatentTable

# (gradient of N_E_1, gradient of N_S_1n5) -> expected cross product
REFERENCE_ROWS = [
    ((0.339, -0.177), (-0.019, 0.306), 0.100),
    ((0.239, 0.191), (-0.249, -0.279), -0.019),
    ((-0.611, 0.233), (0.576, -0.206), -0.008),
    ((0.138, 0.032), (0.111, -0.399), -0.059),
]


@pytest.mark.parametrize("gi, gj, expected", REFERENCE_ROWS)
def test_reference_cross_products(gi, gj, expected):
    got = spot_cross_product(GradientField(*gi), GradientField(*gj))
    assert abs(float(got) - expected) <= 5e-4


def _grid_latent(G):
    nodes = grid_nodes(G)
    keys = [str(i) for i in range(len(nodes))]
    lt = LatentTable(keys, nodes, np.zeros_like(nodes))
    lt.Lu = nodes.copy()
    return lt, nodes


def test_linear_precision():
    rng = np.random.default_rng(0)
    pts = rng.uniform(size=(60, 2))
    pts = np.vstack([pts, [[0, 0], [0, 1], [1, 0], [1, 1]]])
    f = 0.3 + 2.0 * pts[:, 0] - 1.5 * pts[:, 1]
    grid = interpolate(pts, f, 17)
    nodes = grid_nodes(17)
    assert np.max(np.abs(grid.ravel() - (0.3 + 2.0 * nodes[:, 0] - 1.5 * nodes[:, 1]))) <= 1e-12


def test_nearest_fill_outside_hull():
    pts = np.array([[0.4, 0.4], [0.6, 0.4], [0.5, 0.6]])
    grid = interpolate(pts, np.array([1.0, 2.0, 3.0]), 5)
    assert grid[0, 0] == 1.0 and grid[4, 0] == 2.0 and grid[2, 4] == 3.0


def test_collinear_points_rejected():
    with pytest.raises(ValueError, match="collinear"):
        interpolate(np.array([[0, 0], [0.5, 0.5], [1, 1.0]]), np.ones(3))


def test_quadratic_exact_differences():
    G = 21
    h = 1 / (G - 1)
    a = np.linspace(0, 1, G)
    X, Y = np.meshgrid(a, a, indexing="ij")
    g = gradients(X**2 + 3 * X * Y - Y**2)
    assert np.max(np.abs(g.xV[1:-1, :] - (2 * X + 3 * Y)[1:-1, :])) <= 1e-12
    assert np.max(np.abs(g.yV[:, 1:-1] - (3 * X - 2 * Y)[:, 1:-1])) <= 1e-12
    # one-sided border: exact up to the h/2 * second-derivative term
    assert np.max(np.abs(g.xV[0, :] - (2 * X + 3 * Y)[0, :] - h)) <= 1e-12


def test_lu_field_pair_has_unit_cross_product():
    G = 35
    lt, nodes = _grid_latent(G)
    data = DataTable(["Lu1", "Lu2"], nodes.copy(), lt.keys)
    gmap = gradient_map(data, lt, G)
    cp = gmap.pair_map("Lu1", "Lu2")
    assert np.max(np.abs(cp[1:-1, 1:-1] - 1.0)) <= 1e-12
    assert np.max(np.abs(np.abs(cp) - 1.0)) <= 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_antisymmetry_and_polar_form(seed):
    rng = np.random.default_rng(seed)
    gi = GradientField(rng.standard_normal((35, 35)), rng.standard_normal((35, 35)))
    gj = GradientField(rng.standard_normal((35, 35)), rng.standard_normal((35, 35)))
    c = spot_cross_product(gi, gj)
    assert np.max(np.abs(c + spot_cross_product(gj, gi))) <= 1e-12
    assert np.max(np.abs(c - spot_cross_product_polar(gi, gj))) <= 1e-12
    assert np.all(spot_cross_product(gi, gi) == 0)


def test_nearest_nodes():
    a, b = nearest_nodes(np.array([[0.0, 1.0], [0.49, 0.51]]), 3)
    assert a.tolist() == [0, 1] and b.tolist() == [2, 1]


def _cp_tensor(seed=0, k=4, s=6):
    rng = np.random.default_rng(seed)
    xv, yv = rng.standard_normal((k, s)), rng.standard_normal((k, s))
    cp = xv[:, None, :] * yv[None, :, :] - yv[:, None, :] * xv[None, :, :]
    return CrossProductTensor([f"v{i}" for i in range(k)], cp, [f"o{j}" for j in range(s)], "observations"), xv, yv


def test_option1_and_option2_symmetry():
    cp, xv, yv = _cp_tensor()
    m1 = aggregate_option1(cp).values
    assert np.array_equal(m1, m1.T) and m1.min() >= 0 and np.all(np.diag(m1) == 0)
    m2 = aggregate_option2(cp.names, xv, yv).values
    assert np.max(np.abs(m2 + m2.T)) == 0.0


def test_option3_and_option4_shapes():
    cp, _, _ = _cp_tensor(k=4, s=6)
    full = aggregate_option3(cp, 24)
    assert full.shape == (4, 24) and full.row_ids == cp.names
    assert full.variable_names[7] == "v1@o1"
    sub = aggregate_option3(cp, 10, seed=1)
    assert sub.shape == (4, 10)
    rows = option4_rows(cp, 24)
    assert rows.shape == (24, 4) and rows.row_ids[0] == "v0@o0"
    assert np.array_equal(rows.values[7], cp.magnitude[1, :, 1])
    with pytest.raises(ValueError):
        option4_rows(cp, 1)
    assert default_budget(65, 250) == 2600


def test_timeseries():
    cp, _, _ = _cp_tensor()
    keys, series = cross_product_timeseries(cp, "v0", "v2", order=[5, 4, 3, 2, 1, 0])
    assert keys[0] == "o5" and series[0] == abs(cp.values[0, 2, 5])
    with pytest.raises(KeyError):
        cross_product_timeseries(cp, "v0", "zz")


def test_constant_variable_gives_zero_cp():
    G = 9
    lt, nodes = _grid_latent(G)
    data = DataTable(["c", "x"], np.column_stack([np.full(len(nodes), 2.0), nodes[:, 0]]), lt.keys)
    gmap = gradient_map(data, lt, G)
    assert np.all(gmap.field("c").values == 2.0)
    assert np.all(gmap.pair_map("c", "x") == 0)
