import numpy as np
import pytest
from scipy import stats

from varlatent.latent import (
    DedupeError,
    LatentTable,
    compute_frames,
    dedupe,
    density_grid,
    group_mean_distance,
    pairwise_distances,
    read_latent_csv,
    standardize,
    uniform_disk,
    uniform_square,
)


def _normal(seed, n=500):
    return np.random.default_rng(seed).standard_normal((n, 2))


def test_standardize_uses_sample_std():
    z = standardize(_normal(0))
    assert np.allclose(z.mean(axis=0), 0, atol=1e-14)
    assert np.allclose(z.std(axis=0, ddof=1), 1, atol=1e-14)
    with pytest.raises(ValueError):
        standardize(np.array([[1.0, 2.0], [1.0, 3.0]]))


@pytest.mark.parametrize("seed", range(5))
def test_uniform_square_is_uniform(seed):
    u = uniform_square(_normal(seed))
    assert u.min() > 0 and u.max() < 1
    for d in range(2):
        assert stats.kstest(u[:, d], "uniform").pvalue > 0.01


def test_uniform_disk_preserves_angles_and_stays_inside():
    pts = _normal(1) * 3
    pts[0] = [40.0, -40.0]  # far tail saturates erf
    z = standardize(pts)
    disk = uniform_disk(pts)
    r = np.hypot(disk[:, 0], disk[:, 1])
    assert r.max() < 1.0
    a0, a1 = np.arctan2(z[:, 1], z[:, 0]), np.arctan2(disk[:, 1], disk[:, 0])
    assert np.max(np.abs(np.angle(np.exp(1j * (a1 - a0))))) <= 1e-12


def test_uniform_disk_radius_is_monotone():
    pts = _normal(2)
    z = standardize(pts)
    order = np.argsort(np.hypot(z[:, 0], z[:, 1]))
    r = np.hypot(*uniform_disk(pts).T)[order]
    assert np.all(np.diff(r) >= 0)


def test_dedupe_collapses_identical_copies():
    mu = np.array([[0.1, 0.2], [0.3, 0.4], [0.1, 0.2]])
    lt = LatentTable(["a#0", "b#0", "a#1"], mu, np.zeros_like(mu))
    out = dedupe(lt)
    assert out.keys == ["a", "b"] and np.array_equal(out.mu, mu[:2])
    mu[2, 0] += 1e-12
    with pytest.raises(DedupeError):
        dedupe(LatentTable(["a#0", "b#0", "a#1"], mu, np.zeros_like(mu)))


def test_csv_round_trip(tmp_path):
    lt = compute_frames(LatentTable(["a", "b", "c"], _normal(3, 3), np.zeros((3, 2))))
    lt.groups = ["g1", "g1", "g2"]
    lt.write_csv(tmp_path / "l.csv")
    back = read_latent_csv(tmp_path / "l.csv")
    assert back.keys == lt.keys and back.groups == lt.groups
    assert np.array_equal(back.mu, lt.mu) and np.array_equal(back.Lp, lt.Lp)


def test_distances_and_density():
    pts = np.array([[0.0, 0.0], [3.0, 4.0], [0.0, 1.0]])
    d = pairwise_distances(pts)
    assert d[0, 1] == 5.0 and np.array_equal(d, d.T) and np.all(np.diag(d) == 0)
    g = density_grid(_normal(4), "Lu", 10)
    assert g.shape == (10, 10) and g.sum() == pytest.approx(1.0)


def test_group_mean_distance():
    lt = LatentTable(["a", "b", "c"], np.zeros((3, 2)), np.zeros((3, 2)))
    lt.Lp = np.array([[0.0, 0.0], [0.6, 0.0], [0.0, 0.8]])
    assert group_mean_distance(lt, ["a", "b", "c"]) == pytest.approx((0.6 + 0.8 + 1.0) / 3)
