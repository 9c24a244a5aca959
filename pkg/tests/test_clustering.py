import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.metrics import adjusted_rand_score

from scopeq import (
    ClusterModel,
    InfeasibleClusteringError,
    ShapeMismatchError,
    assign_stream,
    hard_assign,
    kmeans_fit,
    soft_assign,
)

from oracles import pair_counting_rand_index, planted_blobs


def test_two_rectangles_give_exact_centroids_and_inertia():
    # Two pairs of points 10 apart; each centroid sits midway in its pair,
    # leaving squared distance 0.25 per point.
    x = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]])
    model, trace = kmeans_fit(x, k=2, seed=0)
    assert trace[-1] == pytest.approx(1.0, abs=1e-12)
    got = sorted(map(tuple, model.centers))
    assert got[0] == pytest.approx((0.0, 0.5), abs=1e-12)
    assert got[1] == pytest.approx((10.0, 0.5), abs=1e-12)


def test_one_center_per_point_reaches_zero_inertia(rng):
    x = rng.normal(size=(6, 3))
    _, trace = kmeans_fit(x, k=6, seed=1)
    assert trace[-1] == pytest.approx(0.0, abs=1e-20)


def test_planted_blobs_recovered_exactly(rng):
    pts, labels = planted_blobs(rng, n_per=40, centers=10.0 * np.eye(6), sigma=0.5)
    model, _ = kmeans_fit(pts, k=6, seed=3)
    got = hard_assign(pts, model)
    assert adjusted_rand_score(labels, got) == 1.0
    assert pair_counting_rand_index(labels, got) == 1.0


def test_inertia_trace_never_increases(rng):
    for seed in range(8):
        x = rng.normal(size=(60, 4))
        _, trace = kmeans_fit(x, k=5, seed=seed, n_init=1)
        assert all(b <= a + 1e-9 for a, b in zip(trace, trace[1:]))


def test_more_restarts_never_worsen_the_fit(rng):
    x = np.concatenate([rng.normal(loc=c, size=(30, 3)) for c in (-6.0, 0.0, 6.0)])
    _, t1 = kmeans_fit(x, k=3, seed=4, n_init=1)
    _, t10 = kmeans_fit(x, k=3, seed=4, n_init=10)
    assert t10[-1] <= t1[-1] + 1e-12


def test_fit_is_seed_reproducible(rng):
    x = rng.normal(size=(80, 5))
    m1, t1 = kmeans_fit(x, k=4, seed=7)
    m2, t2 = kmeans_fit(x, k=4, seed=7)
    np.testing.assert_array_equal(m1.centers, m2.centers)
    assert t1 == t2


def test_high_k_on_few_points_still_fits(rng):
    # Forces the empty-cluster repair path on several of these seeds.
    for seed in range(12):
        x = np.concatenate([rng.normal(size=(6, 2)), rng.normal(loc=8.0, size=(6, 2))])
        model, trace = kmeans_fit(x, k=5, seed=seed, n_init=2)
        assert np.all(np.isfinite(model.centers))
        assert all(b <= a + 1e-9 for a, b in zip(trace, trace[1:]))


def test_soft_assignment_lies_on_simplex(rng):
    centers = rng.normal(size=(7, 4))
    model = ClusterModel(centers=centers, k=7)
    r = assign_stream(rng.normal(size=(500, 4)) * 10.0, model)
    assert r.shape == (500, 7)
    assert np.all(r >= 0.0)
    np.testing.assert_allclose(r.sum(axis=1), 1.0, rtol=0, atol=1e-9)


def test_sharp_exponent_matches_nearest_center(rng):
    centers = rng.normal(size=(5, 3)) * 4.0
    model = ClusterModel(centers=centers, k=5, alpha=256.0)
    pts = rng.normal(size=(300, 3)) * 4.0
    d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    gap = np.partition(d2, 1, axis=1)
    unique_nearest = gap[:, 1] - gap[:, 0] > 1e-6
    soft_top = assign_stream(pts, model).argmax(axis=1)
    np.testing.assert_array_equal(
        soft_top[unique_nearest], d2.argmin(axis=1)[unique_nearest]
    )


def test_assignment_tracks_center_permutation(rng):
    centers = rng.normal(size=(6, 3))
    perm = rng.permutation(6)
    a = ClusterModel(centers=centers, k=6)
    b = ClusterModel(centers=centers[perm], k=6)
    e = rng.normal(size=3)
    np.testing.assert_allclose(soft_assign(e, a)[perm], soft_assign(e, b), atol=1e-15)


def test_point_on_a_center_takes_nearly_all_mass(rng):
    centers = np.array([[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]])
    model = ClusterModel(centers=centers, k=3)
    r = soft_assign(np.array([0.0, 0.0]), model)
    assert r[0] > 1.0 - 1e-12
    assert r.argmax() == 0


@given(
    seed=st.integers(min_value=0, max_value=2**31),
    scale=st.floats(min_value=0.01, max_value=1000.0),
)
def test_simplex_property_over_random_scales(seed, scale):
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(4, 3)) * scale
    while len(np.unique(centers, axis=0)) < 4:
        centers = rng.normal(size=(4, 3)) * scale
    model = ClusterModel(centers=centers, k=4)
    r = assign_stream(rng.normal(size=(20, 3)) * scale, model)
    np.testing.assert_allclose(r.sum(axis=1), 1.0, rtol=0, atol=1e-9)
    assert np.all(r >= 0.0)


def test_empty_stream_yields_empty_assignment(rng):
    model = ClusterModel(centers=rng.normal(size=(3, 2)), k=3)
    out = assign_stream(np.empty((0, 2)), model)
    assert out.shape == (0, 3)


def test_hard_assign_breaks_ties_toward_lowest_index():
    model = ClusterModel(centers=np.array([[-1.0, 0.0], [1.0, 0.0]]), k=2)
    labels = hard_assign(np.array([[0.0, 0.0]]), model)
    assert labels[0] == 0


def test_infeasible_fits_rejected(rng):
    with pytest.raises(InfeasibleClusteringError, match="k must be >= 2"):
        kmeans_fit(rng.normal(size=(10, 2)), k=1)
    with pytest.raises(InfeasibleClusteringError, match="distinct"):
        kmeans_fit(np.ones((10, 2)), k=3)
    with pytest.raises(ShapeMismatchError):
        kmeans_fit(np.empty((0, 2)), k=2)


def test_malformed_models_rejected(rng):
    with pytest.raises(InfeasibleClusteringError, match="does not match"):
        ClusterModel(centers=rng.normal(size=(3, 2)), k=4)
    with pytest.raises(InfeasibleClusteringError, match="distinct"):
        ClusterModel(centers=np.zeros((2, 2)), k=2)
    with pytest.raises(InfeasibleClusteringError, match="positive"):
        ClusterModel(centers=rng.normal(size=(2, 2)), k=2, alpha=0.0)
    with pytest.raises(ShapeMismatchError):
        soft_assign(np.ones(5), ClusterModel(centers=rng.normal(size=(2, 3)), k=2))
