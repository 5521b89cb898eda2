"""Divide-and-conquer regression and exact multiscale transport."""

import numpy as np
import pytest
from scipy.spatial.distance import cdist

from kernelops import (
    fit,
    fit_multiscale,
    fit_multiscale_transport,
    fit_scaling,
    lsap_exact,
    ot_cluster_match,
    predict_multiscale,
)


def _sorted_rows(A):
    return A[np.lexsort(A.T[::-1])]


class TestFitMultiscale:
    def test_reproduces_training_values_all_clusterings(self):
        rng = np.random.default_rng(30)
        X = rng.normal(size=(96, 2))
        fX = np.tanh(X[:, :1]) + 0.5 * X[:, 1:]
        k = fit_scaling(X)
        for clustering in ("greedy", "sharp", "kmeans", "random"):
            m = fit_multiscale(k, X, fX, 6, clustering=clustering, seed=0)
            err = np.max(np.abs(predict_multiscale(m, X) - fX))
            assert err <= 1e-8, f"{clustering}: {err:.3e}"

    def test_reproduces_with_non_smooth_family(self):
        rng = np.random.default_rng(31)
        X = rng.normal(size=(80, 2))
        fX = (X[:, :1] ** 2 - X[:, 1:]) * 0.3
        k = fit_scaling(X, family="matern-l1")
        m = fit_multiscale(k, X, fX, 5)
        assert np.max(np.abs(predict_multiscale(m, X) - fX)) <= 1e-8

    def test_single_cluster(self):
        rng = np.random.default_rng(32)
        X = rng.normal(size=(30, 2))
        fX = X[:, :1] * 0.7
        k = fit_scaling(X)
        m = fit_multiscale(k, X, fX, 1)
        assert len(m.locals) == 1
        assert np.max(np.abs(predict_multiscale(m, X) - fX)) <= 1e-8

    def test_one_cluster_per_point(self):
        rng = np.random.default_rng(33)
        X = rng.normal(size=(12, 2))
        fX = rng.normal(size=(12, 1))
        k = fit_scaling(X)
        m = fit_multiscale(k, X, fX, 12)
        assert np.max(np.abs(predict_multiscale(m, X) - fX)) <= 1e-8

    def test_generalization_close_to_single_kernel(self):
        # smooth 1-D target, locals sharing the global kernel scale: the
        # divide-and-conquer fit stays within 3x of the one-shot fit
        rng = np.random.default_rng([0, 31])
        X = np.sort(rng.uniform(-2, 2, size=512))[:, None]
        fX = np.sin(2 * X) + 0.3 * X
        Z = rng.uniform(-1.8, 1.8, size=(256, 1))
        truth = np.sin(2 * Z) + 0.3 * Z

        km = fit_scaling(X, family="matern-l1")
        single = fit(km, X, None, fX)
        rmse_single = np.sqrt(np.mean((single.predict(Z) - truth) ** 2))
        ms = fit_multiscale(
            km, X, fX, 8, clustering="greedy", local_kernel=lambda pts: km
        )
        rmse_ms = np.sqrt(np.mean((predict_multiscale(ms, Z) - truth) ** 2))
        print(f"single {rmse_single:.3e} multiscale {rmse_ms:.3e}")
        assert rmse_ms <= 3.0 * rmse_single

    def test_balanced_cluster_sizes(self):
        rng = np.random.default_rng(34)
        X = rng.normal(size=(50, 2))
        fX = rng.normal(size=(50, 1))
        k = fit_scaling(X)
        m = fit_multiscale(k, X, fX, 4)
        counts = np.bincount(m.model.assignment % 4, minlength=4)
        assert counts.max() - counts.min() <= 1

    def test_vector_targets(self):
        rng = np.random.default_rng(35)
        X = rng.normal(size=(40, 2))
        fX = rng.normal(size=(40, 3))
        k = fit_scaling(X)
        m = fit_multiscale(k, X, fX, 4)
        out = predict_multiscale(m, X)
        assert out.shape == (40, 3)
        assert np.max(np.abs(out - fX)) <= 1e-8

    def test_deterministic(self):
        rng = np.random.default_rng(36)
        X = rng.normal(size=(60, 2))
        fX = rng.normal(size=(60, 1))
        Z = rng.normal(size=(20, 2))
        k = fit_scaling(X)
        a = fit_multiscale(k, X, fX, 5, clustering="random", seed=7)
        b = fit_multiscale(k, X, fX, 5, clustering="random", seed=7)
        assert np.array_equal(predict_multiscale(a, Z), predict_multiscale(b, Z))

    def test_validation(self):
        rng = np.random.default_rng(37)
        X = rng.normal(size=(10, 2))
        fX = rng.normal(size=(10, 1))
        k = fit_scaling(X)
        with pytest.raises(ValueError, match="unknown clustering"):
            fit_multiscale(k, X, fX, 2, clustering="spectral")
        with pytest.raises(ValueError, match="cannot place"):
            fit_multiscale(k, X, fX, 11)


class TestOtClusterMatch:
    def test_single_cluster_is_trivial(self):
        rng = np.random.default_rng(38)
        X = rng.normal(size=(10, 2))
        Y = rng.normal(size=(10, 2))
        match = ot_cluster_match(X, Y, 1)
        assert match.pairing.tolist() == [0]
        assert np.allclose(match.centroids_x[0], X.mean(axis=0))
        assert np.allclose(match.centroids_y[0], Y.mean(axis=0))

    def test_one_point_clusters_reach_exact_assignment_cost(self):
        # with one point per cluster the centroid pairing is a plain LSAP
        # between the points themselves
        rng = np.random.default_rng(39)
        X = rng.normal(size=(8, 2))
        Y = rng.normal(size=(8, 2))
        match = ot_cluster_match(X, Y, 8)
        # recover the induced point pairing
        inv_x = np.empty(8, dtype=int)
        inv_y = np.empty(8, dtype=int)
        for c in range(8):
            inv_x[c] = np.flatnonzero(match.sigma_x % 8 == c)[0]
            inv_y[c] = np.flatnonzero(match.sigma_y % 8 == c)[0]
        cost = sum(
            float(np.sum((X[inv_x[c]] - Y[inv_y[match.pairing[c]]]) ** 2))
            for c in range(8)
        )
        C = cdist(X, Y, "sqeuclidean")
        exact = float(C[np.arange(8), lsap_exact(C)].sum())
        assert cost <= exact + 1e-9

    def test_matches_corresponding_modes(self):
        rng = np.random.default_rng(40)
        X = np.vstack(
            [rng.normal(size=(20, 2)), rng.normal(size=(20, 2)) + 10.0]
        )
        Y = np.vstack(
            [rng.normal(size=(20, 2)) + 0.5, rng.normal(size=(20, 2)) + 10.5]
        )
        match = ot_cluster_match(X, Y, 2)
        for c in range(2):
            d_paired = np.sum(
                (match.centroids_x[c] - match.centroids_y[match.pairing[c]]) ** 2
            )
            d_crossed = np.sum(
                (match.centroids_x[c] - match.centroids_y[1 - match.pairing[c]]) ** 2
            )
            assert d_paired < d_crossed

    def test_paired_clusters_share_cardinality(self):
        rng = np.random.default_rng(41)
        X = rng.normal(size=(10, 2))
        Y = rng.normal(size=(10, 2))
        match = ot_cluster_match(X, Y, 4)  # sizes 3,3,2,2
        counts_x = np.bincount(match.sigma_x % 4, minlength=4)
        counts_y = np.bincount(match.sigma_y % 4, minlength=4)
        for c in range(4):
            assert counts_x[c] == counts_y[match.pairing[c]]

    def test_discrepancy_distance_path(self):
        rng = np.random.default_rng(42)
        X = rng.normal(size=(20, 2))
        Y = rng.normal(size=(20, 2)) + 1.0
        k = fit_scaling(np.vstack([X, Y]))
        match = ot_cluster_match(X, Y, 3, distance="discrepancy", kernel=k)
        assert sorted(match.pairing.tolist()) == [0, 1, 2]
        counts = np.bincount(match.sigma_x % 3, minlength=3)
        assert counts.max() - counts.min() <= 1

    def test_validation(self):
        rng = np.random.default_rng(43)
        X = rng.normal(size=(10, 2))
        with pytest.raises(ValueError, match="identical shape"):
            ot_cluster_match(X, rng.normal(size=(9, 2)), 2)
        with pytest.raises(ValueError, match="unknown distance"):
            ot_cluster_match(X, X + 1.0, 2, distance="manhattan")
        with pytest.raises(ValueError, match="cannot place"):
            ot_cluster_match(X, X + 1.0, 11)


class TestMultiscaleTransport:
    def test_image_of_source_is_target_multiset(self):
        for n, m, seed in ((48, 4, 0), (50, 4, 1), (64, 8, 2)):
            rng = np.random.default_rng([seed, 70])
            X = rng.normal(size=(n, 2))
            Y = rng.normal(size=(n, 2)) + 1.0
            t = fit_multiscale_transport(X, Y, m, seed=seed)
            image = t.transport(X)
            assert np.allclose(_sorted_rows(image), _sorted_rows(Y), atol=1e-10)
            assert np.allclose(_sorted_rows(t.paired_targets), _sorted_rows(Y))

    def test_single_cluster_matches_direct_map(self):
        rng = np.random.default_rng(44)
        X = rng.normal(size=(20, 2))
        Y = rng.normal(size=(20, 2))
        k = fit_scaling(X, X)
        t = fit_multiscale_transport(X, Y, 1, k0=k)
        sigma = lsap_exact(cdist(X, Y, "sqeuclidean"))
        direct = fit(k, X, None, Y[sigma], 0.0, check_distinct=False)
        Z = rng.normal(size=(15, 2))
        assert np.array_equal(t.transport(Z), direct.predict(Z))
        assert t.coarse is None

    def test_single_cluster_cost_is_assignment_optimum(self):
        rng = np.random.default_rng(45)
        X = rng.normal(size=(16, 2))
        Y = rng.normal(size=(16, 2))
        t = fit_multiscale_transport(X, Y, 1)
        C = cdist(X, Y, "sqeuclidean")
        exact = float(C[np.arange(16), lsap_exact(C)].sum())
        assert abs(t.training_cost() - exact) <= 1e-10

    def test_cost_at_least_global_optimum(self):
        for seed in range(3):
            rng = np.random.default_rng([seed, 71])
            X = rng.normal(size=(128, 2))
            Y = rng.normal(size=(128, 2)) * 1.5
            t = fit_multiscale_transport(X, Y, 4, seed=seed)
            C = cdist(X, Y, "sqeuclidean")
            exact = float(C[np.arange(128), lsap_exact(C)].sum())
            assert t.training_cost() >= exact - 1e-9

    def test_deterministic(self):
        rng = np.random.default_rng(46)
        X = rng.normal(size=(40, 2))
        Y = rng.normal(size=(40, 2))
        Z = rng.normal(size=(10, 2))
        a = fit_multiscale_transport(X, Y, 4, seed=5)
        b = fit_multiscale_transport(X, Y, 4, seed=5)
        assert np.array_equal(a.transport(Z), b.transport(Z))

    def test_discrepancy_pair_cost_path(self):
        rng = np.random.default_rng(47)
        X = rng.normal(size=(24, 2))
        Y = rng.normal(size=(24, 2))
        t = fit_multiscale_transport(X, Y, 2, pair_cost="discrepancy")
        image = t.transport(X)
        assert np.allclose(_sorted_rows(image), _sorted_rows(Y), atol=1e-10)

    def test_validation(self):
        rng = np.random.default_rng(48)
        X = rng.normal(size=(10, 2))
        Y = rng.normal(size=(10, 2))
        with pytest.raises(ValueError, match="same number of points"):
            fit_multiscale_transport(X, Y[:9], 2)
        with pytest.raises(ValueError, match="duplicate rows in X"):
            fit_multiscale_transport(np.vstack([X, X[:1]]), np.vstack([Y, Y[:1] + 9.0]), 2)
        with pytest.raises(ValueError, match="cannot place"):
            fit_multiscale_transport(X, Y, 11)
        with pytest.raises(ValueError, match="unknown pair cost"):
            fit_multiscale_transport(X, Y, 2, pair_cost="l3")
