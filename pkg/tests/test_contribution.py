import numpy as np
import pytest

from anomalens.contribution import (
    ContributionConfig,
    ContributionResult,
    contribution_without_l1,
    estimate_contribution,
    estimated_dimension_set,
    recall_precision,
    soft_threshold,
    top_k_dimensions,
)
from anomalens.detector import AEDetector, Normalizer, is_anomalous
from anomalens.errors import DataError
from anomalens.neuralnet import DenseNetwork, Layer


def zero_map_detector(n, threshold):
    """Reconstruction is constant zero, so MSE(v) = ||v||^2 / n.

    The minimization then has the exact lasso solution
    eta_i = sign(x_i) * max(|x_i| - lambda*n/2, 0).
    """
    net = DenseNetwork([Layer(np.zeros((n, n)), np.zeros(n), "identity")], n)
    norm = Normalizer(np.zeros(n), np.ones(n))
    return AEDetector(net, norm, threshold, np.zeros(n), np.ones(n), 0.0, 0.0)


def lasso_closed_form(x, lam):
    n = x.shape[0]
    return np.sign(x) * np.maximum(np.abs(x) - lam * n / 2.0, 0.0)


class TestSoftThreshold:
    def test_direct_values(self):
        got = soft_threshold(np.array([1.2, -0.3, 0.5]), 0.5)
        np.testing.assert_allclose(got, [0.7, 0.0, 0.0])

    def test_zero_threshold_is_identity(self):
        v = np.array([3.0, -2.0, 0.0, 1e-9])
        np.testing.assert_array_equal(soft_threshold(v, 0.0), v)

    def test_full_shrinkage(self):
        v = np.array([0.4, -0.9, 0.2])
        np.testing.assert_array_equal(soft_threshold(v, 0.9), np.zeros(3))

    def test_negative_threshold_rejected(self):
        with pytest.raises(DataError):
            soft_threshold(np.ones(2), -0.1)


class TestClosedFormOracle:
    def test_matches_lasso_solution(self):
        rng = np.random.default_rng(0)
        for trial in range(20):
            n = int(rng.integers(3, 30))
            x = rng.uniform(-1, 1, size=n)
            lam = float(rng.uniform(0.2, 1.5)) / n
            det = zero_map_detector(n, threshold=0.0)
            cfg = ContributionConfig(
                lambdas=(lam,), max_iters=400, mse_stop=0.0
            )
            res = estimate_contribution(det, x, cfg)
            np.testing.assert_allclose(
                res.eta, lasso_closed_form(x, lam), atol=1e-6
            )

    def test_monotone_sparsity_in_lambda(self):
        rng = np.random.default_rng(1)
        for trial in range(10):
            n = 12
            x = rng.uniform(-1, 1, size=n)
            det = zero_map_detector(n, threshold=0.0)
            counts = []
            for lam in np.geomspace(2.0 / n, 0.01 / n, 6):
                cfg = ContributionConfig(lambdas=(float(lam),), max_iters=400, mse_stop=0.0)
                res = estimate_contribution(det, x, cfg)
                counts.append(int(np.sum(np.abs(res.eta) > 1e-9)))
            assert counts == sorted(counts)

    def test_sign_semantics(self):
        # plausible value is 0 for the zero map: positive inputs get
        # non-negative contributions, negative inputs non-positive
        rng = np.random.default_rng(2)
        x = rng.uniform(-1, 1, size=10)
        det = zero_map_detector(10, threshold=0.0)
        cfg = ContributionConfig(lambdas=(0.05 / 10,), max_iters=400, mse_stop=0.0)
        res = estimate_contribution(det, x, cfg)
        assert np.all(res.eta[x > 0] >= 0)
        assert np.all(res.eta[x < 0] <= 0)


class TestEstimateContribution:
    def test_entry_below_threshold_returns_zero(self):
        det = zero_map_detector(4, threshold=10.0)
        res = estimate_contribution(det, np.array([0.5, 0.1, 0.0, 0.2]))
        assert res.converged is True
        assert res.iterations == 0
        np.testing.assert_array_equal(res.eta, np.zeros(4))

    def test_consistent_with_is_anomalous(self):
        det = zero_map_detector(3, threshold=0.2)
        x = np.array([0.3, 0.3, 0.3])  # MSE 0.09 <= 0.2
        flagged, _ = is_anomalous(det, x)
        res = estimate_contribution(det, x)
        assert flagged is False
        assert np.all(res.eta == 0)

    def test_largest_successful_lambda_wins(self):
        det = zero_map_detector(4, threshold=0.0)
        x = np.array([0.9, 0.8, 0.0, 0.1])
        # entry MSE ~0.36; stop at 0.05: several lambdas can reach it
        cfg = ContributionConfig(
            lambdas=(0.05, 0.01, 0.001), max_iters=400, mse_stop=0.05
        )
        res = estimate_contribution(det, x, cfg)
        assert res.converged is True
        assert res.lambda_used == 0.05

    def test_unreachable_stop_returns_best_unconverged(self):
        det = zero_map_detector(3, threshold=0.0)
        x = np.array([0.9, 0.5, 0.2])
        # max_iters 1 with a tiny fixed step cannot reach the stop level
        cfg = ContributionConfig(
            lambdas=(0.01, 0.001), step_size=0.01, max_iters=1, mse_stop=1e-9
        )
        res = estimate_contribution(det, x, cfg)
        assert res.converged is False
        assert res.final_mse > 1e-9

    def test_stops_when_mse_drops_below_level(self):
        det = zero_map_detector(5, threshold=0.01)
        x = np.array([0.9, 0.7, 0.5, 0.0, 0.1])
        res = estimate_contribution(det, x)
        assert res.converged is True
        assert res.final_mse < det.threshold
        assert res.iterations >= 1

    def test_default_lambda_grid_descends(self):
        cfg = ContributionConfig()
        assert all(a > b for a, b in zip(cfg.lambdas, cfg.lambdas[1:]))
        assert cfg.lambdas[0] == pytest.approx(1e-1)
        assert cfg.lambdas[-1] == pytest.approx(1e-4)

    def test_rejects_bad_config(self):
        with pytest.raises(DataError):
            ContributionConfig(lambdas=())
        with pytest.raises(DataError):
            ContributionConfig(lambdas=(0.1, -0.2))
        with pytest.raises(DataError):
            ContributionConfig(max_iters=0)
        with pytest.raises(DataError):
            ContributionConfig(step_size="newton")


class TestWithoutL1:
    def test_quadratic_descent_reaches_stop(self):
        det = zero_map_detector(4, threshold=0.02)
        x = np.array([0.8, 0.6, 0.4, 0.2])
        res = contribution_without_l1(det, x)
        assert res.converged is True
        assert res.final_mse < 0.02
        assert res.lambda_used == 0.0

    def test_already_normal_returns_zero(self):
        det = zero_map_detector(4, threshold=1.0)
        res = contribution_without_l1(det, np.array([0.1, 0.0, 0.0, 0.0]))
        np.testing.assert_array_equal(res.eta, np.zeros(4))

    def test_dense_output_on_noisy_input(self):
        rng = np.random.default_rng(3)
        n = 40
        x = rng.uniform(0.2, 1.0, size=n) * np.sign(rng.uniform(-1, 1, size=n))
        det = zero_map_detector(n, threshold=0.0)
        cfg = ContributionConfig(max_iters=50, mse_stop=1e-6)
        res = contribution_without_l1(det, x, cfg)
        zero_frac = np.mean(np.abs(res.eta) < 1e-12)
        assert zero_frac < 0.05


class TestTopK:
    def test_sorted_by_magnitude(self):
        res = ContributionResult(np.array([0.0, -3.0, 2.0]), 0.1, 5, 0.0, True)
        entries, flag = top_k_dimensions(res, 2)
        assert entries == [(1, 3.0), (2, 2.0)]
        assert flag is False

    def test_all_zero_flagged(self):
        res = ContributionResult(np.zeros(4), 0.1, 0, 0.0, True)
        entries, flag = top_k_dimensions(res, 3)
        assert len(entries) == 3
        assert all(v == 0.0 for _, v in entries)
        assert flag is True

    def test_k_beyond_dimension_count(self):
        res = ContributionResult(np.array([1.0, 2.0]), 0.1, 1, 0.0, True)
        entries, _ = top_k_dimensions(res, 10)
        assert len(entries) == 2

    def test_ties_break_by_lower_index(self):
        entries, _ = top_k_dimensions(np.array([2.0, -2.0, 2.0]), 3)
        assert [i for i, _ in entries] == [0, 1, 2]


class TestEstimatedSetAndScores:
    def test_single_spike(self):
        assert estimated_dimension_set(np.array([4.0, 0.0, 0.0, 0.0])) == {0}

    def test_uniform_vector_gives_empty_set(self):
        assert estimated_dimension_set(np.array([0.5, 0.5, 0.5, 0.5])) == set()

    def test_above_mean_rule(self):
        assert estimated_dimension_set(np.array([3.0, 1.0, 0.0, 0.0])) == {0}

    def test_accepts_result_objects(self):
        res = ContributionResult(np.array([-5.0, 0.1, 0.2]), 0.1, 3, 0.0, True)
        assert estimated_dimension_set(res) == {0}

    def test_recall_precision_values(self):
        assert recall_precision({1, 2, 3}, {2, 3, 4}) == (pytest.approx(2 / 3), pytest.approx(2 / 3))
        assert recall_precision(set(), {1, 2}) == (0.0, 0.0)
        assert recall_precision({1, 2}, {1, 2}) == (1.0, 1.0)
