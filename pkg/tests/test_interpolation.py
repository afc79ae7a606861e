"""Block-sparse interpolation: pivots, closed-form updates, bounds, training."""

import numpy as np
import pytest
import scipy.stats

from waveft import interpolation as ip
from waveft.adapters import SparseSupport, sample_support
from waveft.rankscan import numerical_rank
from waveft.training import TrainConfig


def _full_support(m, n):
    rows, cols = np.divmod(np.arange(m * n), n)
    return SparseSupport((m, n), rows, cols, seed=0)


class TestFindPivotColumns:
    def test_identity_block_full_support(self):
        k = 3
        X = np.zeros((8, k))
        X[:k, :] = np.eye(k)
        X[k:, :] = 0.01
        prob = ip.InterpolationProblem(
            np.zeros((5, 8)), X, np.ones((5, k)), _full_support(5, 8)
        )
        pivots = ip.find_pivot_columns(prob)
        assert pivots is not None
        Xc = X[pivots, :]
        assert abs(np.linalg.det(Xc)) > 1e-10

    def test_planted_block_recovered(self):
        prob, block = ip.planted_problem(20, 24, 4, per_row_extra=6, seed=1)
        pivots = ip.find_pivot_columns(prob)
        assert pivots is not None
        for i in prob.active_rows():
            assert set(pivots) <= prob.row_supports()[i]

    def test_pigeonhole_not_found(self):
        """A row with fewer support entries than k cannot host a pivot block."""
        rng = np.random.default_rng(2)
        X = rng.standard_normal((8, 3))
        Y = rng.standard_normal((4, 3))
        rows = [0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3]
        cols = [0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1]
        sup = SparseSupport((4, 8), rows, cols, seed=0)
        prob = ip.InterpolationProblem(np.zeros((4, 8)), X, Y, sup)
        assert ip.find_pivot_columns(prob) is None

    def test_dependent_inputs_rejected(self):
        X = np.ones((6, 2))
        with pytest.raises(ValueError, match="independent"):
            ip.InterpolationProblem(np.zeros((4, 6)), X, np.zeros((4, 2)),
                                    _full_support(4, 6))


class TestConstructDelta:
    def test_zero_residual_gives_zero_update(self):
        rng = np.random.default_rng(3)
        W0 = rng.standard_normal((5, 7))
        X = rng.standard_normal((7, 2))
        prob = ip.InterpolationProblem(W0, X, W0 @ X, _full_support(5, 7))
        pivots = ip.find_pivot_columns(prob)
        np.testing.assert_array_equal(ip.construct_delta(prob, pivots),
                                      np.zeros((5, 7)))

    def test_scalar_instance(self):
        sup = SparseSupport((1, 1), [0], [0], seed=0)
        prob = ip.InterpolationProblem(np.zeros((1, 1)), np.array([[2.0]]),
                                       np.array([[6.0]]), sup)
        dW = ip.construct_delta(prob, ip.find_pivot_columns(prob))
        np.testing.assert_allclose(dW, [[3.0]])

    def test_planted_instance_all_three_conclusions(self):
        """Support containment, exact interpolation, rank equality."""
        prob, _ = ip.planted_problem(64, 64, 5, per_row_extra=12, seed=4)
        pivots = ip.find_pivot_columns(prob)
        dW = ip.construct_delta(prob, pivots)
        # (i) support containment, checked bitwise
        outside = dW.copy()
        outside[prob.support.rows, prob.support.cols] = 0.0
        assert np.all(outside == 0.0)
        # (ii) exact interpolation
        resid = np.max(np.abs((prob.W0 + dW) @ prob.X - prob.Y))
        assert resid <= 1e-8 * max(1.0, np.max(np.abs(prob.Y)))
        # (iii) rank equality with the active residual block
        Z = prob.residual_targets()
        assert numerical_rank(dW) == numerical_rank(Z[prob.active_rows()])

    def test_row_rank_preserved_by_invertible_mix(self):
        """Z_R -> Z_R X_C^{-1} (then column embedding) keeps the row rank."""
        rng = np.random.default_rng(5)
        for _ in range(5):
            prob, _ = ip.planted_problem(30, 30, 4, per_row_extra=8,
                                         seed=int(rng.integers(1 << 30)))
            pivots = ip.find_pivot_columns(prob)
            Z = prob.residual_targets()
            R = prob.active_rows()
            mixed = np.linalg.solve(prob.X[pivots, :].T, Z[R].T).T
            assert numerical_rank(mixed) == numerical_rank(Z[R])

    def test_missing_pivots_rejected(self):
        prob, _ = ip.planted_problem(6, 6, 2, per_row_extra=2, seed=6)
        with pytest.raises(ValueError, match="pivot"):
            ip.construct_delta(prob, None)


class TestRowOccupancyBound:
    def test_k_zero(self):
        assert ip.row_occupancy_bound(100, 10, 0) == (0.0, 0.0)

    def test_reference_configuration(self):
        """15,680 parameters over 784 rows, k=5: union bound ~1.3e-2."""
        tail, union = ip.row_occupancy_bound(15680, 784, 5)
        assert union == pytest.approx(1.3e-2, abs=1e-3)
        assert union <= 2e-2

    def test_matches_scipy_binomial(self):
        for m, n, k in [(15680, 784, 5), (2560, 128, 5), (100, 10, 3)]:
            tail, _ = ip.row_occupancy_bound(m, n, k)
            oracle = scipy.stats.binom.cdf(k - 1, m, 1.0 / n)
            assert tail == pytest.approx(oracle, rel=1e-10)

    def test_generous_budget_tiny_bound(self):
        _, union = ip.row_occupancy_bound(100 * 784 * 5, 784, 5)
        assert union < 1e-12

    def test_monotone_in_budget_and_k(self):
        tails = [ip.row_occupancy_bound(m, 64, 4)[0] for m in (256, 512, 1024, 4096)]
        assert all(a > b for a, b in zip(tails, tails[1:]))
        ks = [ip.row_occupancy_bound(640, 64, k)[0] for k in (1, 2, 4, 8)]
        assert all(a < b for a, b in zip(ks, ks[1:]))


class TestCapacityExperiment:
    def test_desk_scale_succeeds(self):
        report, success = ip.capacity_experiment(
            128, 5, 2560, method="shira", seed=0,
            train_config=TrainConfig(lr=0.01, gamma=0.75, step_epochs=500,
                                     epochs=2500, batch_size=5, seed=0,
                                     loss="mse"),
        )
        assert success
        assert report.final_loss <= 1e-6 * report.initial_loss

    def test_underparameterized_control_fails(self):
        report, success = ip.capacity_experiment(
            128, 5, 5, method="shira", seed=0,
            train_config=TrainConfig(lr=0.01, gamma=0.75, step_epochs=500,
                                     epochs=800, batch_size=5, seed=0,
                                     loss="mse"),
        )
        assert not success
        assert report.final_loss > 1e-3 * report.initial_loss

    def test_waveft_variant_succeeds(self):
        _, success = ip.capacity_experiment(
            64, 4, 1280, method="waveft", wavelet_level=3, seed=1,
            train_config=TrainConfig(lr=0.01, gamma=0.75, step_epochs=500,
                                     epochs=2500, batch_size=4, seed=1,
                                     loss="mse"),
        )
        assert success

    def test_unknown_method_rejected(self):
        with pytest.raises(ValueError, match="method"):
            ip.capacity_experiment(16, 2, 32, method="foo")

    def test_min_row_occupancy_consistency_small(self):
        """Sampled supports almost always give every row >= k entries."""
        d, k, total = 128, 5, 2560
        _, union = ip.row_occupancy_bound(total, d, k)
        hits = 0
        n_seeds = 40
        for s in range(n_seeds):
            sup = sample_support(d, d, total, seed=s)
            hits += int(sup.row_occupancy().min() >= k)
        # union bound ~2.8e-2 at this scale; allow a loose margin
        assert hits >= n_seeds * (1 - 4 * union) - 1
