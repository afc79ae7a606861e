"""Exact interpolation through a sparse support, and its gradient-descent twin.

Given k linearly independent inputs with arbitrary targets, a sparse update
confined to a support S can match them exactly whenever some k columns are
(a) shared by every row that needs to change and (b) invertible in the input
matrix.  `find_pivot_columns` searches for such columns, `construct_delta`
builds the update in closed form, and `capacity_experiment` checks that
plain gradient descent on a randomly supported sparse adapter reaches the
same zero-loss regime once the parameter budget is large enough.
"""

import itertools
import warnings

import numpy as np
import scipy.linalg

from .adapters import SparseAdapter, SparseSupport, WaveletAdapter, sample_support
from .rng import derive_rng
from .training import TrainConfig, train_linear

__all__ = [
    "InterpolationProblem",
    "find_pivot_columns",
    "construct_delta",
    "row_occupancy_bound",
    "capacity_experiment",
    "random_problem",
    "planted_problem",
]


class InterpolationProblem:
    """A (W0, X, Y, S) instance: match Y = (W0 + dW) X with supp(dW) in S."""

    def __init__(self, W0, X, Y, support):
        self.W0 = np.asarray(W0, dtype=float)
        self.X = np.asarray(X, dtype=float)
        self.Y = np.asarray(Y, dtype=float)
        self.support = support
        m, n = self.W0.shape
        if self.X.shape[0] != n or self.Y.shape[0] != m:
            raise ValueError("X/Y shapes inconsistent with W0")
        if self.X.shape[1] != self.Y.shape[1]:
            raise ValueError("X and Y must have the same number of columns")
        if support.shape != (m, n):
            raise ValueError("support shape must match W0")
        if np.linalg.matrix_rank(self.X) != self.k:
            raise ValueError("inputs must be linearly independent")

    @property
    def k(self):
        return self.X.shape[1]

    def residual_targets(self):
        """Z = Y - W0 X, recomputed on demand."""
        return self.Y - self.W0 @ self.X

    def active_rows(self):
        """Rows where the residual target is nonzero."""
        Z = self.residual_targets()
        return np.flatnonzero(np.any(Z != 0.0, axis=1))

    def row_supports(self):
        """Column-index sets per row of the support."""
        m = self.W0.shape[0]
        out = [[] for _ in range(m)]
        for r, c in zip(self.support.rows, self.support.cols):
            out[r].append(int(c))
        return [set(s) for s in out]


def find_pivot_columns(problem, det_rtol=1e-10, search_budget=2000):
    """Search for k columns shared by all active rows with invertible X block.

    Strategy: intersect the row supports of the active rows, order the
    surviving columns by pivoted QR on the corresponding input rows, take
    the first k, and fall back to enumerating k-subsets (up to
    search_budget) if that block is numerically singular.  Returns a sorted
    index array, or None when no qualifying set was found.
    """
    k = problem.k
    X = problem.X
    rows = problem.active_rows()
    if rows.size == 0:
        cand = np.arange(X.shape[0], dtype=np.int64)  # no row constrains C
    else:
        supports = problem.row_supports()
        common = supports[rows[0]]
        for i in rows[1:]:
            common &= supports[i]
            if len(common) < k:
                return None
        cand = np.array(sorted(common), dtype=np.int64)
    if cand.size < k:
        return None

    det_tol = det_rtol * max(np.max(np.abs(X)), 1e-300)

    def invertible(cols):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # singular candidates are expected
            lu, _ = scipy.linalg.lu_factor(X[cols, :], check_finite=False)
        return np.min(np.abs(np.diag(lu))) > det_tol

    # pivoted QR on X restricted to the candidate rows ranks them by
    # linear independence
    _, _, perm = scipy.linalg.qr(X[cand, :].T, pivoting=True, mode="economic")
    ordered = cand[perm]
    first = np.sort(ordered[:k])
    if invertible(first):
        return first
    for combo in itertools.islice(itertools.combinations(ordered, k), search_budget):
        cols = np.sort(np.array(combo, dtype=np.int64))
        if invertible(cols):
            return cols
    return None


def construct_delta(problem, pivots):
    """Closed-form sparse update matching every (input, target) pair.

    Active rows get Z_row @ inverse(X[pivots, :]) in the pivot columns and
    zeros elsewhere; inactive rows stay zero.  The result has support inside
    S, interpolates exactly, and its rank equals the rank of the active
    residual block.
    """
    if pivots is None:
        raise ValueError("no pivot columns were found for this problem")
    pivots = np.asarray(pivots, dtype=np.int64)
    k = problem.k
    if pivots.size != k:
        raise ValueError(f"need exactly {k} pivot columns")
    Z = problem.residual_targets()
    rows = problem.active_rows()
    m, n = problem.W0.shape
    dW = np.zeros((m, n))
    if rows.size:
        coeffs = np.linalg.solve(problem.X[pivots, :].T, Z[rows].T).T
        dW[np.ix_(rows, pivots)] = coeffs
    return dW


def row_occupancy_bound(total_params, n_rows, k):
    """Tail of Binomial(total_params, 1/n_rows) below k, and its union bound.

    per_row_tail = P(a given row receives fewer than k of the total_params
    uniformly assigned parameters); union_bound = n_rows * per_row_tail,
    capped at 1.  Terms are accumulated in log space via the ratio
    t_{j+1}/t_j = (m - j) / ((j + 1)(n - 1)), which stays stable far into
    the tail.
    """
    if total_params < 0 or n_rows < 1 or k < 0:
        raise ValueError("invalid arguments")
    if k == 0:
        return 0.0, 0.0
    if n_rows == 1:
        tail = 1.0 if k > total_params else 0.0
        return tail, tail
    m = total_params
    log_t = m * np.log1p(-1.0 / n_rows)  # j = 0 term
    log_sum = log_t
    for j in range(min(k, m + 1) - 1):
        log_t += np.log(m - j) - np.log((j + 1) * (n_rows - 1.0))
        log_sum = np.logaddexp(log_sum, log_t)
    per_row = float(np.exp(log_sum))
    per_row = min(per_row, 1.0)
    return per_row, min(n_rows * per_row, 1.0)


def random_problem(d, k, total_params, seed, w0=None):
    """Gaussian inputs/targets with a uniformly sampled support on (d, d)."""
    rng = derive_rng(seed, 2)
    X = rng.standard_normal((d, k))
    Y = rng.standard_normal((d, k))
    W0 = np.zeros((d, d)) if w0 is None else w0
    support = sample_support(d, d, total_params, seed)
    return InterpolationProblem(W0, X, Y, support)


def planted_problem(m, n, k, per_row_extra, seed):
    """A problem whose support provably satisfies the pivot hypothesis.

    A common block of k columns is inserted into every row's support, plus
    `per_row_extra` random columns per row, so find_pivot_columns must
    succeed.
    """
    rng = derive_rng(seed, 3)
    X = rng.standard_normal((n, k))
    Y = rng.standard_normal((m, k))
    W0 = rng.standard_normal((m, n))
    block = np.sort(rng.choice(n, size=k, replace=False))
    others = np.setdiff1d(np.arange(n), block)
    per_row_extra = min(per_row_extra, others.size)
    rows, cols = [], []
    for i in range(m):
        extra = rng.choice(others, size=per_row_extra, replace=False)
        for c in sorted(np.concatenate([block, extra]).tolist()):
            rows.append(i)
            cols.append(c)
    support = SparseSupport((m, n), np.array(rows), np.array(cols), seed)
    return InterpolationProblem(W0, X, Y, support), block


def capacity_experiment(d, k, total_params, method="shira", train_config=None,
                        seed=0, wavelet_family="db1", wavelet_level=4,
                        success_ratio=1e-6):
    """Train a sparse adapter to map k random inputs to k random targets.

    The base matrix is zero and the adapter is the sole trainable component.
    Returns (report, success) where success means the final MSE dropped
    below success_ratio times the initial MSE.
    """
    if method not in ("shira", "waveft"):
        raise ValueError(f"unknown method: {method!r}")
    if total_params > d * d:
        raise ValueError("total_params exceeds the layer size")
    if train_config is None:
        train_config = TrainConfig(
            lr=0.01, gamma=0.75, step_epochs=500, epochs=5000,
            batch_size=max(k, 1), seed=seed, loss="mse",
        )
    rng = derive_rng(seed, 2)
    X = rng.standard_normal((d, k))
    Y = rng.standard_normal((d, k))
    W0 = np.zeros((d, d))
    if method == "shira":
        adapter = SparseAdapter.create((d, d), total_params, seed)
    else:
        adapter = WaveletAdapter.create(
            (d, d), total_params, seed,
            family=wavelet_family, level=wavelet_level,
        )
    report = train_linear(W0, adapter, (X.T, Y.T), train_config)
    success = report.final_loss <= success_ratio * report.initial_loss
    return report, success
