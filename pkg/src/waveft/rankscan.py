"""Monte-Carlo rank study of random sparse matrices.

A matrix with p randomly placed nonzeros becomes full rank once p passes
roughly n log n; `full_rank_asymptote` gives the limiting probability
e^(-2 e^(-c)) at p = n (ln n + c), and `rank_scan` measures the finite-size
behavior over seeded trials.
"""

from dataclasses import dataclass, field

import numpy as np

from .adapters import sample_support
from .rng import derive_rng, derive_seed

__all__ = [
    "numerical_rank",
    "random_sparse_matrix",
    "full_rank_asymptote",
    "RankScanConfig",
    "RankScanResult",
    "rank_scan",
]


def numerical_rank(matrix, tol=None):
    """Count singular values above tol (default max(m,n)*eps*sigma_max)."""
    M = np.asarray(matrix, dtype=float)
    if M.size == 0:
        return 0
    sv = np.linalg.svd(M, compute_uv=False)
    if tol is None:
        tol = max(M.shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
    return int(np.sum(sv > tol))


def random_sparse_matrix(m, n, p, seed):
    """m x n matrix with exactly p standard-normal entries at a uniform support."""
    support = sample_support(m, n, p, seed)
    rng = derive_rng(seed, 1)
    vals = rng.standard_normal(p)
    while np.any(vals == 0.0):  # keep the p entries genuinely nonzero
        zero = vals == 0.0
        vals[zero] = rng.standard_normal(int(zero.sum()))
    out = np.zeros((m, n))
    out[support.rows, support.cols] = vals
    return out


def full_rank_asymptote(n, p):
    """(c, limiting full-rank probability) for an n x n matrix with p nonzeros.

    Writing p = n (ln n + c), the probability that the matrix is full rank
    tends to exp(-2 exp(-c)) as n grows.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if p < 0:
        raise ValueError("p must be >= 0")
    c = p / n - np.log(n)
    return float(c), float(np.exp(-2.0 * np.exp(-c)))


@dataclass
class RankScanConfig:
    shape: tuple
    p_grid: list
    trials: int = 20
    master_seed: int = 0
    value_dist: str = "gaussian"

    def __post_init__(self):
        m, n = self.shape
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        for p in self.p_grid:
            if not 0 <= p <= m * n:
                raise ValueError(f"p={p} out of range for shape {self.shape}")
        if self.value_dist not in ("gaussian", "unit"):
            raise ValueError(f"unknown value_dist: {self.value_dist!r}")


@dataclass
class RankScanResult:
    config: RankScanConfig
    records: list  # (p, trial, rank) tuples
    summary: list = field(default_factory=list)
    # summary rows: (p, mean, ci_lo, ci_hi, full_rank_freq, median)

    def rows_for_p(self, p):
        return [r for r in self.records if r[0] == p]


def _sample(config, p, p_index, trial):
    m, n = config.shape
    seed = derive_seed(config.master_seed, p_index, trial)
    M = random_sparse_matrix(m, n, p, seed)
    if config.value_dist == "unit":
        M = np.sign(M)
    return M


def rank_scan(config):
    """Sample matrices for every (p, trial) cell and aggregate rank statistics.

    Per p: mean rank with a normal-approximation 95% CI, the median, and the
    frequency of full rank.  Each cell's seed derives from (master_seed,
    p index, trial index), so cells are order-independent and reproducible.
    """
    m, n = config.shape
    full = min(m, n)
    records = []
    summary = []
    for pi, p in enumerate(config.p_grid):
        ranks = []
        for t in range(config.trials):
            M = _sample(config, p, pi, t)
            r = numerical_rank(M)
            bound = min(
                int(np.sum(np.any(M != 0, axis=1))),
                int(np.sum(np.any(M != 0, axis=0))),
                full,
            )
            if r > bound:
                raise AssertionError(
                    f"rank {r} exceeds structural bound {bound} (p={p}, trial={t})"
                )
            ranks.append(r)
            records.append((p, t, r))
        ranks = np.asarray(ranks, dtype=float)
        mean = float(ranks.mean())
        sem = float(ranks.std(ddof=1) / np.sqrt(len(ranks))) if len(ranks) > 1 else 0.0
        summary.append(
            (
                p,
                mean,
                mean - 1.96 * sem,
                mean + 1.96 * sem,
                float(np.mean(ranks == full)),
                float(np.median(ranks)),
            )
        )
    return RankScanResult(config=config, records=records, summary=summary)
