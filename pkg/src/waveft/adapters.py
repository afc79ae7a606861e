"""The three adapter parameterizations and their parameter-budget arithmetic.

An adapter produces a weight update `delta()` for a frozen base matrix W0;
the effective weight is W0 + lam * delta.  WaveFT keeps its p trainable
scalars in the 2D wavelet coefficient grid of the update, SHiRA keeps them
directly in the update matrix, and LoRA factors the update as B @ A.T.
All three expose the same train-time surface (forward / grad / trainables),
so the trainer and estimators are adapter-agnostic.
"""

import numpy as np

from .rng import derive_rng
from .wavelets import (
    CoeffGrid,
    check_level,
    default_level,
    dwt2_adjoint,
    grid_shape,
    idwt2,
    make_wavelet,
)

__all__ = [
    "SparseSupport",
    "sample_support",
    "init_values",
    "WaveletAdapter",
    "SparseAdapter",
    "LowRankAdapter",
    "merge",
    "forward",
    "LayerCensus",
    "lora_budget",
    "allocate_budget",
]


class SparseSupport:
    """A seeded set of p distinct positions in an (m, n) grid.

    Positions are uniform over the grid without replacement and sorted in
    row-major order; resampling with the same (shape, p, seed) reproduces
    the identical set.
    """

    def __init__(self, shape, rows, cols, seed):
        self.shape = (int(shape[0]), int(shape[1]))
        self.rows = np.asarray(rows, dtype=np.int64)
        self.cols = np.asarray(cols, dtype=np.int64)
        self.seed = int(seed)
        if self.rows.shape != self.cols.shape:
            raise ValueError("rows and cols must have equal length")
        if self.rows.size:
            if self.rows.min() < 0 or self.rows.max() >= self.shape[0]:
                raise ValueError("row index out of range")
            if self.cols.min() < 0 or self.cols.max() >= self.shape[1]:
                raise ValueError("col index out of range")
        flat = self.rows * self.shape[1] + self.cols
        if np.unique(flat).size != flat.size:
            raise ValueError("support positions must be distinct")

    @property
    def p(self):
        return int(self.rows.size)

    def positions(self):
        """Positions as a list of (row, col) pairs."""
        return list(zip(self.rows.tolist(), self.cols.tolist()))

    def row_occupancy(self):
        """Number of support positions in each row of the grid."""
        return np.bincount(self.rows, minlength=self.shape[0])

    def __len__(self):
        return self.p

    def __eq__(self, other):
        return (
            isinstance(other, SparseSupport)
            and self.shape == other.shape
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
        )


def sample_support(m, n, p, seed):
    """Sample p distinct positions uniformly from an m x n grid."""
    total = int(m) * int(n)
    if not 0 <= p <= total:
        raise ValueError(f"p={p} out of range [0, {total}]")
    rng = derive_rng(seed)
    flat = np.sort(rng.choice(total, size=int(p), replace=False))
    return SparseSupport((m, n), flat // n, flat % n, seed)


def init_values(p, mode, seed=0, sigma=1.0):
    """Initial trainable values: all zeros, or i.i.d. N(0, sigma^2)."""
    if mode == "zero":
        return np.zeros(int(p))
    if mode == "gaussian":
        if sigma <= 0:
            raise ValueError(f"gaussian init needs sigma > 0, got {sigma}")
        return sigma * derive_rng(seed).standard_normal(int(p))
    raise ValueError(f"unknown init mode: {mode!r}")


class WaveletAdapter:
    """WaveFT: p trainable scalars in the wavelet coefficient grid.

    delta() embeds the values at the support positions of the coefficient
    grid, applies the inverse transform and crops to the base shape.  The
    scale `lam` multiplies delta only at merge/forward time.
    """

    kind = "waveft"

    def __init__(self, base_shape, support, values, spec, lam=1.0):
        self.base_shape = (int(base_shape[0]), int(base_shape[1]))
        self.spec = spec
        check_level(*self.base_shape, spec)
        expected = grid_shape(*self.base_shape, spec)
        if support.shape != expected:
            raise ValueError(
                f"support indexes grid {support.shape}, expected {expected}"
            )
        self.support = support
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != (support.p,):
            raise ValueError("values length must equal support size")
        self.lam = float(lam)

    @classmethod
    def create(cls, base_shape, p, seed, family="db1", level=None, lam=1.0,
               init="zero", sigma=1.0):
        m, n = base_shape
        if level is None:
            level = default_level(m, n)
        spec = make_wavelet(family, level)
        gm, gn = grid_shape(m, n, spec)
        support = sample_support(gm, gn, p, seed)
        values = init_values(p, init, seed=seed, sigma=sigma)
        return cls(base_shape, support, values, spec, lam=lam)

    def coeff_grid(self):
        data = np.zeros(self.support.shape)
        data[self.support.rows, self.support.cols] = self.values
        return CoeffGrid(data, self.spec, self.base_shape)

    def delta(self):
        return idwt2(self.coeff_grid(), self.spec, self.base_shape)

    def forward(self, W0, x):
        return W0 @ x + self.lam * (self.delta() @ x)

    def grad(self, x, upstream):
        """Gradient of the loss w.r.t. the trainable values.

        upstream is dL/dy with y = (W0 + lam*delta) @ x; x and upstream may
        carry a trailing batch axis.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float).T).T
        u = np.atleast_2d(np.asarray(upstream, dtype=float).T).T
        full = dwt2_adjoint(u @ x.T, self.spec, self.base_shape)
        g = self.lam * full.data[self.support.rows, self.support.cols]
        return {"values": g}

    def trainables(self):
        return {"values": self.values}


class SparseAdapter:
    """SHiRA: p trainable scalars placed directly in the update matrix."""

    kind = "shira"

    def __init__(self, base_shape, support, values, lam=1.0):
        self.base_shape = (int(base_shape[0]), int(base_shape[1]))
        if support.shape != self.base_shape:
            raise ValueError(
                f"support indexes grid {support.shape}, expected {self.base_shape}"
            )
        self.support = support
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != (support.p,):
            raise ValueError("values length must equal support size")
        self.lam = float(lam)

    @classmethod
    def create(cls, base_shape, p, seed, lam=1.0, init="zero", sigma=1.0):
        m, n = base_shape
        support = sample_support(m, n, p, seed)
        values = init_values(p, init, seed=seed, sigma=sigma)
        return cls(base_shape, support, values, lam=lam)

    def delta(self):
        out = np.zeros(self.base_shape)
        out[self.support.rows, self.support.cols] = self.values
        return out

    def forward(self, W0, x):
        return W0 @ x + self.lam * (self.delta() @ x)

    def grad(self, x, upstream):
        x = np.atleast_2d(np.asarray(x, dtype=float).T).T
        u = np.atleast_2d(np.asarray(upstream, dtype=float).T).T
        g = self.lam * np.sum(u[self.support.rows] * x[self.support.cols], axis=1)
        return {"values": g}

    def trainables(self):
        return {"values": self.values}


class LowRankAdapter:
    """LoRA: update factored as B @ A.T, scaled by alpha / rank.

    B starts at zero and A Gaussian, so the update vanishes at step 0 like
    the sparse kinds.  The alpha/rank scale is part of delta(); `lam` is
    fixed at 1 for this kind.
    """

    kind = "lora"
    lam = 1.0

    def __init__(self, base_shape, B, A, alpha=None):
        self.base_shape = (int(base_shape[0]), int(base_shape[1]))
        self.B = np.asarray(B, dtype=float)
        self.A = np.asarray(A, dtype=float)
        if self.B.ndim != 2 or self.A.ndim != 2 or self.B.shape[1] != self.A.shape[1]:
            raise ValueError("B and A must be matrices with a shared rank axis")
        if self.B.shape[0] != self.base_shape[0] or self.A.shape[0] != self.base_shape[1]:
            raise ValueError("B/A shapes inconsistent with base shape")
        self.rank = self.B.shape[1]
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        self.alpha = float(self.rank if alpha is None else alpha)

    @classmethod
    def create(cls, base_shape, rank, seed, alpha=None):
        m, n = base_shape
        rng = derive_rng(seed)
        B = np.zeros((m, rank))
        A = rng.standard_normal((n, rank)) / np.sqrt(n)
        return cls(base_shape, B, A, alpha=alpha)

    @property
    def scale(self):
        return self.alpha / self.rank

    def delta(self):
        return self.scale * (self.B @ self.A.T)

    def forward(self, W0, x):
        return W0 @ x + self.scale * (self.B @ (self.A.T @ x))

    def grad(self, x, upstream):
        x = np.atleast_2d(np.asarray(x, dtype=float).T).T
        u = np.atleast_2d(np.asarray(upstream, dtype=float).T).T
        gB = self.scale * (u @ (x.T @ self.A))
        gA = self.scale * (x @ (u.T @ self.B))
        return {"B": gB, "A": gA}

    def trainables(self):
        return {"B": self.B, "A": self.A}

    def num_params(self):
        return self.B.size + self.A.size


def merge(W0, adapter):
    """W_final = W0 + lam * delta; inference on W_final equals forward()."""
    W0 = np.asarray(W0, dtype=float)
    if W0.shape != adapter.base_shape:
        raise ValueError(f"W0 shape {W0.shape} != base {adapter.base_shape}")
    return W0 + adapter.lam * adapter.delta()


def forward(W0, adapter, x):
    """Apply the adapted layer without materializing the merged matrix."""
    W0 = np.asarray(W0, dtype=float)
    if W0.shape != adapter.base_shape:
        raise ValueError(f"W0 shape {W0.shape} != base {adapter.base_shape}")
    x = np.asarray(x, dtype=float)
    if x.shape[0] != W0.shape[1]:
        raise ValueError(f"input length {x.shape[0]} != {W0.shape[1]}")
    return adapter.forward(W0, x)


class LayerCensus:
    """Shapes and multiplicities of the adapted layers of a model."""

    def __init__(self, entries):
        self.entries = []
        for shape, count in entries:
            m, n = int(shape[0]), int(shape[1])
            count = int(count)
            if count < 1:
                raise ValueError("layer count must be >= 1")
            if m < 1 or n < 1:
                raise ValueError("layer dims must be >= 1")
            self.entries.append(((m, n), count))

    @property
    def num_layers(self):
        return sum(c for _, c in self.entries)

    def layer_shapes(self):
        """Every layer's shape, expanded by multiplicity, in census order."""
        out = []
        for shape, count in self.entries:
            out.extend([shape] * count)
        return out


# Attention-projection shapes of the SDXL UNet; lora_budget of this census
# at r=1 is the 1,451,520-parameter reference budget.
SDXL_ATTENTION_CENSUS = LayerCensus(
    [
        ((1280, 1280), 360),
        ((1280, 2048), 120),
        ((640, 640), 60),
        ((640, 2048), 20),
    ]
)


def lora_budget(census, rank):
    """Total trainable parameters of rank-r LoRA across the census."""
    if rank < 1:
        raise ValueError("rank must be >= 1")
    return sum(count * rank * (m + n) for (m, n), count in census.entries)


def allocate_budget(census, total_p, policy):
    """Split a total parameter budget into per-layer sparse budgets.

    fixed: equal share per layer, remainder to the earliest layers.
    proportional: shares proportional to layer size (m + n), rounded by
    largest remainder with ties broken by layer index; sums to total_p.
    """
    shapes = census.layer_shapes()
    k = len(shapes)
    if total_p < 0:
        raise ValueError("total_p must be >= 0")
    if policy == "fixed":
        if total_p < k:
            raise ValueError(f"fixed policy needs total_p >= {k} layers")
        q, r = divmod(total_p, k)
        return [q + 1] * r + [q] * (k - r)
    if policy == "proportional":
        weights = np.array([m + n for m, n in shapes], dtype=float)
        exact = total_p * weights / weights.sum()
        base = np.floor(exact).astype(int)
        leftover = total_p - int(base.sum())
        order = np.lexsort((np.arange(k), -(exact - base)))
        base[order[:leftover]] += 1
        return base.tolist()
    raise ValueError(f"unknown allocation policy: {policy!r}")
