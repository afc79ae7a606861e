"""Sparse fine-tuning adapters in the wavelet and weight domains.

Three adapter parameterizations of a weight update for a frozen linear map:
WaveFT (trainable scalars in the 2D wavelet coefficient grid), SHiRA
(trainable scalars placed directly in the update), and a LoRA baseline
(low-rank factorization).  The package also ships the experiment harnesses
that probe their capacity: rank scans of random sparse matrices, exact
block-sparse interpolation, and single-layer MNIST sweeps.
"""

__version__ = "0.1.0"

from .adapters import (
    LayerCensus,
    LowRankAdapter,
    SparseAdapter,
    SparseSupport,
    WaveletAdapter,
    allocate_budget,
    forward,
    init_values,
    lora_budget,
    merge,
    sample_support,
)
from .estimators import SparseAdapterClassifier, SparseAdapterRegressor
from .interpolation import (
    InterpolationProblem,
    capacity_experiment,
    construct_delta,
    find_pivot_columns,
    row_occupancy_bound,
)
from .rankscan import (
    RankScanConfig,
    full_rank_asymptote,
    numerical_rank,
    random_sparse_matrix,
    rank_scan,
)
from .training import Adam, TrainConfig, TrainReport, cross_entropy, mse, step_lr, train_linear
from .wavelets import (
    CoeffGrid,
    WaveletSpec,
    dwt2,
    dwt2_adjoint,
    idwt2,
    make_wavelet,
    padded_shape,
    subband_energy,
)

__all__ = [
    "LayerCensus",
    "LowRankAdapter",
    "SparseAdapter",
    "SparseSupport",
    "WaveletAdapter",
    "allocate_budget",
    "forward",
    "init_values",
    "lora_budget",
    "merge",
    "sample_support",
    "SparseAdapterClassifier",
    "SparseAdapterRegressor",
    "InterpolationProblem",
    "capacity_experiment",
    "construct_delta",
    "find_pivot_columns",
    "row_occupancy_bound",
    "RankScanConfig",
    "full_rank_asymptote",
    "numerical_rank",
    "random_sparse_matrix",
    "rank_scan",
    "Adam",
    "TrainConfig",
    "TrainReport",
    "cross_entropy",
    "mse",
    "step_lr",
    "train_linear",
    "CoeffGrid",
    "WaveletSpec",
    "dwt2",
    "dwt2_adjoint",
    "idwt2",
    "make_wavelet",
    "padded_shape",
    "subband_energy",
]
