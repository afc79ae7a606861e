"""Deterministic random-stream derivation.

Every stochastic component in the package draws from numpy Generators built
here, so a run is reproducible from its master seed.  Sub-streams are keyed
by integers (layer index, trial index, ...), which keeps parallel workers
independent without sharing generator state.
"""

import numpy as np

__all__ = ["derive_rng", "derive_seed"]


def derive_rng(master_seed, *stream_keys):
    """Generator for the sub-stream identified by integer keys."""
    seq = np.random.SeedSequence([int(master_seed), *[int(k) for k in stream_keys]])
    return np.random.default_rng(seq)


def derive_seed(master_seed, *stream_keys):
    """A 63-bit integer seed for the sub-stream (storable in checkpoints)."""
    seq = np.random.SeedSequence([int(master_seed), *[int(k) for k in stream_keys]])
    return int(seq.generate_state(1, dtype=np.uint64)[0] >> 1)
