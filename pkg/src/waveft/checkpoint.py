"""Adapter checkpoints and dense weight files.

Checkpoints are JSON with every float encoded as its C99 hex literal, so a
save -> load -> save round trip reproduces identical bytes and no precision
is lost.  Dense matrices (bases, merged weights) use a small binary format:
an 8-byte magic, uint32 little-endian dims, then row-major float64.
All writes go through a temp file and an atomic rename.
"""

import json
import os
import struct
import tempfile

import numpy as np

from .adapters import LowRankAdapter, SparseAdapter, SparseSupport, WaveletAdapter
from .wavelets import grid_shape, make_wavelet

__all__ = [
    "CheckpointError",
    "save_checkpoint",
    "load_checkpoint",
    "checkpoint_bytes",
    "save_weights",
    "load_weights",
    "CHECKPOINT_VERSION",
]

CHECKPOINT_VERSION = 1
WEIGHTS_MAGIC = b"WFTW0001"


class CheckpointError(ValueError):
    pass


def _hex(values):
    return [float(v).hex() for v in np.asarray(values, dtype=float).ravel()]


def _unhex(strings):
    return np.array([float.fromhex(s) for s in strings], dtype=float)


def _atomic_write(path, data):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def checkpoint_bytes(adapter):
    """Serialize an adapter to canonical checkpoint bytes."""
    doc = {
        "version": CHECKPOINT_VERSION,
        "kind": adapter.kind,
        "base_shape": list(adapter.base_shape),
        "lambda": float(adapter.lam).hex(),
    }
    if adapter.kind in ("waveft", "shira"):
        doc["seed"] = adapter.support.seed
        doc["support"] = [[int(r), int(c)] for r, c in
                          zip(adapter.support.rows, adapter.support.cols)]
        doc["values"] = _hex(adapter.values)
        if adapter.kind == "waveft":
            doc["wavelet"] = {"family": adapter.spec.family,
                              "level": adapter.spec.level}
    elif adapter.kind == "lora":
        doc["seed"] = int(getattr(adapter, "seed", 0))
        doc["rank"] = adapter.rank
        doc["alpha"] = float(adapter.alpha).hex()
        doc["B"] = _hex(adapter.B)
        doc["A"] = _hex(adapter.A)
    else:
        raise CheckpointError(f"unknown adapter kind: {adapter.kind!r}")
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return text.encode("ascii") + b"\n"


def save_checkpoint(path, adapter):
    _atomic_write(path, checkpoint_bytes(adapter))


def _require(doc, key):
    if key not in doc:
        raise CheckpointError(f"checkpoint missing field {key!r}")
    return doc[key]


def load_checkpoint(path):
    """Load a checkpoint, validating version and internal consistency."""
    with open(path, "rb") as fh:
        try:
            doc = json.loads(fh.read().decode("ascii"))
        except (UnicodeDecodeError, json.JSONDecodeError) as err:
            raise CheckpointError(f"{path}: not a checkpoint ({err})") from None
    version = _require(doc, "version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {version}, expected {CHECKPOINT_VERSION}"
        )
    kind = _require(doc, "kind")
    base_shape = tuple(_require(doc, "base_shape"))
    lam = float.fromhex(_require(doc, "lambda"))

    if kind in ("waveft", "shira"):
        positions = _require(doc, "support")
        values = _unhex(_require(doc, "values"))
        if len(positions) != values.size:
            raise CheckpointError(
                f"support has {len(positions)} positions but {values.size} values"
            )
        rows = np.array([p[0] for p in positions], dtype=np.int64)
        cols = np.array([p[1] for p in positions], dtype=np.int64)
        seed = int(doc.get("seed", 0))
        if kind == "shira":
            support = SparseSupport(base_shape, rows, cols, seed)
            return SparseAdapter(base_shape, support, values, lam=lam)
        wav = _require(doc, "wavelet")
        spec = make_wavelet(wav["family"], wav["level"])
        support = SparseSupport(grid_shape(*base_shape, spec), rows, cols, seed)
        return WaveletAdapter(base_shape, support, values, spec, lam=lam)

    if kind == "lora":
        rank = int(_require(doc, "rank"))
        B = _unhex(_require(doc, "B")).reshape(base_shape[0], rank)
        A = _unhex(_require(doc, "A")).reshape(base_shape[1], rank)
        adapter = LowRankAdapter(base_shape, B, A,
                                 alpha=float.fromhex(_require(doc, "alpha")))
        adapter.seed = int(doc.get("seed", 0))
        return adapter

    raise CheckpointError(f"unknown checkpoint kind: {kind!r}")


def save_weights(path, matrix):
    """Write a dense float64 matrix: magic, uint32 m, uint32 n, row-major data."""
    W = np.ascontiguousarray(np.asarray(matrix, dtype="<f8"))
    if W.ndim != 2:
        raise ValueError("weights must be a matrix")
    header = WEIGHTS_MAGIC + struct.pack("<II", W.shape[0], W.shape[1])
    _atomic_write(path, header + W.tobytes())


def load_weights(path):
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16 or header[:8] != WEIGHTS_MAGIC:
            raise CheckpointError(f"{path}: not a weight file")
        m, n = struct.unpack("<II", header[8:])
        data = fh.read()
    if len(data) != 8 * m * n:
        raise CheckpointError(f"{path}: truncated payload")
    return np.frombuffer(data, dtype="<f8").reshape(m, n).copy()
