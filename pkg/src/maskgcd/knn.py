"""Exact top-k nearest-neighbor table over mask features.

Built once, then frozen: propagation and completion iterate over the same
table. Search is exact (blocked O(N²·D)), not approximate; ties are broken by
the lower mask index. Distances are selected in float64 and stored as float32
to match the cache file format exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import DiscoveryInstance
from .errors import DimensionMismatch, FormatError, IndexOutOfRange, IoError, KTooLarge, ParamError

CACHE_MAGIC = b"GCDK"
_ENTRY = np.dtype([("index", "<u4"), ("distance", "<f4")])


@dataclass
class NeighborTable:
    k: int
    neighbors: np.ndarray  # (N, k) int64, never contains the row index itself
    distances: np.ndarray  # (N, k) float32, ascending per row

    @property
    def n(self) -> int:
        return int(self.neighbors.shape[0])


def knn_table(features: np.ndarray, k: int, block: int = 256) -> NeighborTable:
    """Exact k-NN under L2 over the rows of ``features``."""
    feats = np.asarray(features, dtype=np.float64)
    n = feats.shape[0]
    if k < 1:
        raise ParamError(f"k must be >= 1, got {k}")
    if k >= n:
        raise KTooLarge(f"k={k} must be < number of masks ({n})")

    neighbors = np.empty((n, k), dtype=np.int64)
    distances = np.empty((n, k), dtype=np.float64)
    for start in range(0, n, block):
        stop = min(start + block, n)
        diff = feats[start:stop, None, :] - feats[None, :, :]
        # squared differences summed along the contiguous feature axis; the
        # brute-force oracle uses the same construction, so distances agree
        # bit for bit
        d = np.sqrt((diff * diff).sum(axis=2))
        for row in range(start, stop):
            d[row - start, row] = np.inf  # a mask is not its own neighbor
        # stable sort: exact ties resolve to the lower index
        order = np.argsort(d, axis=1, kind="stable")[:, :k]
        neighbors[start:stop] = order
        distances[start:stop] = np.take_along_axis(d, order, axis=1)
    return NeighborTable(k=k, neighbors=neighbors, distances=distances.astype(np.float32))


def build_neighbor_table(instance: DiscoveryInstance, k: int) -> NeighborTable:
    return knn_table(instance.features, k)


def neighbors_of(table: NeighborTable, mask_index: int) -> list[tuple[int, float]]:
    if not 0 <= mask_index < table.n:
        raise IndexOutOfRange(f"mask index {mask_index} outside [0, {table.n})")
    return [(int(i), float(d)) for i, d in zip(table.neighbors[mask_index], table.distances[mask_index])]


def write_neighbor_cache(table: NeighborTable, path: Path) -> None:
    entries = np.empty(table.neighbors.size, dtype=_ENTRY)
    entries["index"] = table.neighbors.ravel()
    entries["distance"] = table.distances.ravel()
    header = struct.pack("<4sII", CACHE_MAGIC, table.n, table.k)
    try:
        Path(path).write_bytes(header + entries.tobytes())
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def read_neighbor_cache(path: Path) -> NeighborTable:
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    if len(raw) < 12:
        raise FormatError(f"{path}: truncated header")
    magic, n, k = struct.unpack("<4sII", raw[:12])
    if magic != CACHE_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if len(raw) != 12 + n * k * _ENTRY.itemsize:
        raise DimensionMismatch(f"{path}: {len(raw) - 12} payload bytes, expected {n * k * _ENTRY.itemsize}")
    entries = np.frombuffer(raw, dtype=_ENTRY, offset=12)
    return NeighborTable(
        k=int(k),
        neighbors=entries["index"].astype(np.int64).reshape(n, k),
        distances=entries["distance"].astype(np.float32).reshape(n, k),
    )
