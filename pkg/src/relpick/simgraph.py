"""Thresholded cosine-similarity neighborhood graph.

The graph is exact: every pair whose cosine similarity (stored as
float32) reaches the threshold ``tau`` gets an edge, including the
self-loop with weight exactly 1. Construction is the brute-force
O(m^2 d) pairwise scan, computed in float64 and blocked over rows so
large inputs stay within memory; the result is deterministic and
independent of the block size. Edge membership is decided on the
float32-rounded similarity so that stored weights always lie in
[tau, 1].

Cache file format: 8-byte magic ``RELGRPH1``, u64 m, f64 tau, u64 nnz,
then (m+1) u64 row offsets, nnz u64 column indices, nnz f32 weights.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, FormatError
from .dataspec import EmbeddingMatrix

GRAPH_MAGIC = b"RELGRPH1"

_BLOCK_ROWS = 1024


@dataclass(frozen=True)
class NeighborGraph:
    """Symmetric CSR adjacency with weights in [tau, 1] and self-loops."""

    m: int
    tau: float
    indptr: np.ndarray   # int64, shape (m+1,)
    indices: np.ndarray  # int64, neighbor ids, sorted per row
    weights: np.ndarray  # float32, cosine similarities

    def neighbors(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.weights[lo:hi]

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def dense_weights(self) -> np.ndarray:
        """Materialize the m x m weight matrix (small instances only)."""
        W = np.zeros((self.m, self.m), dtype=np.float64)
        for i in range(self.m):
            js, ws = self.neighbors(i)
            W[i, js] = ws.astype(np.float64)
        return W

    def validate(self) -> None:
        if self.indptr.shape != (self.m + 1,) or self.indptr[0] != 0:
            raise DataError("graph: malformed row offsets")
        if self.indices.size != self.weights.size or self.indices.size != self.indptr[-1]:
            raise DataError("graph: index/weight arrays inconsistent with offsets")
        w64 = self.weights.astype(np.float64)
        if w64.size and (w64.min() < self.tau - 1e-9 or w64.max() > 1.0 + 1e-9):
            raise DataError("graph: edge weight outside [tau, 1]")
        # Symmetry incl. identical weights: the multiset of (i, j, w) must
        # equal the multiset of (j, i, w).
        rows = np.repeat(np.arange(self.m, dtype=np.int64), np.diff(self.indptr))
        fwd = np.lexsort((rows, self.indices))
        key_fwd = self.indices[fwd] * self.m + rows[fwd]
        key_nat = rows * self.m + self.indices
        if not np.array_equal(key_fwd, key_nat) or not np.array_equal(
            self.weights[fwd], self.weights
        ):
            raise DataError("graph: adjacency is not symmetric")
        for i in range(self.m):
            js, ws = self.neighbors(i)
            pos = np.searchsorted(js, i)
            if pos >= js.size or js[pos] != i:
                raise DataError(f"graph: missing self-loop at row {i}")


def unit_rows(E: EmbeddingMatrix) -> np.ndarray:
    """Rows scaled to unit L2 norm, in float64. Zero rows are data errors."""
    data = E.data.astype(np.float64)
    norms = np.linalg.norm(data, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise DataError(f"row {zero[0]} has zero norm; cosine similarity undefined")
    return data / norms[:, None]


def build_graph(E: EmbeddingMatrix, tau: float) -> NeighborGraph:
    if not (0.0 < tau <= 1.0):
        raise ConfigError(f"tau must lie in (0, 1], got {tau}")
    U = unit_rows(E)
    m = U.shape[0]
    counts = np.zeros(m, dtype=np.int64)
    idx_chunks: list[np.ndarray] = []
    w_chunks: list[np.ndarray] = []
    for start in range(0, m, _BLOCK_ROWS):
        stop = min(start + _BLOCK_ROWS, m)
        sims = U[start:stop] @ U.T
        np.clip(sims, -1.0, 1.0, out=sims)
        block = np.arange(stop - start)
        sims[block, block + start] = 1.0
        w32 = sims.astype(np.float32)
        rows, cols = np.nonzero(w32 >= tau)  # row-major: sorted per row
        counts[start:stop] = np.bincount(rows, minlength=stop - start)
        idx_chunks.append(cols.astype(np.int64))
        w_chunks.append(w32[rows, cols])
    indptr = np.zeros(m + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    indices = np.concatenate(idx_chunks)
    weights = np.concatenate(w_chunks)
    return NeighborGraph(m=m, tau=float(tau), indptr=indptr, indices=indices, weights=weights)


@dataclass(frozen=True)
class DegreeStats:
    min: int
    mean: float
    max: int

    def to_dict(self) -> dict:
        return {"min": self.min, "mean": self.mean, "max": self.max}


def degree_stats(G: NeighborGraph) -> DegreeStats:
    """Neighbor-count summary, self-loops excluded."""
    degrees = np.diff(G.indptr) - 1
    return DegreeStats(
        min=int(degrees.min()),
        mean=float(degrees.mean()),
        max=int(degrees.max()),
    )


def save_graph(path: str | Path, G: NeighborGraph) -> None:
    with open(path, "wb") as f:
        f.write(GRAPH_MAGIC)
        f.write(struct.pack("<QdQ", G.m, G.tau, G.nnz))
        f.write(np.ascontiguousarray(G.indptr, dtype="<i8").tobytes())
        f.write(np.ascontiguousarray(G.indices, dtype="<i8").tobytes())
        f.write(np.ascontiguousarray(G.weights, dtype="<f4").tobytes())


def load_graph(path: str | Path) -> NeighborGraph:
    raw = Path(path).read_bytes()
    if len(raw) < 32 or raw[:8] != GRAPH_MAGIC:
        raise FormatError(f"{path}: missing or corrupt graph header")
    m, tau, nnz = struct.unpack("<QdQ", raw[8:32])
    off = 32
    need = (m + 1) * 8 + nnz * 8 + nnz * 4
    if len(raw) - off != need:
        raise FormatError(f"{path}: payload size mismatch (expected {need} bytes)")
    indptr = np.frombuffer(raw, dtype="<i8", count=m + 1, offset=off).copy()
    off += (m + 1) * 8
    indices = np.frombuffer(raw, dtype="<i8", count=nnz, offset=off).copy()
    off += nnz * 8
    weights = np.frombuffer(raw, dtype="<f4", count=nnz, offset=off).copy()
    G = NeighborGraph(m=m, tau=tau, indptr=indptr, indices=indices, weights=weights)
    G.validate()
    return G
