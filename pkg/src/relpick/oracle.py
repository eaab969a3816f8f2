"""Independent brute-force references and synthetic instance generation.

Nothing here reuses the graph/accumulator machinery: the naive objective
is a literal transcription of the definitions straight from raw
embeddings, and the optimum is found by exhaustive enumeration. These
are the ground truth the fast paths are tested against.
"""

from __future__ import annotations

import math
from itertools import combinations

import numpy as np

from .errors import DataError, SizeGuardError
from .dataspec import (
    ConfidenceVector,
    EmbeddingMatrix,
    LabelVector,
    NoiseFlagVector,
)
from .simgraph import NeighborGraph

ENUMERATION_LIMIT = 10**6


def naive_objective(E: EmbeddingMatrix, C: ConfidenceVector, tau: float, S, u) -> float:
    """Triple-loop objective from raw embeddings: for every example i,
    accumulate indicator-thresholded cosine-weighted confidences over
    the subset, apply the utility, and sum. ``u`` is any scalar-or-array
    callable with u(0) = 0."""
    data = E.data.astype(np.float64)
    m = data.shape[0]
    subset = [int(j) for j in S]
    norms = [math.sqrt(float(np.dot(row, row))) for row in data]
    if any(n == 0.0 for n in norms):
        raise DataError("zero-norm embedding row; cosine undefined")
    total = 0.0
    for i in range(m):
        cn_i = 0.0
        for j in subset:
            sim = float(np.dot(data[i], data[j])) / (norms[i] * norms[j])
            sim = min(1.0, max(-1.0, sim))
            if i == j:
                sim = 1.0
            # match the engine's float32 weight storage
            sim = float(np.float32(sim))
            if sim >= tau:
                cn_i += sim * float(C.values[j])
        total += float(u(cn_i))
    return total


def brute_force_optimum(
    G: NeighborGraph, C: ConfidenceVector, s: int, u
) -> tuple[tuple[int, ...], float]:
    """Exhaustively evaluate every size-s subset; ties resolve to the
    lexicographically smallest subset. Guarded against blow-up."""
    m = G.m
    if not (1 <= s <= m):
        raise DataError(f"subset size {s} out of range [1, {m}]")
    n_combos = math.comb(m, s)
    if n_combos > ENUMERATION_LIMIT:
        raise SizeGuardError(
            f"C({m},{s}) = {n_combos} subsets exceeds the enumeration limit "
            f"of {ENUMERATION_LIMIT}"
        )
    W = G.dense_weights()
    conf = C.values
    best_subset: tuple[int, ...] | None = None
    best_obj = -np.inf
    for combo in combinations(range(m), s):  # lexicographic order
        idx = list(combo)
        cn = W[:, idx] @ conf[idx]
        obj = float(np.sum(u(cn)))
        if obj > best_obj + 1e-12:
            best_subset, best_obj = combo, obj
    return best_subset, best_obj


def random_instance(
    seed: int,
    m: int,
    d: int,
    c: int,
    cluster_spread: float = 0.1,
    noise_fraction: float = 0.0,
) -> tuple[EmbeddingMatrix, ConfidenceVector, LabelVector, NoiseFlagVector]:
    """Synthetic clustered instance. Clean examples sit near their class
    center with confidences in [0.6, 0.95]; noisy ones point in random
    off-cluster directions with confidences in [0.05, 0.35]."""
    if m < 1 or d < 1 or c < 1:
        raise DataError("m, d, c must all be >= 1")
    if not (0.0 <= noise_fraction <= 1.0):
        raise DataError("noise_fraction must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((c, d))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    labels = rng.integers(0, c, size=m)
    n_noisy = int(round(noise_fraction * m))
    noisy = np.zeros(m, dtype=bool)
    noisy[rng.choice(m, size=n_noisy, replace=False)] = True

    rows = centers[labels] + cluster_spread * rng.standard_normal((m, d))
    off_cluster = rng.standard_normal((m, d))
    rows[noisy] = off_cluster[noisy]
    norms = np.linalg.norm(rows, axis=1)
    norms[norms == 0.0] = 1.0
    rows = rows / norms[:, None]
    # renormalize after the float32 cast so the normalized invariant holds
    rows32 = rows.astype(np.float32).astype(np.float64)
    rows = (rows32 / np.linalg.norm(rows32, axis=1, keepdims=True)).astype(np.float32)

    conf = rng.uniform(0.6, 0.95, size=m)
    conf[noisy] = rng.uniform(0.05, 0.35, size=n_noisy)

    return (
        EmbeddingMatrix(rows, normalized=True),
        ConfidenceVector(conf),
        LabelVector(labels, class_count=c),
        NoiseFlagVector(noisy),
    )
