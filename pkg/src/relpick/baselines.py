"""Comparison selectors that need no training dynamics.

Uniform random, highest-confidence-first (small-loss proxy), smallest
softmax margin, and k-center greedy on embedding distances. External
per-example scores (forgetting counts, gradient norms, ...) can be fed
through the confidence-based selectors since only the ranking matters.
"""

from __future__ import annotations

import time

import numpy as np

from .errors import ConfigError, DataError
from .dataspec import ConfidenceVector, EmbeddingMatrix, ProbabilityMatrix


def _check_budget(s: int, m: int) -> None:
    if not (1 <= s <= m):
        raise DataError(f"budget {s} out of range [1, {m}]")


def select_uniform(m: int, s: int, seed: int) -> np.ndarray:
    """s distinct indices drawn uniformly without replacement."""
    _check_budget(s, m)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(m, size=s, replace=False)).astype(np.int64)


def select_small_loss(C: ConfidenceVector, s: int) -> np.ndarray:
    """The s highest-confidence examples (small warm-up loss proxy);
    ties break toward the lowest index."""
    _check_budget(s, C.m)
    # stable sort on -C: equal confidences keep ascending index order
    order = np.argsort(-C.values, kind="stable")
    return np.sort(order[:s]).astype(np.int64)


def select_margin(P: ProbabilityMatrix, s: int) -> np.ndarray:
    """The s examples with the smallest top-1/top-2 probability gap."""
    if P.c < 2:
        raise ConfigError("margin selection needs at least 2 classes")
    _check_budget(s, P.m)
    top2 = np.sort(P.data, axis=1)[:, -2:]
    margin = top2[:, 1] - top2[:, 0]
    order = np.argsort(margin, kind="stable")
    return np.sort(order[:s]).astype(np.int64)


def select_kcenter(
    E: EmbeddingMatrix, s: int, seed_index: int = 0
) -> tuple[np.ndarray, list[float]]:
    """Farthest-point-first selection on Euclidean distances.

    Each step recomputes the distance of every point to the full center
    set (cost grows with the number of centers, the behavior the scaling
    bench exercises). Returns the selection order and per-step wall
    times.
    """
    m = E.m
    _check_budget(s, m)
    if not (0 <= seed_index < m):
        raise DataError(f"seed index {seed_index} out of range [0, {m})")
    X = E.data.astype(np.float64)
    sq = np.einsum("ij,ij->i", X, X)
    order = [seed_index]
    selected = np.zeros(m, dtype=bool)
    selected[seed_index] = True
    times: list[float] = []
    for _ in range(s - 1):
        t0 = time.perf_counter()
        centers = X[order]
        # squared distances to every current center, then coverage min
        d2 = sq[:, None] - 2.0 * (X @ centers.T) + sq[order][None, :]
        cover = np.maximum(d2.min(axis=1), 0.0)
        cover[selected] = -np.inf
        x = int(np.argmax(cover))  # first max: lowest index on ties
        order.append(x)
        selected[x] = True
        times.append(time.perf_counter() - t0)
    return np.asarray(order, dtype=np.int64), times


def covering_radius(E: EmbeddingMatrix, centers) -> float:
    """Max distance from any point to its nearest center."""
    X = E.data.astype(np.float64)
    idx = [int(i) for i in centers]
    d2 = ((X[:, None, :] - X[idx][None, :, :]) ** 2).sum(axis=2)
    return float(np.sqrt(np.maximum(d2.min(axis=1), 0.0)).max())
