"""Greedy subset selection maximizing total neighborhood confidence.

The objective of a subset S is sum_i u(cn_i(S)) where cn_i(S) is the
similarity-weighted sum of confidences of i's selected neighbors and u
is a non-decreasing concave utility with u(0) = 0 (tanh by default).

Three selection rules are provided:

* ``surrogate`` — at each step pick the candidate x maximizing its own
  gain u(cn[x] + C[x]) - u(cn[x]); cheap, the method's default.
* ``exact``     — pick the candidate maximizing the true objective
  marginal, which carries the classic (1 - 1/e) greedy guarantee.
* ``lazy``      — CELF-style lazy evaluation of the exact marginal;
  output is index-for-index identical to ``exact``.

All ties break toward the lowest index; the accumulator is float64 and
updated over neighbors in index order, so runs are deterministic.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .dataspec import (
    ConfidenceVector,
    LabelVector,
    NoiseFlagVector,
    SelectionConfig,
    SelectionResult,
)
from .simgraph import NeighborGraph


class Utility:
    """Non-decreasing concave map with u(0) = 0, applied elementwise."""

    def __init__(self, kind: str, fn, knots=None):
        self.kind = kind
        self._fn = fn
        self.knots = knots

    def __call__(self, z):
        return self._fn(np.asarray(z, dtype=np.float64))

    def into(self, z: np.ndarray, out: np.ndarray) -> None:
        """Apply elementwise into a preallocated buffer (hot loop path)."""
        if self.kind == "tanh":
            np.tanh(z, out=out)
        elif self.kind == "identity":
            if out is not z:
                np.copyto(out, z)
        else:
            out[...] = self._fn(z)

    @classmethod
    def tanh(cls) -> "Utility":
        return cls("tanh", np.tanh)

    @classmethod
    def identity(cls) -> "Utility":
        return cls("identity", lambda z: z)

    @classmethod
    def piecewise(cls, knots) -> "Utility":
        """Piecewise-linear utility through (x, y) knots on [0, inf);
        constant beyond the last knot. Validated numerically."""
        pts = sorted((float(x), float(y)) for x, y in knots)
        if not pts or pts[0] != (0.0, 0.0):
            raise ConfigError("piecewise utility must start at knot (0, 0)")
        xs = np.array([p[0] for p in pts])
        ys = np.array([p[1] for p in pts])
        if np.unique(xs).size != xs.size:
            raise ConfigError("piecewise utility knots must have distinct x values")
        u = cls("piecewise", lambda z: np.interp(z, xs, ys), knots=pts)
        u.validate_shape(grid_max=float(xs[-1]) * 1.5 + 1.0)
        return u

    def validate_shape(self, grid_max: float = 8.0, grid_points: int = 201) -> None:
        """Check u(0)=0, monotone non-decreasing, concave on a grid."""
        grid = np.linspace(0.0, grid_max, grid_points)
        vals = self(grid)
        if not np.isfinite(vals).all():
            raise ConfigError(f"{self.kind} utility produced non-finite values")
        if abs(float(self(0.0))) > 1e-12:
            raise ConfigError(f"{self.kind} utility violates u(0) = 0")
        d1 = np.diff(vals)
        if np.any(d1 < -1e-12):
            raise ConfigError(f"{self.kind} utility is not non-decreasing")
        if np.any(np.diff(d1) > 1e-12):
            raise ConfigError(f"{self.kind} utility is not concave on [0, {grid_max}]")


def utility_from_config(cfg: SelectionConfig) -> Utility:
    if cfg.utility == "tanh":
        return Utility.tanh()
    if cfg.utility == "identity":
        return Utility.identity()
    return Utility.piecewise(cfg.utility_knots)


@dataclass
class SelectionState:
    """Running accumulator cn[v] = sum over selected x of w(v,x) * C(x)."""

    m: int
    budget: int
    selected: list[int] = field(default_factory=list)
    selected_mask: np.ndarray = None
    cn: np.ndarray = None

    def __post_init__(self):
        if self.selected_mask is None:
            self.selected_mask = np.zeros(self.m, dtype=bool)
        if self.cn is None:
            self.cn = np.zeros(self.m, dtype=np.float64)

    @property
    def remaining(self) -> int:
        return self.budget - len(self.selected)

    def add(self, x: int, G: NeighborGraph, C: ConfidenceVector) -> None:
        if self.selected_mask[x]:
            raise DataError(f"index {x} already selected")
        self.selected.append(x)
        self.selected_mask[x] = True
        js, ws = G.neighbors(x)
        self.cn[js] += ws.astype(np.float64) * C.values[x]


def recompute_cn(G: NeighborGraph, C: ConfidenceVector, S) -> np.ndarray:
    """From-scratch accumulator for a subset; reference for the
    incremental updates."""
    cn = np.zeros(G.m, dtype=np.float64)
    for x in sorted(int(i) for i in S):
        js, ws = G.neighbors(x)
        cn[js] += ws.astype(np.float64) * C.values[x]
    return cn


def _check_subset(m: int, S) -> list[int]:
    idx = [int(i) for i in S]
    if len(set(idx)) != len(idx):
        raise DataError("subset contains duplicate indices")
    for i in idx:
        if not (0 <= i < m):
            raise DataError(f"subset index {i} out of range [0, {m})")
    return idx


def objective(G: NeighborGraph, C: ConfidenceVector, S, u: Utility) -> float:
    """Total utility of the subset's neighborhood confidence, computed
    from scratch."""
    idx = _check_subset(G.m, S)
    return float(u(recompute_cn(G, C, idx)).sum())


def surrogate_gain(state: SelectionState, C: ConfidenceVector, x: int, u: Utility) -> float:
    """Self gain u(cn[x] + C(x)) - u(cn[x]) of adding candidate x."""
    if state.selected_mask[x]:
        raise DataError(f"index {x} already selected")
    return float(u(state.cn[x] + C.values[x]) - u(state.cn[x]))


def exact_gain(
    G: NeighborGraph, C: ConfidenceVector, state: SelectionState, x: int, u: Utility
) -> float:
    """True objective marginal of adding candidate x."""
    if state.selected_mask[x]:
        raise DataError(f"index {x} already selected")
    js, ws = G.neighbors(x)
    before = state.cn[js]
    after = before + ws.astype(np.float64) * C.values[x]
    return float((u(after) - u(before)).sum())


def _argmax_surrogate(state: SelectionState, C: ConfidenceVector, u: Utility,
                      members: np.ndarray | None = None) -> tuple[int, float]:
    cand = members if members is not None else np.arange(state.m)
    cand = cand[~state.selected_mask[cand]]
    cn = state.cn[cand]
    gains = u(cn + C.values[cand]) - u(cn)
    k = int(np.argmax(gains))  # first max: lowest index (cand is sorted)
    return int(cand[k]), float(gains[k])


def _argmax_exact(G: NeighborGraph, C: ConfidenceVector, state: SelectionState,
                  u: Utility, members: np.ndarray | None = None) -> tuple[int, float]:
    cand = members if members is not None else np.arange(state.m)
    best_x, best_g = -1, -np.inf
    for x in cand:
        if state.selected_mask[x]:
            continue
        g = exact_gain(G, C, state, int(x), u)
        if g > best_g:
            best_x, best_g = int(x), g
    return best_x, best_g


def _select_lazy(G: NeighborGraph, C: ConfidenceVector, state: SelectionState,
                 u: Utility, s: int, on_pick) -> None:
    """CELF: stale exact gains are upper bounds by submodularity, so the
    heap top only needs refreshing until the freshest entry stays on top."""
    step = 0
    heap = [(-exact_gain(G, C, state, x, u), x, step) for x in range(G.m)]
    heapq.heapify(heap)
    while len(state.selected) < s and heap:
        neg_g, x, stamp = heapq.heappop(heap)
        if state.selected_mask[x]:
            continue
        if stamp == step:
            on_pick(x, -neg_g)
            step += 1
        else:
            heapq.heappush(heap, (-exact_gain(G, C, state, x, u), x, step))


def select(
    G: NeighborGraph,
    C: ConfidenceVector,
    labels: LabelVector | None,
    cfg: SelectionConfig,
) -> SelectionResult:
    """Run the configured greedy selection and return the full trace."""
    if C.m != G.m:
        raise DataError(f"confidence length {C.m} != graph size {G.m}")
    if cfg.balanced and labels is None:
        raise ConfigError("balanced selection requires labels")
    if labels is not None and labels.m != G.m:
        raise DataError(f"label length {labels.m} != graph size {G.m}")
    u = utility_from_config(cfg)
    u.validate_shape()

    warnings: list[str] = []
    s = cfg.budget
    if s > G.m:
        warnings.append(f"budget {s} exceeds population {G.m}; clamped to {G.m}")
        s = G.m

    state = SelectionState(m=G.m, budget=s)
    gains: list[float] = []
    trace: list[float] = []
    wall_times: list[float] = []

    # wall_times cover only the algorithmic pick + accumulator update;
    # the objective trace is diagnostic bookkeeping and stays untimed.
    def on_pick(x: int, g: float) -> None:
        gains.append(g)
        trace.append(float(u(state.cn).sum()))

    if cfg.balanced:
        class_members = [
            np.flatnonzero(labels.values == j) for j in range(labels.class_count)
        ]
        while len(state.selected) < s:
            progressed = False
            for members in class_members:
                if len(state.selected) >= s:
                    break
                if not np.any(~state.selected_mask[members]):
                    continue  # class exhausted; keep cycling the others
                t0 = time.perf_counter()
                if cfg.rule == "surrogate":
                    x, g = _argmax_surrogate(state, C, u, members)
                else:
                    x, g = _argmax_exact(G, C, state, u, members)
                state.add(x, G, C)
                wall_times.append(time.perf_counter() - t0)
                on_pick(x, g)
                progressed = True
            if not progressed:
                break
    elif cfg.rule == "surrogate":
        conf = C.values
        cn = state.cn
        mask = state.selected_mask
        indptr, indices, weights = G.indptr, G.indices, G.weights
        buf = np.empty(G.m, dtype=np.float64)
        ucn = np.empty(G.m, dtype=np.float64)
        perf = time.perf_counter
        while len(state.selected) < s:
            t0 = perf()
            np.add(cn, conf, out=buf)
            u.into(buf, buf)
            u.into(cn, ucn)
            np.subtract(buf, ucn, out=buf)
            buf[mask] = -np.inf
            x = int(np.argmax(buf))  # first max: lowest index
            lo, hi = indptr[x], indptr[x + 1]
            cn[indices[lo:hi]] += weights[lo:hi].astype(np.float64) * conf[x]
            mask[x] = True
            wall_times.append(perf() - t0)
            state.selected.append(x)
            gains.append(float(buf[x]))
            trace.append(float(u(cn).sum()))
    elif cfg.rule == "exact":
        while len(state.selected) < s:
            t0 = time.perf_counter()
            x, g = _argmax_exact(G, C, state, u)
            state.add(x, G, C)
            wall_times.append(time.perf_counter() - t0)
            on_pick(x, g)
    else:  # lazy
        def lazy_pick(x: int, g: float) -> None:
            state.add(x, G, C)
            on_pick(x, g)

        t0 = time.perf_counter()
        _select_lazy(G, C, state, u, s, lazy_pick)
        wall_times = [(time.perf_counter() - t0) / max(len(state.selected), 1)] * len(
            state.selected
        )

    return SelectionResult(
        order=list(state.selected),
        gains=gains,
        objective_trace=trace,
        wall_times=wall_times,
        config=cfg,
        warnings=warnings,
    )


def select_streaming(E, C: ConfidenceVector, cfg: SelectionConfig) -> SelectionResult:
    """Graph-free surrogate selection: each pick rescans similarities to
    the chosen example on the fly (O(m d) per step), so no neighborhood
    graph is ever built. Produces the same order as rule='surrogate'
    with a prebuilt graph at the same tau; used by the scaling bench,
    where per-step cost is the quantity under test.
    """
    from .simgraph import unit_rows

    if cfg.rule != "surrogate" or cfg.balanced:
        raise ConfigError("streaming selection supports only the plain surrogate rule")
    if C.m != E.m:
        raise DataError(f"confidence length {C.m} != population {E.m}")
    u = utility_from_config(cfg)
    u.validate_shape()

    warnings: list[str] = []
    s = cfg.budget
    if s > E.m:
        warnings.append(f"budget {s} exceeds population {E.m}; clamped to {E.m}")
        s = E.m

    U = unit_rows(E)
    m = E.m
    tau = cfg.tau
    conf = C.values
    cn = np.zeros(m, dtype=np.float64)
    mask = np.zeros(m, dtype=bool)
    order: list[int] = []
    gains: list[float] = []
    trace: list[float] = []
    wall_times: list[float] = []
    buf = np.empty(m, dtype=np.float64)
    ucn = np.empty(m, dtype=np.float64)
    perf = time.perf_counter
    while len(order) < s:
        t0 = perf()
        np.add(cn, conf, out=buf)
        u.into(buf, buf)
        u.into(cn, ucn)
        np.subtract(buf, ucn, out=buf)
        buf[mask] = -np.inf
        x = int(np.argmax(buf))
        g = float(buf[x])
        sims = U @ U[x]
        np.clip(sims, -1.0, 1.0, out=sims)
        sims[x] = 1.0
        w = sims.astype(np.float32)  # same quantization as the graph path
        w64 = w.astype(np.float64)
        w64[w < tau] = 0.0
        cn += w64 * conf[x]
        mask[x] = True
        wall_times.append(perf() - t0)
        order.append(x)
        gains.append(g)
        trace.append(float(u(cn).sum()))
    return SelectionResult(
        order=order,
        gains=gains,
        objective_trace=trace,
        wall_times=wall_times,
        config=cfg,
        warnings=warnings,
    )


@dataclass(frozen=True)
class SubsetReport:
    size: int
    objective: float
    cn_min: float
    cn_mean: float
    cn_max: float
    coverage: float
    noise_ratio: float | None = None

    def to_dict(self) -> dict:
        d = {
            "size": self.size,
            "objective": self.objective,
            "cn_min": self.cn_min,
            "cn_mean": self.cn_mean,
            "cn_max": self.cn_max,
            "coverage": self.coverage,
        }
        if self.noise_ratio is not None:
            d["noise_ratio"] = self.noise_ratio
        return d


def evaluate_subset(
    G: NeighborGraph,
    C: ConfidenceVector,
    S,
    u: Utility,
    noise_flags: NoiseFlagVector | None = None,
) -> SubsetReport:
    """Objective, accumulator distribution, coverage, and (when flags
    are supplied) the fraction of selected examples that are noisy."""
    idx = _check_subset(G.m, S)
    cn = recompute_cn(G, C, idx)
    noise_ratio = None
    if noise_flags is not None:
        if noise_flags.m != G.m:
            raise DataError("noise-flag length mismatch")
        noise_ratio = (
            float(noise_flags.values[idx].sum()) / len(idx) if idx else 0.0
        )
    return SubsetReport(
        size=len(idx),
        objective=float(u(cn).sum()),
        cn_min=float(cn.min()),
        cn_mean=float(cn.mean()),
        cn_max=float(cn.max()),
        coverage=float((cn > 0.0).mean()),
        noise_ratio=noise_ratio,
    )
