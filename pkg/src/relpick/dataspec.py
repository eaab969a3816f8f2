"""Core domain types, validation, and file ingestion/persistence.

All array-backed types are immutable after construction (the underlying
numpy buffers are marked read-only) and therefore safe to share across
threads.

Binary matrix format: 8-byte magic ``RELPICK1``, then u64 row count,
u64 column count, then rows*cols little-endian float32 values row-major.
Vectors reuse the same container with a single column.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, FormatError

MATRIX_MAGIC = b"RELPICK1"

# Ingested confidences may carry float noise; values this far outside
# [0, 1] are clamped, anything worse is rejected.
CONFIDENCE_SLACK = 1e-6

UTILITY_KINDS = ("tanh", "identity", "piecewise")
SELECTION_RULES = ("surrogate", "exact", "lazy")


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Dense m x d matrix of per-example representations (float32)."""

    data: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise DataError(f"embedding matrix must be 2-D and non-empty, got shape {data.shape}")
        if not np.isfinite(data).all():
            raise DataError("embedding matrix contains non-finite values")
        if self.normalized:
            norms = np.linalg.norm(data.astype(np.float64), axis=1)
            bad = np.flatnonzero(np.abs(norms - 1.0) > 1e-6)
            if bad.size:
                raise DataError(
                    f"normalized flag set but row {bad[0]} has L2 norm {norms[bad[0]]:.8f}"
                )
        object.__setattr__(self, "data", _freeze(data))

    @property
    def m(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class ConfidenceVector:
    """Per-example prediction confidence from a warm-up classifier, in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size < 1:
            raise DataError("confidence vector must be 1-D and non-empty")
        if not np.isfinite(v).all():
            raise DataError("confidence vector contains non-finite values")
        if v.min() < -CONFIDENCE_SLACK or v.max() > 1.0 + CONFIDENCE_SLACK:
            i = int(np.argmax(np.maximum(-v, v - 1.0)))
            raise DataError(f"confidence value out of [0,1] at index {i}: {v[i]}")
        v = np.clip(v, 0.0, 1.0)
        object.__setattr__(self, "values", _freeze(v))

    @property
    def m(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class ProbabilityMatrix:
    """m x c softmax outputs; every row sums to 1 within 1e-5."""

    data: np.ndarray

    def __post_init__(self):
        p = np.ascontiguousarray(self.data, dtype=np.float64)
        if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] < 1:
            raise DataError("probability matrix must be 2-D and non-empty")
        if not np.isfinite(p).all():
            raise DataError("probability matrix contains non-finite values")
        if p.min() < -CONFIDENCE_SLACK or p.max() > 1.0 + CONFIDENCE_SLACK:
            raise DataError("probability values must lie in [0,1]")
        sums = p.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > 1e-5)
        if bad.size:
            raise DataError(f"probability row {bad[0]} sums to {sums[bad[0]]:.8f}, not 1")
        object.__setattr__(self, "data", _freeze(np.clip(p, 0.0, 1.0)))

    @property
    def m(self) -> int:
        return self.data.shape[0]

    @property
    def c(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class LabelVector:
    """Per-example (possibly noisy) class ids in [0, class_count)."""

    values: np.ndarray
    class_count: int

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.int64)
        if v.ndim != 1 or v.size < 1:
            raise DataError("label vector must be 1-D and non-empty")
        if self.class_count < 1:
            raise DataError("class_count must be >= 1")
        if v.min() < 0 or v.max() >= self.class_count:
            raise DataError(
                f"label ids must lie in [0, {self.class_count}), got range "
                f"[{v.min()}, {v.max()}]"
            )
        object.__setattr__(self, "values", _freeze(v))

    @property
    def m(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class NoiseFlagVector:
    """Ground-truth noisy/clean flags; diagnostic input for test settings."""

    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=bool)
        if v.ndim != 1 or v.size < 1:
            raise DataError("noise-flag vector must be 1-D and non-empty")
        object.__setattr__(self, "values", _freeze(v))

    @property
    def m(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class SelectionConfig:
    """Configuration for one selection run.

    ``rule`` picks the greedy criterion: ``surrogate`` is the cheap
    per-candidate self-gain, ``exact`` the true objective marginal, and
    ``lazy`` a priority-queue variant of ``exact`` with identical output.
    Ties always break toward the lowest index.
    """

    budget: int
    tau: float = 0.975
    utility: str = "tanh"
    rule: str = "surrogate"
    balanced: bool = False
    seed: int = 0
    utility_knots: tuple | None = None

    def __post_init__(self):
        if self.budget < 1:
            raise ConfigError(f"budget must be >= 1, got {self.budget}")
        if not (0.0 < self.tau <= 1.0):
            raise ConfigError(f"tau must lie in (0, 1], got {self.tau}")
        if self.utility not in UTILITY_KINDS:
            raise ConfigError(f"unknown utility {self.utility!r}, expected one of {UTILITY_KINDS}")
        if self.rule not in SELECTION_RULES:
            raise ConfigError(f"unknown rule {self.rule!r}, expected one of {SELECTION_RULES}")
        if self.utility == "piecewise" and not self.utility_knots:
            raise ConfigError("piecewise utility requires utility_knots")

    def to_dict(self) -> dict:
        d = {
            "budget": self.budget,
            "tau": self.tau,
            "utility": self.utility,
            "rule": self.rule,
            "balanced": self.balanced,
            "seed": self.seed,
        }
        if self.utility_knots is not None:
            d["utility_knots"] = [list(k) for k in self.utility_knots]
        return d


@dataclass(frozen=True)
class SelectionResult:
    """Ordered selection with per-step diagnostics."""

    order: list[int]
    gains: list[float]
    objective_trace: list[float]
    wall_times: list[float]
    config: SelectionConfig
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        if len(set(self.order)) != len(self.order):
            raise DataError("selection order contains duplicate indices")
        trace = np.asarray(self.objective_trace)
        if trace.size and np.any(np.diff(trace) < -1e-9):
            raise DataError("objective trace must be non-decreasing")

    def to_json(self) -> str:
        payload = {
            "schema": 1,
            "order": [int(i) for i in self.order],
            "gains": [float(g) for g in self.gains],
            "objective_trace": [float(v) for v in self.objective_trace],
            "wall_times": [float(t) for t in self.wall_times],
            "config": self.config.to_dict(),
            "warnings": list(self.warnings),
        }
        return json.dumps(payload, sort_keys=True, indent=2)


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------

def write_matrix_binary(path: str | Path, data: np.ndarray) -> None:
    a = np.ascontiguousarray(data, dtype="<f4")
    if a.ndim != 2:
        raise DataError("binary matrix writer expects a 2-D array")
    with open(path, "wb") as f:
        f.write(MATRIX_MAGIC)
        f.write(struct.pack("<QQ", a.shape[0], a.shape[1]))
        f.write(a.tobytes())


def read_matrix_binary(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 24 or raw[:8] != MATRIX_MAGIC:
        raise FormatError(f"{path}: missing or corrupt matrix header")
    m, d = struct.unpack("<QQ", raw[8:24])
    payload = raw[24:]
    expected = m * d * 4
    if len(payload) != expected:
        raise FormatError(
            f"{path}: header says {m}x{d} ({expected} payload bytes) but file has {len(payload)}"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(m, d).copy()


def read_matrix_csv(path: str | Path) -> np.ndarray:
    rows = []
    width = None
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = [float(tok) for tok in line.split(",")]
            except ValueError as e:
                raise FormatError(f"{path}:{lineno}: {e}") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise FormatError(
                    f"{path}:{lineno}: expected {width} columns, got {len(row)}"
                )
            rows.append(row)
    if not rows:
        raise FormatError(f"{path}: empty CSV matrix")
    return np.asarray(rows, dtype=np.float32)


def read_vector_text(path: str | Path) -> np.ndarray:
    values = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                values.append(float(line))
            except ValueError as e:
                raise FormatError(f"{path}:{lineno}: {e}") from None
    if not values:
        raise FormatError(f"{path}: empty vector file")
    return np.asarray(values, dtype=np.float64)


def write_vector_text(path: str | Path, values: np.ndarray) -> None:
    with open(path, "w") as f:
        for v in np.asarray(values).ravel():
            f.write(f"{float(v)!r}\n")


def write_vector_binary(path: str | Path, values: np.ndarray) -> None:
    write_matrix_binary(path, np.asarray(values, dtype=np.float32).reshape(-1, 1))


def read_vector_binary(path: str | Path) -> np.ndarray:
    a = read_matrix_binary(path)
    if a.shape[1] != 1:
        raise FormatError(f"{path}: expected a single-column vector, got {a.shape[1]} columns")
    return a[:, 0].astype(np.float64)


def _mean_rows(data: np.ndarray, k: int) -> np.ndarray:
    m, d = data.shape
    if m % k != 0:
        raise DataError(f"row count {m} not divisible by group size {k}")
    grouped = data.astype(np.float64).reshape(m // k, k, d).mean(axis=1)
    norms = np.linalg.norm(grouped, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise DataError(f"group {zero[0]} averages to a zero vector; cannot normalize")
    return (grouped / norms[:, None]).astype(np.float32)


def ingest_embeddings(
    path: str | Path,
    format: str = "binary",
    average_groups: int | None = None,
) -> EmbeddingMatrix:
    """Load an embedding matrix, optionally mean-reducing groups of
    ``average_groups`` consecutive rows (one group per example, e.g.
    multiple augmentation embeddings) and unit-normalizing the result.
    """
    if format == "binary":
        data = read_matrix_binary(path)
    elif format == "csv":
        data = read_matrix_csv(path)
    else:
        raise ConfigError(f"unknown embedding format {format!r}")
    if not np.isfinite(data).all():
        raise DataError(f"{path}: embedding file contains non-finite values")
    if average_groups is not None:
        if average_groups < 1:
            raise ConfigError("average_groups must be >= 1")
        data = _mean_rows(data, average_groups)
        return EmbeddingMatrix(data, normalized=True)
    return EmbeddingMatrix(data, normalized=False)


def load_confidences(path: str | Path, format: str = "text") -> ConfidenceVector:
    if format == "text":
        return ConfidenceVector(read_vector_text(path))
    if format == "binary":
        return ConfidenceVector(read_vector_binary(path))
    raise ConfigError(f"unknown vector format {format!r}")


def load_labels(path: str | Path, class_count: int | None = None) -> LabelVector:
    raw = read_vector_text(path)
    ids = raw.astype(np.int64)
    if np.any(ids != raw):
        raise DataError(f"{path}: labels must be integers")
    c = class_count if class_count is not None else int(ids.max()) + 1
    return LabelVector(ids, class_count=c)


def load_noise_flags(path: str | Path) -> NoiseFlagVector:
    raw = read_vector_text(path)
    if not np.isin(raw, (0.0, 1.0)).all():
        raise DataError(f"{path}: noise flags must be 0 or 1")
    return NoiseFlagVector(raw.astype(bool))


def confidence_from_probs(P: ProbabilityMatrix, metric: str = "maxprob") -> ConfidenceVector:
    """Collapse softmax rows to a single confidence per example.

    ``maxprob`` takes the top probability; ``diffprob`` the gap between
    the top two (requires at least two classes).
    """
    if metric == "maxprob":
        return ConfidenceVector(P.data.max(axis=1))
    if metric == "diffprob":
        if P.c < 2:
            raise ConfigError("diffprob needs at least 2 classes")
        top2 = np.sort(P.data, axis=1)[:, -2:]
        return ConfidenceVector(top2[:, 1] - top2[:, 0])
    raise ConfigError(f"unknown confidence metric {metric!r}")
