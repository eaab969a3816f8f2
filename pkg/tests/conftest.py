import numpy as np
import pytest

from relpick import ConfidenceVector, EmbeddingMatrix, build_graph


@pytest.fixture
def orthogonal3():
    """Three mutually orthogonal unit rows: the graph is diagonal."""
    E = EmbeddingMatrix(np.eye(3, dtype=np.float32), normalized=True)
    C = ConfidenceVector([0.9, 0.5, 0.1])
    G = build_graph(E, 0.5)
    return E, C, G


@pytest.fixture
def identical2():
    """Two identical rows: cross edges with weight 1."""
    E = EmbeddingMatrix(np.array([[1.0, 0.0], [1.0, 0.0]], dtype=np.float32), normalized=True)
    C = ConfidenceVector([0.5, 0.5])
    G = build_graph(E, 0.9)
    return E, C, G


def random_unit_rows(rng, m, d):
    rows = rng.standard_normal((m, d))
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    return EmbeddingMatrix(rows.astype(np.float32))
