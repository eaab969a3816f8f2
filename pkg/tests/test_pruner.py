import math

import numpy as np
import pytest

from relpick import (
    ConfidenceVector,
    ConfigError,
    DataError,
    EmbeddingMatrix,
    SelectionConfig,
    SelectionState,
    Utility,
    build_graph,
    evaluate_subset,
    exact_gain,
    objective,
    select,
    surrogate_gain,
)
from relpick import NoiseFlagVector, LabelVector
from relpick.pruner import recompute_cn
from relpick import oracle

from conftest import random_unit_rows


def make_state(G, C, S=()):
    st = SelectionState(m=G.m, budget=G.m)
    for x in S:
        st.add(x, G, C)
    return st


class TestUtility:
    def test_tanh_contract(self):
        u = Utility.tanh()
        u.validate_shape()
        grid = np.linspace(0.0, 5.0, 200)
        vals = u(grid)
        assert vals[0] == 0.0
        assert np.all(np.diff(vals) > 0)          # strictly increasing
        assert np.all(np.diff(np.diff(vals)) < 0)  # strictly concave

    def test_identity_is_valid(self):
        Utility.identity().validate_shape()

    def test_piecewise_valid(self):
        u = Utility.piecewise([(0, 0), (1, 0.8), (2, 1.2), (4, 1.5)])
        assert u(0.5) == pytest.approx(0.4)
        assert u(10.0) == pytest.approx(1.5)  # constant past last knot

    def test_piecewise_must_start_at_origin(self):
        with pytest.raises(ConfigError):
            Utility.piecewise([(0, 0.1), (1, 0.5)])

    def test_piecewise_non_concave_rejected(self):
        with pytest.raises(ConfigError):
            Utility.piecewise([(0, 0), (1, 0.1), (2, 1.0)])

    def test_piecewise_decreasing_rejected(self):
        with pytest.raises(ConfigError):
            Utility.piecewise([(0, 0), (1, 1.0), (2, 0.5)])


class TestObjective:
    def test_empty_subset_is_zero(self, orthogonal3):
        _, C, G = orthogonal3
        assert objective(G, C, [], Utility.tanh()) == 0.0

    def test_single_example_tanh(self):
        E = EmbeddingMatrix(np.array([[1.0]]), normalized=True)
        G = build_graph(E, 0.5)
        C = ConfidenceVector([1.0])
        assert objective(G, C, [0], Utility.tanh()) == pytest.approx(math.tanh(1.0), abs=1e-12)

    def test_two_identical_rows_identity(self, identical2):
        _, C, G = identical2
        assert objective(G, C, [0], Utility.identity()) == pytest.approx(1.0, abs=1e-12)

    def test_duplicate_index_rejected(self, identical2):
        _, C, G = identical2
        with pytest.raises(DataError):
            objective(G, C, [0, 0], Utility.tanh())

    def test_out_of_range_rejected(self, identical2):
        _, C, G = identical2
        with pytest.raises(DataError):
            objective(G, C, [5], Utility.tanh())


class TestGains:
    def test_surrogate_fresh_state(self, orthogonal3):
        _, _, G = orthogonal3
        C = ConfidenceVector([0.8, 0.5, 0.1])
        st = make_state(G, C)
        assert surrogate_gain(st, C, 0, Utility.tanh()) == pytest.approx(math.tanh(0.8), abs=1e-12)

    def test_surrogate_zero_confidence(self, orthogonal3):
        _, _, G = orthogonal3
        C = ConfidenceVector([0.0, 0.5, 0.1])
        st = make_state(G, C, S=[1])
        assert surrogate_gain(st, C, 0, Utility.tanh()) == 0.0

    def test_surrogate_identity_midway(self, identical2):
        _, C, G = identical2
        st = make_state(G, C, S=[1])  # cn[0] = 0.5 via the cross edge
        assert st.cn[0] == pytest.approx(0.5)
        assert surrogate_gain(st, C, 0, Utility.identity()) == pytest.approx(0.5, abs=1e-12)

    def test_surrogate_rejects_selected(self, identical2):
        _, C, G = identical2
        st = make_state(G, C, S=[0])
        with pytest.raises(DataError):
            surrogate_gain(st, C, 0, Utility.tanh())

    def test_exact_equals_surrogate_when_isolated(self, orthogonal3):
        _, _, G = orthogonal3
        C = ConfidenceVector([0.8, 0.5, 0.1])
        st = make_state(G, C)
        e = exact_gain(G, C, st, 0, Utility.tanh())
        assert e == pytest.approx(math.tanh(0.8), abs=1e-12)
        assert e == pytest.approx(surrogate_gain(st, C, 0, Utility.tanh()), abs=1e-12)

    def test_exact_two_identical_rows(self, identical2):
        _, C, G = identical2
        st = make_state(G, C)
        assert exact_gain(G, C, st, 0, Utility.identity()) == pytest.approx(1.0, abs=1e-12)

    def test_exact_gain_matches_objective_marginal(self):
        rng = np.random.default_rng(21)
        for seed in range(20):
            E, C, _, _ = oracle.random_instance(seed, m=30, d=6, c=3, cluster_spread=0.4)
            G = build_graph(E, 0.5)
            u = Utility.tanh()
            S = list(rng.choice(30, size=rng.integers(0, 10), replace=False))
            st = make_state(G, C, S)
            base = objective(G, C, S, u)
            for x in range(30):
                if x in S:
                    continue
                marginal = objective(G, C, S + [x], u) - base
                assert exact_gain(G, C, st, x, u) == pytest.approx(marginal, abs=1e-9)


class TestMonotoneSubmodular:
    def test_monotonicity_nested_sets(self):
        rng = np.random.default_rng(22)
        u = Utility.tanh()
        for seed in range(30):
            E, C, _, _ = oracle.random_instance(seed, m=25, d=5, c=3, cluster_spread=0.5)
            G = build_graph(E, 0.4)
            big = list(rng.choice(25, size=rng.integers(2, 20), replace=False))
            small = big[: rng.integers(1, len(big))]
            assert objective(G, C, small, u) <= objective(G, C, big, u) + 1e-9

    def test_submodularity_diminishing_returns(self):
        rng = np.random.default_rng(23)
        u = Utility.tanh()
        for seed in range(30):
            E, C, _, _ = oracle.random_instance(seed, m=25, d=5, c=3, cluster_spread=0.5)
            G = build_graph(E, 0.4)
            big = list(rng.choice(25, size=rng.integers(2, 15), replace=False))
            small = big[: rng.integers(1, len(big))]
            outside = [x for x in range(25) if x not in big]
            x = int(rng.choice(outside))
            g_small = exact_gain(G, C, make_state(G, C, small), x, u)
            g_big = exact_gain(G, C, make_state(G, C, big), x, u)
            assert g_small >= g_big - 1e-9


class TestSelect:
    def test_orthogonal_picks_top_confidences(self, orthogonal3):
        _, C, G = orthogonal3
        for rule in ("surrogate", "exact", "lazy"):
            r = select(G, C, None, SelectionConfig(budget=2, tau=0.5, rule=rule))
            assert r.order == [0, 1]

    def test_first_pick_is_argmax_confidence_surrogate(self):
        for seed in range(10):
            E, C, _, _ = oracle.random_instance(seed, m=40, d=6, c=4, cluster_spread=0.3)
            G = build_graph(E, 0.6)
            r = select(G, C, None, SelectionConfig(budget=1, tau=0.6, rule="surrogate"))
            assert r.order[0] == int(np.argmax(C.values))

    def test_identical_pair_trace(self, identical2):
        _, C, G = identical2
        r = select(G, C, None, SelectionConfig(budget=2, tau=0.9, utility="identity", rule="exact"))
        assert r.order == [0, 1]
        assert r.objective_trace == pytest.approx([1.0, 2.0], abs=1e-12)

    def test_lazy_equals_exact(self):
        for seed in range(15):
            E, C, _, _ = oracle.random_instance(seed, m=60, d=8, c=4, cluster_spread=0.3)
            G = build_graph(E, 0.6)
            a = select(G, C, None, SelectionConfig(budget=12, tau=0.6, rule="exact"))
            b = select(G, C, None, SelectionConfig(budget=12, tau=0.6, rule="lazy"))
            assert a.order == b.order

    def test_budget_clamped_with_warning(self, orthogonal3):
        _, C, G = orthogonal3
        r = select(G, C, None, SelectionConfig(budget=10, tau=0.5))
        assert sorted(r.order) == [0, 1, 2]
        assert any("clamped" in w for w in r.warnings)

    def test_balanced_requires_labels(self, orthogonal3):
        _, C, G = orthogonal3
        with pytest.raises(ConfigError):
            select(G, C, None, SelectionConfig(budget=2, tau=0.5, balanced=True))

    def test_balanced_counts_differ_by_at_most_one(self):
        for c in (2, 5):
            E, C, labels, _ = oracle.random_instance(41, m=60, d=6, c=c, cluster_spread=0.3)
            G = build_graph(E, 0.6)
            r = select(G, C, labels, SelectionConfig(budget=23, tau=0.6, balanced=True))
            counts = np.bincount(labels.values[r.order], minlength=c)
            assert counts.max() - counts.min() <= 1

    def test_balanced_exhausted_class_still_meets_budget(self):
        E = EmbeddingMatrix(np.eye(6, dtype=np.float32), normalized=True)
        C = ConfidenceVector(np.linspace(0.9, 0.4, 6))
        labels = LabelVector(np.array([0, 1, 1, 1, 1, 1]), class_count=2)
        G = build_graph(E, 0.5)
        r = select(G, C, labels, SelectionConfig(budget=4, tau=0.5, balanced=True))
        assert len(r.order) == 4

    def test_objective_trace_non_decreasing(self):
        E, C, _, _ = oracle.random_instance(5, m=50, d=6, c=4, cluster_spread=0.3)
        G = build_graph(E, 0.6)
        r = select(G, C, None, SelectionConfig(budget=25, tau=0.6))
        assert np.all(np.diff(r.objective_trace) >= -1e-9)

    def test_accumulator_matches_scratch_recompute(self):
        E, C, _, _ = oracle.random_instance(6, m=50, d=6, c=4, cluster_spread=0.3)
        G = build_graph(E, 0.6)
        st = SelectionState(m=50, budget=50)
        rng = np.random.default_rng(6)
        for x in rng.permutation(50)[:20]:
            st.add(int(x), G, C)
            np.testing.assert_allclose(st.cn, recompute_cn(G, C, st.selected), atol=1e-9)

    def test_streaming_matches_graph_surrogate(self):
        from relpick.pruner import select_streaming

        for seed in range(8):
            E, C, _, _ = oracle.random_instance(seed, m=100, d=8, c=5, cluster_spread=0.3)
            G = build_graph(E, 0.7)
            cfg = SelectionConfig(budget=30, tau=0.7, rule="surrogate")
            assert select_streaming(E, C, cfg).order == select(G, C, None, cfg).order

    def test_streaming_rejects_other_rules(self):
        from relpick.pruner import select_streaming

        E, C, _, _ = oracle.random_instance(0, m=10, d=4, c=2)
        with pytest.raises(ConfigError):
            select_streaming(E, C, SelectionConfig(budget=2, rule="exact"))

    def test_determinism(self):
        E, C, labels, _ = oracle.random_instance(9, m=40, d=6, c=3, cluster_spread=0.3)
        G = build_graph(E, 0.6)
        cfg = SelectionConfig(budget=15, tau=0.6, rule="surrogate")
        a = select(G, C, None, cfg)
        b = select(G, C, None, cfg)
        assert a.order == b.order and a.gains == b.gains
        assert a.objective_trace == b.objective_trace


class TestEvaluateSubset:
    def test_empty_subset(self, orthogonal3):
        _, C, G = orthogonal3
        rep = evaluate_subset(G, C, [], Utility.tanh())
        assert rep.objective == 0.0 and rep.coverage == 0.0

    def test_full_subset_all_noisy(self, orthogonal3):
        _, C, G = orthogonal3
        flags = NoiseFlagVector(np.ones(3, dtype=bool))
        rep = evaluate_subset(G, C, [0, 1, 2], Utility.tanh(), noise_flags=flags)
        assert rep.noise_ratio == 1.0

    def test_identical_pair_coverage(self, identical2):
        _, C, G = identical2
        rep = evaluate_subset(G, C, [0], Utility.tanh())
        assert rep.coverage == 1.0
        assert rep.cn_min == pytest.approx(0.5) and rep.cn_max == pytest.approx(0.5)
