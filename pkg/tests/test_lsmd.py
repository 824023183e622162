import logging

import numpy as np
import pytest

from motion_lsmd import errors
from motion_lsmd.ingest import ProposalSet
from motion_lsmd.lsmd import (
    IndexTree,
    LsmdParams,
    activity_scores,
    build_index_tree,
    clustering_points,
    decompose,
    kmeans,
    motion_prior,
    nuclear_norm,
    prox_nuclear,
    prox_tree_norm,
    tree_norm,
    uniform_weights,
)

from oracles import (
    nuclear_objective,
    optimal_sse_partition,
    partition_of,
    prox_nuclear_oracle,
    prox_tree_oracle,
    tree_objective,
)


def check_tree_invariants(tree: IndexTree, n: int):
    root = tree.node(tree.root)
    assert sorted(root.members.tolist()) == list(range(n))
    assert sum(1 for nd in tree.nodes if nd.parent is None) == 1
    for node in tree.nodes:
        assert len(node.children) <= tree.k
        if node.children:
            child_members = np.concatenate([tree.node(c).members for c in node.children])
            assert sorted(child_members.tolist()) == sorted(node.members.tolist())
            assert len(set(child_members.tolist())) == len(child_members)
        else:
            assert len(node.members) < tree.k or node.indivisible


def random_tree(seed, n=10, dim=2, k=4):
    rng = np.random.default_rng(seed)
    pts = rng.random((n, dim)) * 10
    return build_index_tree(pts, k=k, seed=seed), pts


# ---------------------------------------------------------------------------
# k-means
# ---------------------------------------------------------------------------

class TestKmeans:
    def test_two_separated_pairs(self):
        pts = np.array([[0.0, 0.0], [0.2, 0.0], [8.0, 8.0], [8.2, 8.0]])
        assign = kmeans(pts, 2, seed=42)
        _sse, best = optimal_sse_partition(pts, 2)
        assert partition_of(assign) == best

    def test_identical_points_indivisible(self):
        assert kmeans(np.ones((5, 3)), 4, seed=0) is None

    def test_k_exceeding_distinct_points(self):
        pts = np.array([[0.0], [0.0], [1.0]])
        assert kmeans(pts, 3, seed=0) is None

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        pts = rng.random((30, 3))
        a1 = kmeans(pts, 4, seed=9)
        a2 = kmeans(pts, 4, seed=9)
        assert np.array_equal(a1, a2)

    def test_no_empty_clusters(self):
        rng = np.random.default_rng(6)
        for seed in range(20):
            pts = rng.random((12, 2))
            assign = kmeans(pts, 4, seed=seed)
            assert set(assign.tolist()) == {0, 1, 2, 3}

    def test_k_below_two_rejected(self):
        with pytest.raises(ValueError):
            kmeans(np.zeros((3, 2)), 1, seed=0)


# ---------------------------------------------------------------------------
# index tree
# ---------------------------------------------------------------------------

class TestBuildIndexTree:
    def test_three_points_single_leaf(self):
        tree, _ = random_tree(0, n=3)
        assert len(tree.nodes) == 1
        assert tree.node(0).is_leaf

    def test_branching_at_most_four(self):
        for seed in range(10):
            tree, pts = random_tree(seed, n=40, dim=3)
            assert all(len(nd.children) <= 4 for nd in tree.nodes)

    def test_four_separated_pairs(self):
        base = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]])
        pts = np.vstack([base, base + [0.3, 0.0]])
        tree = build_index_tree(pts, k=4, seed=1)
        root = tree.node(0)
        assert len(root.children) == 4
        got = frozenset(
            frozenset(tree.node(c).members.tolist()) for c in root.children
        )
        _sse, best = optimal_sse_partition(pts, 4)
        assert got == best
        assert all(tree.node(c).is_leaf for c in root.children)

    def test_partition_invariants_random(self):
        for seed in range(100):
            n = 1 + seed % 37
            tree, _ = random_tree(seed, n=n)
            check_tree_invariants(tree, n)

    def test_determinism(self):
        tree1, pts = random_tree(3, n=25)
        tree2 = build_index_tree(pts, k=4, seed=3)
        for a, b in zip(tree1.nodes, tree2.nodes):
            assert a.id == b.id and a.parent == b.parent
            assert np.array_equal(a.members, b.members)

    def test_depth_bound_logged_not_failed(self, caplog):
        # sanity bound: depth <= ceil(log4 n) + 2 for general-position points
        for seed in range(20):
            n = 20 + seed
            tree, _ = random_tree(seed, n=n)
            bound = int(np.ceil(np.log(n) / np.log(4))) + 2
            if tree.depth() > bound:
                logging.getLogger("motion_lsmd.tests").warning(
                    "tree depth %d exceeds sanity bound %d for n=%d",
                    tree.depth(), bound, n,
                )

    def test_duplicated_points_terminate(self):
        pts = np.zeros((17, 2))
        tree = build_index_tree(pts, k=4, seed=0)
        assert tree.node(0).indivisible
        check_tree_invariants(tree, 17)

    def test_clustering_points_layout(self):
        from motion_lsmd.ingest import FeatureMatrix

        fm = FeatureMatrix(data=np.eye(3), coords=[(0, 0), (5, 10), (10, 20)])
        pts = clustering_points(fm, height=10, width=20)
        assert pts.shape == (3, 5)
        assert np.allclose(pts[1][:2], [0.5, 0.5])


# ---------------------------------------------------------------------------
# norms and proximal operators
# ---------------------------------------------------------------------------

class TestTreeNorm:
    def test_zero(self):
        tree, _ = random_tree(1, n=6)
        assert tree_norm(np.zeros((4, 6)), tree, uniform_weights(tree)) == 0.0

    def test_single_leaf_is_frobenius(self):
        tree = build_index_tree(np.zeros((3, 1)), k=4, seed=0)
        S = np.random.default_rng(0).standard_normal((5, 3))
        assert np.isclose(tree_norm(S, tree, uniform_weights(tree)), np.linalg.norm(S))

    def test_positive_homogeneity(self):
        tree, _ = random_tree(2, n=9)
        S = np.random.default_rng(1).standard_normal((4, 9))
        w = uniform_weights(tree)
        assert np.isclose(tree_norm(2 * S, tree, w), 2 * tree_norm(S, tree, w))

    def test_shape_mismatch(self):
        tree, _ = random_tree(3, n=5)
        with pytest.raises(errors.ShapeMismatch):
            tree_norm(np.zeros((2, 4)), tree, uniform_weights(tree))


class TestProxTreeNorm:
    def test_tau_zero_identity(self):
        tree, _ = random_tree(4, n=6)
        S = np.random.default_rng(2).standard_normal((3, 6))
        out = prox_tree_norm(S, tree, uniform_weights(tree), 0.0, 0.0)
        assert np.array_equal(out, S)

    def test_single_group_shrinkage(self):
        tree = build_index_tree(np.zeros((3, 1)), k=4, seed=0)
        S = np.random.default_rng(3).standard_normal((4, 3))
        S *= 5.0 / np.linalg.norm(S)
        out = prox_tree_norm(S, tree, uniform_weights(tree), 1.0, 0.0)
        assert np.allclose(out, S * (4.0 / 5.0))

    def test_matches_numeric_oracle(self):
        rng = np.random.default_rng(5)
        for seed in range(20):
            n = int(rng.integers(4, 8))
            tree, _ = random_tree(seed, n=n, k=3)
            w = uniform_weights(tree)
            S = rng.standard_normal((3, n))
            tau = float(rng.uniform(0.2, 1.0))
            lam = float(rng.choice([0.0, 0.3]))
            got = prox_tree_norm(S, tree, w, tau, lam)
            want = prox_tree_oracle(S, tree, w, tau, lam)
            assert np.abs(got - want).max() <= 1e-6
            gap = abs(
                tree_objective(got, S, tree, w, tau, lam)
                - tree_objective(want, S, tree, w, tau, lam)
            )
            assert gap <= 1e-5

    def test_non_expansive(self):
        tree, _ = random_tree(6, n=7)
        w = uniform_weights(tree)
        rng = np.random.default_rng(7)
        for _ in range(100):
            A = rng.standard_normal((4, 7))
            B = rng.standard_normal((4, 7))
            pa = prox_tree_norm(A, tree, w, 0.5, 0.1)
            pb = prox_tree_norm(B, tree, w, 0.5, 0.1)
            assert np.linalg.norm(pa - pb) <= np.linalg.norm(A - B) + 1e-12

    def test_negative_tau(self):
        tree, _ = random_tree(8, n=4)
        with pytest.raises(errors.NegativeTau):
            prox_tree_norm(np.zeros((2, 4)), tree, uniform_weights(tree), -1.0)


class TestProxNuclear:
    def test_tau_zero_identity(self):
        M = np.random.default_rng(8).standard_normal((4, 5))
        assert np.allclose(prox_nuclear(M, 0.0), M, atol=1e-9)

    def test_diagonal_example(self):
        out = prox_nuclear(np.diag([3.0, 1.0]), 1.0)
        assert np.allclose(out, np.diag([2.0, 0.0]), atol=1e-12)

    def test_matches_numeric_oracle(self):
        # contract tolerance is the 1e-5 objective gap; the point check is
        # a sanity bound at the oracle's own smoothing accuracy
        rng = np.random.default_rng(9)
        for _ in range(20):
            m, n = int(rng.integers(2, 5)), int(rng.integers(2, 5))
            V = rng.standard_normal((m, n))
            tau = float(rng.uniform(0.2, 1.5))
            got = prox_nuclear(V, tau)
            want = prox_nuclear_oracle(V, tau)
            assert abs(nuclear_objective(got, V, tau) - nuclear_objective(want, V, tau)) <= 1e-5
            assert np.abs(got - want).max() <= 1e-5

    def test_non_expansive(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            A = rng.standard_normal((3, 4))
            B = rng.standard_normal((3, 4))
            assert np.linalg.norm(prox_nuclear(A, 0.7) - prox_nuclear(B, 0.7)) <= np.linalg.norm(
                A - B
            ) + 1e-12

    def test_non_finite(self):
        M = np.zeros((2, 2))
        M[0, 0] = np.inf
        with pytest.raises(errors.NonFiniteInput):
            prox_nuclear(M, 0.1)


# ---------------------------------------------------------------------------
# decomposition
# ---------------------------------------------------------------------------

class TestDecompose:
    def test_zero_input(self):
        tree, _ = random_tree(11, n=8)
        dec = decompose(np.zeros((6, 8)), tree, uniform_weights(tree))
        assert np.all(dec.L == 0.0) and np.all(dec.S == 0.0)
        assert dec.converged

    def test_huge_mu_s_limit(self):
        tree, _ = random_tree(12, n=8)
        F = np.random.default_rng(12).standard_normal((6, 8))
        dec = decompose(F, tree, uniform_weights(tree), LsmdParams(mu_L=0.5, mu_S=1e6))
        assert np.all(dec.S == 0.0)
        assert np.allclose(dec.L, prox_nuclear(F, 0.5))

    def test_trace_non_increasing(self):
        tree, _ = random_tree(13, n=12)
        F = np.random.default_rng(13).standard_normal((10, 12))
        dec = decompose(F, tree, uniform_weights(tree))
        trace = np.array(dec.objective_trace)
        assert np.all(np.diff(trace) <= 1e-9 * np.maximum(1.0, np.abs(trace[:-1])))

    def test_non_convergence_flagged_not_raised(self):
        tree, _ = random_tree(14, n=10)
        F = np.random.default_rng(14).standard_normal((8, 10))
        dec = decompose(F, tree, uniform_weights(tree), LsmdParams(max_iter=1, rel_tol=1e-300))
        assert dec.iterations == 1
        assert not dec.converged

    def test_shape_mismatch(self):
        tree, _ = random_tree(15, n=5)
        with pytest.raises(errors.ShapeMismatch):
            decompose(np.zeros((4, 9)), tree, uniform_weights(tree))

    def test_recovers_planted_structure(self):
        rng = np.random.default_rng(16)
        d, n = 64, 100
        tree = build_index_tree(rng.random((n, 2)) * 10, k=4, seed=16)
        leaves = [nd for nd in tree.leaves() if len(nd.members) >= 2]
        cols = np.concatenate([nd.members for nd in leaves[:5]])
        L0 = 2.0 * rng.standard_normal((d, 2)) @ rng.standard_normal((2, n))
        S0 = np.zeros((d, n))
        S0[:, cols] = rng.choice([-1.0, 1.0], size=(d, len(cols)))
        dec = decompose(L0 + S0, tree, uniform_weights(tree))
        assert np.linalg.norm(dec.L - L0) / np.linalg.norm(L0) <= 0.05
        est = np.abs(dec.S) > 1e-6
        true = np.abs(S0) > 0
        tp = np.sum(est & true)
        f1 = 2 * tp / max(2 * tp + np.sum(est & ~true) + np.sum(~est & true), 1)
        assert f1 >= 0.9


# ---------------------------------------------------------------------------
# activity scores
# ---------------------------------------------------------------------------

def make_proposals(patches):
    return ProposalSet(patches=patches, coords=[(1, 1 + i) for i in range(len(patches))])


class TestActivityScores:
    def test_zero_sparse_part(self):
        props = make_proposals([np.ones((2, 2))] * 3)
        scores = activity_scores(np.zeros((4, 3)), props, np.ones(3))
        assert np.all(scores == 0.0)

    def test_single_nonzero_column_wins(self):
        props = make_proposals([np.ones((2, 2))] * 4)
        S = np.zeros((4, 4))
        S[:, 2] = 1.0
        scores = activity_scores(S, props, np.ones(4))
        assert np.argmax(scores) == 2
        assert np.sum(scores > 0) == 1

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(17)
        patches = [rng.random((2, 2)) for _ in range(5)]
        S = rng.standard_normal((4, 5))
        prior = rng.random(5)
        base = activity_scores(S, make_proposals(patches), prior)
        perm = rng.permutation(5)
        shuffled = activity_scores(
            S[:, perm], make_proposals([patches[i] for i in perm]), prior[perm]
        )
        assert np.allclose(shuffled, base[perm])

    def test_shape_mismatch(self):
        props = make_proposals([np.ones((2, 2))] * 3)
        with pytest.raises(errors.ShapeMismatch):
            activity_scores(np.zeros((4, 2)), props, np.ones(3))

    def test_motion_prior_max_normalized(self):
        props = make_proposals([np.full((2, 2), 0.2), np.full((2, 2), 0.8)])
        prior = motion_prior(props)
        assert np.allclose(prior, [0.25, 1.0])

    def test_motion_prior_all_zero_uniform(self):
        props = make_proposals([np.zeros((2, 2))] * 3)
        assert np.array_equal(motion_prior(props), np.ones(3))
