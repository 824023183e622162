"""Low-rank + tree-structured-sparse decomposition of a feature matrix.

The column index tree comes from divisive hierarchical k-means (quad
tree, k = 4). The decomposition alternates two exact proximal steps:
singular value thresholding for the low-rank part and hierarchical
group shrinkage (plus elementwise l1) for the structured sparse part,
so the objective

    0.5 ||F - L - S||_F^2 + mu_L ||L||_* + mu_S Omega(S) + mu_S l1 ||S||_1

is non-increasing by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NegativeTau, NonFiniteInput, ShapeMismatch
from .ingest import FeatureMatrix, ProposalSet
from .sparse import soft_threshold


@dataclass
class TreeNode:
    id: int
    parent: int | None
    children: list[int]
    members: np.ndarray  # column indices, ascending
    depth: int
    indivisible: bool = False

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass
class IndexTree:
    """Hierarchy over feature-matrix columns; ids are breadth-first."""

    nodes: list[TreeNode]
    root: int = 0
    k: int = 4

    def node(self, nid: int) -> TreeNode:
        return self.nodes[nid]

    @property
    def n_columns(self) -> int:
        return len(self.nodes[self.root].members)

    def leaves(self) -> list[TreeNode]:
        return [n for n in self.nodes if n.is_leaf]

    def depth(self) -> int:
        return max(n.depth for n in self.nodes)


TreeWeights = dict[int, float]


def uniform_weights(tree: IndexTree, value: float = 1.0) -> TreeWeights:
    if value <= 0:
        raise ValueError("group weight must be > 0")
    return {n.id: value for n in tree.nodes}


@dataclass
class LsmdParams:
    mu_L: float = 1.0
    mu_S: float = 0.3
    lambda_l1: float = 0.05
    max_iter: int = 200
    rel_tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.mu_L <= 0 or self.mu_S <= 0:
            raise ValueError("mu_L and mu_S must be > 0")
        if self.lambda_l1 < 0:
            raise ValueError("lambda_l1 must be >= 0")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be > 0")


@dataclass
class Decomposition:
    L: np.ndarray
    S: np.ndarray
    objective_trace: list[float]
    iterations: int
    converged: bool


# ---------------------------------------------------------------------------
# divisive hierarchical k-means
# ---------------------------------------------------------------------------

def kmeans(points: np.ndarray, k: int, seed: int = 0) -> np.ndarray | None:
    """Seeded k-means++ plus Lloyd iterations.

    Returns per-point cluster assignments, or None (indivisible) when k
    exceeds the number of distinct points. Nearest-centroid ties break
    toward the lowest centroid index; empty clusters are repaired by
    moving the point farthest from its assigned centroid.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    n = pts.shape[0]
    if n == 0:
        raise ValueError("kmeans needs at least one point")
    if k < 2:
        raise ValueError("k must be >= 2")
    distinct = np.unique(pts, axis=0).shape[0]
    if k > distinct:
        return None

    rng = np.random.default_rng(seed)

    # k-means++ seeding
    centers = np.empty((k, pts.shape[1]))
    centers[0] = pts[rng.integers(n)]
    d2 = np.sum((pts - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # remaining mass is zero; fall back to first unchosen distinct point
            centers[j] = pts[int(np.argmax(d2))]
        else:
            idx = rng.choice(n, p=d2 / total)
            centers[j] = pts[idx]
        d2 = np.minimum(d2, np.sum((pts - centers[j]) ** 2, axis=1))

    assign = np.full(n, -1, dtype=np.int64)
    for _ in range(100):
        dists = np.sum((pts[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_assign = np.argmin(dists, axis=1)  # ties -> lowest index
        # repair empty clusters with the globally worst-fit point
        for c in range(k):
            if not np.any(new_assign == c):
                cur = dists[np.arange(n), new_assign]
                worst = int(np.argmax(cur))
                new_assign[worst] = c
                dists[worst, :] = np.inf
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            centers[c] = pts[assign == c].mean(axis=0)
    return assign


def build_index_tree(points: np.ndarray, k: int = 4, seed: int = 0) -> IndexTree:
    """Recursive k-means splits; stops below k members or when a node's
    points are all identical (indivisible)."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    n = pts.shape[0]
    if n < 1:
        raise ValueError("need at least one point")
    root = TreeNode(id=0, parent=None, children=[], members=np.arange(n), depth=0)
    nodes = [root]
    queue = [0]
    while queue:
        nid = queue.pop(0)
        node = nodes[nid]
        members = node.members
        if len(members) < k:
            continue
        sub = pts[members]
        distinct = np.unique(sub, axis=0).shape[0]
        if distinct < 2:
            node.indivisible = True
            continue
        keff = min(k, distinct)
        assign = kmeans(sub, keff, seed=seed * 100003 + nid)
        if assign is None:
            node.indivisible = True
            continue
        for c in range(keff):
            mem = members[assign == c]
            child = TreeNode(
                id=len(nodes), parent=nid, children=[], members=mem, depth=node.depth + 1
            )
            nodes.append(child)
            node.children.append(child.id)
            queue.append(child.id)
    return IndexTree(nodes=nodes, root=0, k=k)


def clustering_points(features: FeatureMatrix, height: int, width: int) -> np.ndarray:
    """Per-proposal clustering vector: [row/height, col/width, feature]."""
    coords = np.array(features.coords, dtype=np.float64)
    if coords.shape[0] != features.n_columns:
        raise ShapeMismatch("coords do not match feature columns")
    scaled = coords / np.array([height, width], dtype=np.float64)
    return np.hstack([scaled, features.data.T])


# ---------------------------------------------------------------------------
# norms and proximal operators
# ---------------------------------------------------------------------------

def _check_tree_shape(S: np.ndarray, tree: IndexTree) -> None:
    if S.ndim != 2 or S.shape[1] != tree.n_columns:
        raise ShapeMismatch(
            f"S has {S.shape} columns, tree covers {tree.n_columns}"
        )


def tree_norm(S: np.ndarray, tree: IndexTree, weights: TreeWeights) -> float:
    """Omega(S) = sum over nodes G of w_G * ||S[:, G]||_F."""
    S = np.asarray(S, dtype=np.float64)
    _check_tree_shape(S, tree)
    total = 0.0
    for node in tree.nodes:
        total += weights[node.id] * float(np.linalg.norm(S[:, node.members]))
    return total


def prox_tree_norm(
    S: np.ndarray,
    tree: IndexTree,
    weights: TreeWeights,
    tau: float,
    lambda_l1: float = 0.0,
) -> np.ndarray:
    """Prox of tau*(Omega + lambda_l1 * l1): elementwise soft threshold,
    then group shrinkage applied children before parents (exact for
    tree-nested groups)."""
    if tau < 0 or lambda_l1 < 0:
        raise NegativeTau(f"tau={tau}, lambda_l1={lambda_l1}")
    S = np.asarray(S, dtype=np.float64)
    _check_tree_shape(S, tree)
    Z = soft_threshold(S, tau * lambda_l1)
    for node in sorted(tree.nodes, key=lambda nd: -nd.depth):
        cols = node.members
        block = Z[:, cols]
        nrm = float(np.linalg.norm(block))
        thr = tau * weights[node.id]
        if nrm <= thr:
            Z[:, cols] = 0.0
        else:
            Z[:, cols] = block * (1.0 - thr / nrm)
    return Z


def nuclear_norm(M: np.ndarray) -> float:
    return float(np.linalg.svd(M, compute_uv=False).sum())


def prox_nuclear(L: np.ndarray, tau: float) -> np.ndarray:
    """Singular value thresholding."""
    L = np.asarray(L, dtype=np.float64)
    if not np.all(np.isfinite(L)):
        raise NonFiniteInput("matrix must be finite")
    if tau < 0:
        raise NegativeTau(f"tau={tau}")
    U, s, Vt = np.linalg.svd(L, full_matrices=False)
    s = np.maximum(s - tau, 0.0)
    return (U * s) @ Vt


# ---------------------------------------------------------------------------
# decomposition
# ---------------------------------------------------------------------------

def decompose(
    F: FeatureMatrix | np.ndarray,
    tree: IndexTree,
    weights: TreeWeights,
    params: LsmdParams | None = None,
) -> Decomposition:
    """Alternating exact proximal minimization over L and S."""
    if params is None:
        params = LsmdParams()
    data = F.data if isinstance(F, FeatureMatrix) else np.asarray(F, dtype=np.float64)
    _check_tree_shape(data, tree)

    def objective(L: np.ndarray, S: np.ndarray) -> float:
        fit = 0.5 * float(np.linalg.norm(data - L - S) ** 2)
        return (
            fit
            + params.mu_L * nuclear_norm(L)
            + params.mu_S * tree_norm(S, tree, weights)
            + params.mu_S * params.lambda_l1 * float(np.abs(S).sum())
        )

    L = np.zeros_like(data)
    S = np.zeros_like(data)
    trace = [objective(L, S)]
    converged = False
    iterations = 0
    for it in range(1, params.max_iter + 1):
        iterations = it
        L = prox_nuclear(data - S, params.mu_L)
        S = prox_tree_norm(data - L, tree, weights, params.mu_S, params.lambda_l1)
        trace.append(objective(L, S))
        prev, cur = trace[-2], trace[-1]
        if abs(prev - cur) <= params.rel_tol * max(1.0, abs(prev)):
            converged = True
            break
    return Decomposition(L=L, S=S, objective_trace=trace, iterations=iterations, converged=converged)


# ---------------------------------------------------------------------------
# per-proposal activity scores
# ---------------------------------------------------------------------------

def motion_prior(proposals: ProposalSet) -> np.ndarray:
    """Mean intensity per proposal patch, max-normalized to [0, 1].

    An all-zero prior maps to uniform 1 so it never suppresses scores.
    """
    means = np.array([float(p.mean()) for p in proposals.patches])
    top = means.max() if means.size else 0.0
    if top <= 0.0:
        return np.ones_like(means)
    return means / top


def activity_scores(
    S: np.ndarray, proposals: ProposalSet, prior: np.ndarray
) -> np.ndarray:
    """score_j = prior_j * ||S column j||_2."""
    S = np.asarray(S, dtype=np.float64)
    prior = np.asarray(prior, dtype=np.float64)
    if S.shape[1] != len(proposals) or prior.shape != (S.shape[1],):
        raise ShapeMismatch(
            f"S {S.shape}, proposals {len(proposals)}, prior {prior.shape}"
        )
    return prior * np.linalg.norm(S, axis=0)
