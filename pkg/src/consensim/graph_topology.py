"""Weighted digraphs, Laplacians, and the leader/follower machinery.

Conventions used throughout:

* ``adjacency[i, j] = a_ij > 0`` means agent ``i`` reads agent ``j``'s state,
  so information flows along the arc ``j -> i``.  Spanning-tree and
  strong-connectivity questions are always asked of that information-flow
  digraph.
* The Laplacian is degree minus adjacency, ``L[i, i] = sum_j a_ij`` and
  ``L[i, j] = -a_ij``, so every row sums to zero.
* Rank and null-space decisions use the singular value cutoff
  ``RANK_CUTOFF * sigma_max``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    NoSpanningTree,
    NotStronglyConnected,
    RejectNegativeWeight,
    RejectNonzeroDiagonal,
    SingularBlock,
)

RANK_CUTOFF = 1e-10


@dataclass
class WeightedDigraph:
    """A weighted digraph on ``n_nodes`` agents.

    ``adjacency`` holds the nonnegative weights ``a_ij`` with a zero
    diagonal.  The graph counts as undirected exactly when the adjacency
    matrix is symmetric.
    """

    n_nodes: int
    adjacency: np.ndarray

    def __post_init__(self):
        self.adjacency = np.asarray(self.adjacency, dtype=float)
        if self.adjacency.shape != (self.n_nodes, self.n_nodes):
            raise DimensionMismatch(
                f"adjacency must be {self.n_nodes}x{self.n_nodes}, "
                f"got {self.adjacency.shape}"
            )
        if np.any(self.adjacency < 0):
            raise RejectNegativeWeight("adjacency weights must be nonnegative")
        if np.any(np.diagonal(self.adjacency) != 0):
            raise RejectNonzeroDiagonal("adjacency diagonal must be zero")

    @property
    def is_undirected(self) -> bool:
        return bool(np.array_equal(self.adjacency, self.adjacency.T))


@dataclass
class Laplacian:
    """Degree-minus-adjacency matrix; rows sum to zero by construction."""

    matrix: np.ndarray


@dataclass
class LeaderFollowerDecomposition:
    """Block-triangular relabeling of a spanning-tree digraph.

    ``permutation`` lists original node indices in the order leaders then
    followers (each group keeping its original relative order), so that
    ``L[permutation][:, permutation]`` equals ``[[L11, 0], [L21, L22]]``
    exactly.  ``r`` is the normalized positive left null vector of ``L11``
    and ``s`` solves ``L22.T s = 1`` (empty when there are no followers).
    """

    leader_indices: list[int]
    follower_indices: list[int]
    permutation: list[int]
    L11: np.ndarray
    L21: np.ndarray
    L22: np.ndarray
    r: np.ndarray
    s: np.ndarray


@dataclass
class SpectralDiagnostics:
    """Scalars summarizing how well a topology supports consensus.

    Fields are ``None`` when they do not apply (for example the Fiedler
    value of a directed graph, or follower quantities when every node is a
    leader).
    """

    lambda2_undirected: float | None = None
    lambda2_L11_tilde: float | None = None
    lambda1_L22_tilde: float | None = None
    sigma_max_SL21: float | None = None


def build_laplacian(g: WeightedDigraph) -> Laplacian:
    """Return the Laplacian of ``g``; row sums vanish exactly."""
    a = g.adjacency
    lap = -a.copy()
    np.fill_diagonal(lap, a.sum(axis=1))
    return Laplacian(lap)


def _info_flow_successors(adjacency: np.ndarray) -> list[np.ndarray]:
    """successors[j] = nodes i with a_ij > 0 (information flows j -> i)."""
    return [np.nonzero(adjacency[:, j] > 0)[0] for j in range(adjacency.shape[0])]


def strongly_connected_components(adjacency: np.ndarray) -> list[list[int]]:
    """Tarjan's algorithm on the information-flow digraph, iteratively.

    Components are returned in reverse topological order of the
    condensation (every arc between components points from a later list
    entry to an earlier one).
    """
    n = adjacency.shape[0]
    succ = _info_flow_successors(adjacency)
    index = [-1] * n
    lowlink = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    components: list[list[int]] = []
    counter = 0

    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                index[v] = lowlink[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            neighbors = succ[v]
            while pi < len(neighbors):
                w = int(neighbors[pi])
                pi += 1
                if index[w] == -1:
                    work[-1] = (v, pi)
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    lowlink[v] = min(lowlink[v], index[w])
            if advanced:
                continue
            work.pop()
            if lowlink[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                components.append(sorted(comp))
            if work:
                u, _ = work[-1]
                lowlink[u] = min(lowlink[u], lowlink[v])
    return components


def _source_components(adjacency: np.ndarray, components: list[list[int]]) -> list[int]:
    """Indices of condensation components with no incoming arcs."""
    comp_of = {}
    for ci, comp in enumerate(components):
        for v in comp:
            comp_of[v] = ci
    has_incoming = [False] * len(components)
    rows, cols = np.nonzero(adjacency > 0)
    for i, j in zip(rows, cols):
        # arc j -> i in information flow
        if comp_of[j] != comp_of[i]:
            has_incoming[comp_of[i]] = True
    return [ci for ci, inc in enumerate(has_incoming) if not inc]


def has_spanning_tree(g: WeightedDigraph) -> bool:
    """True iff some root reaches every node along information-flow arcs.

    Equivalent to the condensation of the information-flow digraph having
    exactly one source component, and to ``rank(L) == N - 1``.
    """
    comps = strongly_connected_components(g.adjacency)
    return len(_source_components(g.adjacency, comps)) == 1


def leader_left_vector(L11: np.ndarray) -> np.ndarray:
    """Positive left null vector of a strongly connected Laplacian block.

    Solves ``r.T L11 = 0`` by SVD, fixes the sign so all entries are
    positive, and normalizes the sum to one.
    """
    L11 = np.asarray(L11, dtype=float)
    m = L11.shape[0]
    if m == 1:
        return np.array([1.0])
    _, sv, vh = np.linalg.svd(L11.T)
    cutoff = RANK_CUTOFF * sv[0] if sv[0] > 0 else RANK_CUTOFF
    if sv[-1] > cutoff or (m >= 2 and sv[-2] <= cutoff):
        raise NotStronglyConnected("left null space of L11 is not one dimensional")
    r = vh[-1]
    if np.all(r <= 0):
        r = -r
    if np.any(r <= 0):
        raise NotStronglyConnected("left null vector of L11 is not sign definite")
    r = r / r.sum()
    if np.linalg.norm(r @ L11, ord=np.inf) > 1e-10:
        raise NotStronglyConnected("residual of r.T L11 exceeds 1e-10")
    return r


def follower_scaling(L22: np.ndarray) -> np.ndarray:
    """Positive diagonal scaling ``s = (L22.T)^-1 1`` of the follower block."""
    L22 = np.asarray(L22, dtype=float)
    if L22.size == 0:
        return np.zeros(0)
    if np.linalg.cond(L22) > 1e12:
        raise SingularBlock("follower block is numerically singular")
    s = np.linalg.solve(L22.T, np.ones(L22.shape[0]))
    if np.any(s <= 0):
        raise SingularBlock("follower scaling is not positive")
    return s


def decompose_leader_follower(g: WeightedDigraph) -> LeaderFollowerDecomposition:
    """Split nodes into the root SCC (leaders) and the rest (followers).

    The permuted Laplacian is exactly block lower triangular because no
    information arc enters the root component.  Raises NoSpanningTree when
    the root component is not unique.
    """
    comps = strongly_connected_components(g.adjacency)
    sources = _source_components(g.adjacency, comps)
    if len(sources) != 1:
        raise NoSpanningTree(
            f"information-flow digraph has {len(sources)} source components, need 1"
        )
    leaders = comps[sources[0]]
    follower_set = set(range(g.n_nodes)) - set(leaders)
    followers = sorted(follower_set)
    perm = list(leaders) + followers
    lap = build_laplacian(g).matrix
    permuted = lap[np.ix_(perm, perm)]
    m = len(leaders)
    L11 = permuted[:m, :m]
    L21 = permuted[m:, :m]
    L22 = permuted[m:, m:]
    r = leader_left_vector(L11)
    s = follower_scaling(L22)
    return LeaderFollowerDecomposition(
        leader_indices=list(leaders),
        follower_indices=followers,
        permutation=perm,
        L11=L11,
        L21=L21,
        L22=L22,
        r=r,
        s=s,
    )


def spectral_diagnostics(
    d: LeaderFollowerDecomposition | Laplacian,
) -> SpectralDiagnostics:
    """Eigenvalue and singular value summaries of a topology.

    Accepts either a leader/follower decomposition (directed case) or a
    symmetric Laplacian (undirected case, Fiedler value only).
    """
    if isinstance(d, Laplacian):
        lam = np.linalg.eigvalsh(0.5 * (d.matrix + d.matrix.T))
        return SpectralDiagnostics(lambda2_undirected=float(lam[1]))
    R = np.diag(d.r)
    tilde11 = R @ d.L11 + d.L11.T @ R
    lam11 = np.linalg.eigvalsh(tilde11)
    out = SpectralDiagnostics(lambda2_L11_tilde=float(lam11[1]) if len(lam11) > 1 else None)
    if len(d.follower_indices) > 0:
        S = np.diag(d.s)
        tilde22 = S @ d.L22 + d.L22.T @ S
        out.lambda1_L22_tilde = float(np.linalg.eigvalsh(tilde22)[0])
        out.sigma_max_SL21 = float(np.linalg.svd(S @ d.L21, compute_uv=False)[0])
    return out


def laplacian_rank(lap: np.ndarray) -> int:
    """Numerical rank with the package-wide singular value cutoff."""
    sv = np.linalg.svd(lap, compute_uv=False)
    if sv[0] == 0:
        return 0
    return int(np.sum(sv > RANK_CUTOFF * sv[0]))
