"""Shared fixtures: the benchmark six-agent model, reference graphs, and
random-graph generators used by the property suites.

The model and both graphs mirror the bundled configs under ``configs/`` so
unit tests and the acceptance suite exercise the same regime.
"""

import numpy as np
import pytest

from consensim import (
    UNDIRECTED_STATIC,
    ProtocolSpec,
    RiccatiSolution,
    SimConfig,
    SystemModel,
    WeightedDigraph,
    run_ensemble,
    solve_sare,
)

A_BENCH = np.array([[-0.5, 0.1], [0.0, -20.0]])
B_BENCH = np.array([[0.0], [1.0]])
C_BENCH = np.array([[0.0, 0.0], [0.0, 6.5]])

# Low-precision reference gain matrix quoted in the bundled configs as
# model.P_reference; it is rounded to four decimals and is not an exact
# root, so tests treat it as a fixed benchmark input, never as truth.
P_BENCH = np.array([[1.0, 0.0047], [0.0047, 0.9046]])

RING6_CHORD = np.array(
    [
        [0, 1, 0, 1, 0, 1],
        [1, 0, 1, 0, 0, 0],
        [0, 1, 0, 1, 0, 0],
        [1, 0, 1, 0, 1, 0],
        [0, 0, 0, 1, 0, 1],
        [1, 0, 0, 0, 1, 0],
    ],
    dtype=float,
)

DIRECTED6 = np.zeros((6, 6))
DIRECTED6[0, 1] = DIRECTED6[1, 2] = DIRECTED6[2, 0] = 1.0
DIRECTED6[3, 2] = DIRECTED6[4, 3] = DIRECTED6[5, 4] = 1.0


@pytest.fixture(scope="session")
def bench_model():
    return SystemModel(A=A_BENCH, B=B_BENCH, C=C_BENCH, N=6)


@pytest.fixture(scope="session")
def bench_solution(bench_model):
    return solve_sare(bench_model)


@pytest.fixture(scope="session")
def undirected6():
    return WeightedDigraph(6, RING6_CHORD.copy())


@pytest.fixture(scope="session")
def directed6():
    return WeightedDigraph(6, DIRECTED6.copy())


def passive_solution(n=1):
    """A placeholder gain set with K = 0, for runs whose input is inert."""
    return RiccatiSolution(
        P=np.eye(n),
        K=np.zeros((1, n)),
        Gamma=np.zeros((n, n)),
        residual=0.0,
        lambda_max_P=1.0,
        iterations=0,
    )


def decoupled_scalar_cfg(a, b, master_seed, T=1.0, h=1e-3, x0=1.0):
    """Two isolated agents, each following dx = a x dt + b x dW.

    The empty graph keeps the input at zero, so every path is a plain
    scalar linear SDE driven by its own increment stream.  Only the end
    state is recorded.
    """
    model = SystemModel(A=[[a]], B=[[0.0]], C=[[b]], N=2)
    graph = WeightedDigraph(2, np.zeros((2, 2)))
    spec = ProtocolSpec(variant=UNDIRECTED_STATIC)
    steps = round(T / h)
    return SimConfig(
        model=model,
        graph=graph,
        spec=spec,
        sol=passive_solution(),
        h=h,
        T=T,
        output_stride=steps,
        master_seed=master_seed,
        x0=np.array([x0, x0]),
    )


def gbm_end_states(a, b, master_seed, M, T=1.0, h=1e-3, x0=1.0, threads=4):
    """End states x_1(T) of M independent scalar geometric paths."""
    cfg = decoupled_scalar_cfg(a, b, master_seed, T=T, h=h, x0=x0)
    ensemble = run_ensemble(cfg, M, threads=threads)
    return np.array([traj.states[-1][0, 0] for traj in ensemble])


def random_spanning_tree_digraph(rng, n_nodes, extra_arcs=2):
    """A digraph that contains a spanning tree rooted at node 0.

    Every node i > 0 receives information from one node with a smaller
    label (a_i,parent > 0), plus a few extra random arcs.  Weights are
    drawn from [0.5, 2.0] to keep the follower block well conditioned.
    """
    adj = np.zeros((n_nodes, n_nodes))
    for i in range(1, n_nodes):
        parent = int(rng.integers(0, i))
        adj[i, parent] = rng.uniform(0.5, 2.0)
    for _ in range(extra_arcs):
        i, j = rng.integers(0, n_nodes, 2)
        if i != j:
            adj[i, j] = rng.uniform(0.5, 2.0)
    return WeightedDigraph(n_nodes, adj)


def random_strongly_connected_digraph(rng, n_nodes, extra_arcs=3):
    """A directed cycle through every node plus random extra arcs."""
    adj = np.zeros((n_nodes, n_nodes))
    order = rng.permutation(n_nodes)
    for k in range(n_nodes):
        i, j = order[k], order[(k + 1) % n_nodes]
        adj[i, j] = rng.uniform(0.5, 2.0)
    for _ in range(extra_arcs):
        i, j = rng.integers(0, n_nodes, 2)
        if i != j:
            adj[i, j] = rng.uniform(0.5, 2.0)
    return WeightedDigraph(n_nodes, adj)


def random_connected_undirected_graph(rng, n_nodes, extra_edges=2):
    """A random tree plus extra edges, symmetrized."""
    adj = np.zeros((n_nodes, n_nodes))
    for i in range(1, n_nodes):
        parent = int(rng.integers(0, i))
        w = rng.uniform(0.5, 2.0)
        adj[i, parent] = adj[parent, i] = w
    for _ in range(extra_edges):
        i, j = rng.integers(0, n_nodes, 2)
        if i != j:
            w = rng.uniform(0.5, 2.0)
            adj[i, j] = adj[j, i] = w
    return WeightedDigraph(n_nodes, adj)
