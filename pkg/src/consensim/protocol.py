"""Control inputs and adaptive-gain rates for the five protocol variants.

All variants share the neighborhood error xi_i = sum_j a_ij (x_i - x_j),
the quadratic form sigma_i = xi_i.T P xi_i, and the gain rate
cdot_i = exp(gamma t) xi_i.T Gamma xi_i.  They differ in how the input
is scaled:

* UnifiedDirected      u_i = c_i k1 (k2 + sigma_i / c_i)^mu K xi_i
* UnifiedDirectedAlt   u_i = c_i k1 (k2 + sigma_i)^mu       K xi_i
* DirectedMuOne        u_i = k1 (k2 c_i + sigma_i)          K xi_i
* UndirectedStatic     u_i = c_i                            K xi_i
* UndirectedExp        u_i = c_i K xi_i with gamma > 0 in the gain rate

DirectedMuOne is written straight from its own input formula rather than
as a mu = 1 instance of the unified form, because the two expressions
scale k1 and k2 differently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NonpositiveGain
from .graph_topology import (
    Laplacian,
    WeightedDigraph,
    build_laplacian,
    has_spanning_tree,
    spectral_diagnostics,
)
from .riccati import RiccatiSolution

UNIFIED_DIRECTED = "UnifiedDirected"
UNIFIED_DIRECTED_ALT = "UnifiedDirectedAlt"
DIRECTED_MU_ONE = "DirectedMuOne"
UNDIRECTED_STATIC = "UndirectedStatic"
UNDIRECTED_EXP = "UndirectedExp"

VARIANTS = (
    UNIFIED_DIRECTED,
    UNIFIED_DIRECTED_ALT,
    DIRECTED_MU_ONE,
    UNDIRECTED_STATIC,
    UNDIRECTED_EXP,
)
DIRECTED_VARIANTS = (UNIFIED_DIRECTED, UNIFIED_DIRECTED_ALT, DIRECTED_MU_ONE)
UNDIRECTED_VARIANTS = (UNDIRECTED_STATIC, UNDIRECTED_EXP)


@dataclass
class ProtocolSpec:
    """Variant tag plus its scalar parameters and initial gains c0."""

    variant: str
    k1: float = 1.0
    k2: float = 1.0
    mu: float = 2.0
    gamma: float = 0.0
    c0: np.ndarray = field(default_factory=lambda: np.array([1.0]))

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(
                f"unknown variant {self.variant!r}, expected one of {VARIANTS}"
            )
        self.c0 = np.atleast_1d(np.asarray(self.c0, dtype=float))
        if np.any(self.c0 <= 0):
            raise NonpositiveGain("initial gains c0 must be positive")


@dataclass
class AgentControlState:
    """Per-agent snapshot of the control computation, for logging."""

    xi: np.ndarray
    sigma: float
    Sigma: float
    c: float
    u: np.ndarray


@dataclass
class ValidationCheck:
    name: str
    passed: bool
    severity: str  # "error" or "warning"
    detail: str


@dataclass
class ValidationReport:
    """Pass/fail record of every hypothesis behind the chosen variant."""

    checks: list[ValidationCheck] = field(default_factory=list)

    def add(self, name, passed, severity, detail):
        self.checks.append(ValidationCheck(name, bool(passed), severity, detail))

    @property
    def hard_failures(self) -> list[ValidationCheck]:
        return [c for c in self.checks if not c.passed and c.severity == "error"]

    @property
    def warnings(self) -> list[ValidationCheck]:
        return [c for c in self.checks if not c.passed and c.severity == "warning"]

    @property
    def ok(self) -> bool:
        return not self.hard_failures

    def render(self) -> str:
        lines = []
        for c in self.checks:
            tag = "PASS" if c.passed else ("WARN" if c.severity == "warning" else "FAIL")
            lines.append(f"[{tag}] {c.name}: {c.detail}")
        return "\n".join(lines)


def neighborhood_error(g: WeightedDigraph | Laplacian | np.ndarray, x: np.ndarray) -> np.ndarray:
    """Stacked xi = (L kron I_n) x for stacked agent states x.

    The block for agent i equals sum_j a_ij (x_i - x_j), which only uses
    states the agent actually reads.
    """
    if isinstance(g, WeightedDigraph):
        lap = build_laplacian(g).matrix
    elif isinstance(g, Laplacian):
        lap = g.matrix
    else:
        lap = np.asarray(g, dtype=float)
    x = np.asarray(x, dtype=float).ravel()
    N = lap.shape[0]
    if x.size % N != 0:
        raise DimensionMismatch(f"state length {x.size} not divisible by N={N}")
    n = x.size // N
    return (lap @ x.reshape(N, n)).ravel()


def sigma_form(xi_i: np.ndarray, P: np.ndarray) -> float:
    """Quadratic form xi_i.T P xi_i, nonnegative for positive definite P."""
    xi_i = np.asarray(xi_i, dtype=float).ravel()
    return float(xi_i @ np.asarray(P, dtype=float) @ xi_i)


def aux_gain(spec: ProtocolSpec, sigma: float, c: float) -> float:
    """The auxiliary multiplier Sigma_i for the given variant.

    Undirected variants use the constant 1.  For DirectedMuOne the input
    formula folds the multiplier into the control directly; the value
    returned here, k1 (k2 + sigma / c), is for logging only.
    """
    if c <= 0:
        raise NonpositiveGain(f"adaptive gain must stay positive, got {c}")
    if spec.variant == UNIFIED_DIRECTED:
        return spec.k1 * (spec.k2 + sigma / c) ** spec.mu
    if spec.variant == UNIFIED_DIRECTED_ALT:
        return spec.k1 * (spec.k2 + sigma) ** spec.mu
    if spec.variant == DIRECTED_MU_ONE:
        return spec.k1 * (spec.k2 + sigma / c)
    return 1.0


def _input_coefficient(spec: ProtocolSpec, sigma: float, c: float) -> float:
    """Scalar multiplying K xi_i in the input, per variant."""
    if spec.variant == UNIFIED_DIRECTED:
        return c * spec.k1 * (spec.k2 + sigma / c) ** spec.mu
    if spec.variant == UNIFIED_DIRECTED_ALT:
        return c * spec.k1 * (spec.k2 + sigma) ** spec.mu
    if spec.variant == DIRECTED_MU_ONE:
        return spec.k1 * (spec.k2 * c + sigma)
    return c


def control_input(
    spec: ProtocolSpec,
    xi: np.ndarray,
    c: np.ndarray,
    K: np.ndarray,
    P: np.ndarray,
) -> np.ndarray:
    """Stacked input u for all agents under the given variant.

    Each agent's input uses only its own xi_i, c_i and the shared gain
    matrices, never any global topology data.
    """
    K = np.atleast_2d(np.asarray(K, dtype=float))
    m, n = K.shape
    xi = np.asarray(xi, dtype=float).ravel()
    c = np.asarray(c, dtype=float).ravel()
    N = c.size
    if xi.size != N * n:
        raise DimensionMismatch(f"xi length {xi.size} does not match N*n={N * n}")
    xi_blocks = xi.reshape(N, n)
    u = np.empty((N, m))
    for i in range(N):
        sig = sigma_form(xi_blocks[i], P)
        if c[i] <= 0:
            raise NonpositiveGain(f"agent {i} gain is nonpositive: {c[i]}")
        u[i] = _input_coefficient(spec, sig, float(c[i])) * (K @ xi_blocks[i])
    return u.ravel()


def control_state(
    spec: ProtocolSpec, xi_i: np.ndarray, c_i: float, K: np.ndarray, P: np.ndarray
) -> AgentControlState:
    """Full per-agent control snapshot (xi, sigma, Sigma, c, u)."""
    xi_i = np.asarray(xi_i, dtype=float).ravel()
    sig = sigma_form(xi_i, P)
    return AgentControlState(
        xi=xi_i,
        sigma=sig,
        Sigma=aux_gain(spec, sig, c_i),
        c=c_i,
        u=_input_coefficient(spec, sig, c_i) * (np.atleast_2d(K) @ xi_i),
    )


def gain_rate(
    spec: ProtocolSpec, xi: np.ndarray, Gamma: np.ndarray, t: float
) -> np.ndarray:
    """Adaptive-gain rates cdot_i = exp(gamma t) xi_i.T Gamma xi_i."""
    Gamma = np.asarray(Gamma, dtype=float)
    n = Gamma.shape[0]
    xi_blocks = np.asarray(xi, dtype=float).reshape(-1, n)
    rates = np.einsum("ik,kl,il->i", xi_blocks, Gamma, xi_blocks)
    return np.exp(spec.gamma * t) * rates


def validate(
    spec: ProtocolSpec, sol: RiccatiSolution, g: WeightedDigraph
) -> ValidationReport:
    """Check every hypothesis of the chosen variant against spec, gains, graph.

    Hard failures stop a run unless explicitly overridden; warnings do not.
    Running a directed variant on an undirected graph is only a warning
    (sound but conservative), while an undirected variant on a directed
    graph is a hard failure because those variants need symmetry.
    """
    rep = ValidationReport()
    directed_variant = spec.variant in DIRECTED_VARIANTS
    undirected_graph = g.is_undirected

    if directed_variant:
        tree = has_spanning_tree(g)
        rep.add(
            "topology.spanning_tree",
            tree,
            "error",
            "information-flow digraph contains a spanning tree"
            if tree
            else "no directed spanning tree (root component not unique)",
        )
        rep.add(
            "topology.directedness",
            not undirected_graph,
            "warning",
            "graph is directed"
            if not undirected_graph
            else "directed variant on an undirected graph (sound but conservative)",
        )
    else:
        rep.add(
            "topology.symmetry",
            undirected_graph,
            "error",
            "adjacency is symmetric"
            if undirected_graph
            else "undirected variant requires a symmetric adjacency",
        )
        if undirected_graph:
            fiedler = spectral_diagnostics(build_laplacian(g)).lambda2_undirected
            rep.add(
                "topology.connected",
                fiedler > 1e-12,
                "error",
                f"Fiedler value {fiedler:.6g}"
                + ("" if fiedler > 1e-12 else " (graph disconnected)"),
            )

    if spec.variant in (UNIFIED_DIRECTED, UNIFIED_DIRECTED_ALT):
        rep.add("param.mu", spec.mu > 1, "error", f"mu = {spec.mu:g}, requires mu > 1")
        rep.add("param.k1", spec.k1 >= 1, "error", f"k1 = {spec.k1:g}, requires k1 >= 1")
        rep.add("param.k2", spec.k2 >= 1, "error", f"k2 = {spec.k2:g}, requires k2 >= 1")
        rep.add(
            "param.c0",
            bool(np.all(spec.c0 >= 1)),
            "error",
            f"min c0 = {spec.c0.min():g}, requires every c0_i >= 1",
        )
        rep.add(
            "param.gamma_zero",
            spec.gamma == 0,
            "error",
            f"gamma = {spec.gamma:g}, directed variants use gamma = 0",
        )
        floor = spec.k1 * spec.k2 ** spec.mu
        rep.add(
            "param.aux_gain_floor",
            floor >= 1,
            "warning",
            f"Sigma_i(0) >= k1 k2^mu = {floor:g}"
            + ("" if floor >= 1 else " < 1, initial auxiliary gain below 1"),
        )
    elif spec.variant == DIRECTED_MU_ONE:
        rep.add("param.k1", spec.k1 > 0, "error", f"k1 = {spec.k1:g}, requires k1 > 0")
        rep.add("param.k2", spec.k2 > 0, "error", f"k2 = {spec.k2:g}, requires k2 > 0")
        rep.add(
            "param.gamma_zero",
            spec.gamma == 0,
            "error",
            f"gamma = {spec.gamma:g}, directed variants use gamma = 0",
        )
    elif spec.variant == UNDIRECTED_STATIC:
        rep.add(
            "param.gamma_zero",
            spec.gamma == 0,
            "error",
            f"gamma = {spec.gamma:g}, this variant uses gamma = 0",
        )
    elif spec.variant == UNDIRECTED_EXP:
        lo = 1.0 / sol.lambda_max_P
        hi = 1.5 / sol.lambda_max_P
        inside = lo <= spec.gamma < hi
        rep.add(
            "param.gamma_window",
            inside,
            "error",
            f"gamma = {spec.gamma:g}, admissible window [{lo:.6g}, {hi:.6g})",
        )

    rep.add(
        "param.c0_positive",
        bool(np.all(spec.c0 > 0)),
        "error",
        f"min c0 = {spec.c0.min():g}, requires c0 > 0",
    )
    return rep
