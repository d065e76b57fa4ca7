"""Simulation and verification toolkit for fully distributed adaptive
consensus of stochastic multi-agent systems.

The package builds graph Laplacians and their leader/follower structure,
solves the noisy algebraic Riccati equation behind the feedback gains,
integrates the closed-loop stochastic dynamics under five adaptive
protocol variants, and certifies mean-square and almost-sure consensus
statistically from seeded Monte Carlo ensembles.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .analysis import (
    LyapunovSeries,
    MsCurves,
    RateFit,
    disagreement,
    fit_exponential_rate,
    gain_convergence,
    input_sup,
    lyapunov_monitor,
    ms_curves,
    time_to_threshold,
)
from .config import ExperimentConfig, OutputSettings, SimulationSettings, X0Sampler, parse_config
from .errors import (
    AsymmetricLaplacian,
    ConfigInvalid,
    ConsensimError,
    DimensionMismatch,
    DivergedIteration,
    InconsistentGrids,
    NonpositiveData,
    NonpositiveGain,
    NoSpanningTree,
    NotStabilizable,
    NotStronglyConnected,
    RejectNegativeWeight,
    RejectNonzeroDiagonal,
    SingularBlock,
)
from .graph_topology import (
    Laplacian,
    LeaderFollowerDecomposition,
    SpectralDiagnostics,
    WeightedDigraph,
    build_laplacian,
    decompose_leader_follower,
    follower_scaling,
    has_spanning_tree,
    laplacian_rank,
    leader_left_vector,
    spectral_diagnostics,
    strongly_connected_components,
)
from .protocol import (
    DIRECTED_MU_ONE,
    UNDIRECTED_EXP,
    UNDIRECTED_STATIC,
    UNIFIED_DIRECTED,
    UNIFIED_DIRECTED_ALT,
    VARIANTS,
    AgentControlState,
    ProtocolSpec,
    ValidationReport,
    aux_gain,
    control_input,
    control_state,
    gain_rate,
    neighborhood_error,
    sigma_form,
    validate,
)
from .riccati import (
    RiccatiSolution,
    SystemModel,
    feedback_gains,
    ms_stability_margin,
    sare_residual,
    solve_sare,
)
from .runner import RunResult, run_experiment
from .sde_sim import (
    SimConfig,
    Trajectory,
    brownian_increments,
    em_step,
    run_ensemble,
    sample_uniform_x0,
    simulate_path,
)

__all__ = [name for name in dir() if not name.startswith("_")]
