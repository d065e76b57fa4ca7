"""Exception types shared across the toolkit.

Every error raised on purpose by this package derives from ConsensimError,
so callers can catch one base class at the CLI boundary.
"""


class ConsensimError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatch(ConsensimError):
    """Array shapes are inconsistent with the declared dimensions."""


class RejectNegativeWeight(ConsensimError):
    """Adjacency matrix contains a negative weight."""


class RejectNonzeroDiagonal(ConsensimError):
    """Adjacency matrix has a nonzero diagonal entry."""


class NoSpanningTree(ConsensimError):
    """The digraph has no directed spanning tree (root SCC not unique)."""


class NotStronglyConnected(ConsensimError):
    """A block expected to be strongly connected is not."""


class SingularBlock(ConsensimError):
    """A follower block is numerically singular."""


class NotStabilizable(ConsensimError):
    """The Riccati iteration found no stabilizing positive definite root."""


class DivergedIteration(ConsensimError):
    """An iterative solve produced non-finite values."""


class NonpositiveGain(ConsensimError):
    """An adaptive gain that must stay positive is not positive."""


class InconsistentGrids(ConsensimError):
    """Trajectories in an ensemble do not share one sampling grid."""


class NonpositiveData(ConsensimError):
    """A log-domain fit was asked to use nonpositive curve values."""


class AsymmetricLaplacian(ConsensimError):
    """An operation requiring an undirected (symmetric) Laplacian got a directed one."""


class ConfigInvalid(ConsensimError):
    """An experiment configuration failed structural validation."""
