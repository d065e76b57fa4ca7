"""Ensemble statistics: consensus curves, rate fits, and monitors.

Mean-square expectations are plain sample means with standard errors
(sample standard deviation over sqrt(M)).  Aggregations always iterate
paths in index order, so results are reproducible bit for bit; any
reduction reordering agrees to floating-point associativity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AsymmetricLaplacian, InconsistentGrids, NonpositiveData
from .sde_sim import Trajectory


@dataclass
class MsCurves:
    """Monte Carlo consensus-error curves for one ensemble.

    ``pair_curves[k]`` estimates E|x_i(t) - x_ref(t)|^2 for the agent
    ``agents[k]``, and ``ms_theta`` estimates E|theta(t)|^2 for the
    stacked disagreement vector theta.
    """

    times: np.ndarray
    agents: list[int]
    pair_curves: np.ndarray
    pair_se: np.ndarray
    ms_theta: np.ndarray
    M: int
    reference_agent: int = 0


@dataclass
class RateFit:
    """Least-squares exponent of a log-linear decay fit."""

    delta_hat: float
    window: tuple[float, float]
    r_squared: float
    theory_delta: float = float("nan")


@dataclass
class LyapunovSeries:
    """Time series of the consensus energy and its exponential scaling."""

    times: np.ndarray
    V3: np.ndarray
    V3_check: np.ndarray
    scaled: np.ndarray
    delta: float


def disagreement(x: np.ndarray, n_agents: int | None = None) -> np.ndarray:
    """Project a stacked state onto the mean-zero subspace.

    theta_i = x_i - mean_j x_j.  A 2-D input is read as one row per
    agent and projected row-wise.  A flat input is read as n_agents
    blocks (each entry its own agent when n_agents is omitted) and
    returned flat.  Idempotent; the agent-mean of the result is zero.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        return x - x.mean(axis=0, keepdims=True)
    blocks = x.reshape(n_agents if n_agents is not None else x.size, -1)
    return (blocks - blocks.mean(axis=0, keepdims=True)).ravel()


def _common_grid(ensemble: list[Trajectory]) -> np.ndarray:
    times = ensemble[0].times
    for traj in ensemble[1:]:
        if traj.times.shape != times.shape or not np.array_equal(traj.times, times):
            raise InconsistentGrids(
                f"path {traj.path_index} has a different sampling grid"
            )
    return times


def ms_curves(ensemble: list[Trajectory], reference_agent: int = 0) -> MsCurves:
    """Mean-square relative-state and disagreement curves of an ensemble."""
    if not ensemble:
        raise InconsistentGrids("empty ensemble")
    times = _common_grid(ensemble)
    M = len(ensemble)
    N = ensemble[0].states.shape[1]
    agents = [i for i in range(N) if i != reference_agent]

    # (M, samples, N) squared distances to the reference agent
    sq = np.stack(
        [
            ((t.states - t.states[:, [reference_agent], :]) ** 2).sum(axis=2)
            for t in ensemble
        ]
    )
    pair = sq[:, :, agents]
    pair_mean = pair.mean(axis=0).T
    if M > 1:
        pair_se = (pair.std(axis=0, ddof=1) / np.sqrt(M)).T
    else:
        pair_se = np.zeros_like(pair_mean)

    theta_sq = np.stack(
        [
            ((t.states - t.states.mean(axis=1, keepdims=True)) ** 2).sum(axis=(1, 2))
            for t in ensemble
        ]
    )
    return MsCurves(
        times=times,
        agents=agents,
        pair_curves=pair_mean,
        pair_se=pair_se,
        ms_theta=theta_sq.mean(axis=0),
        M=M,
        reference_agent=reference_agent,
    )


def fit_exponential_rate(
    times: np.ndarray,
    values: np.ndarray,
    window: tuple[float, float],
    theory_delta: float = float("nan"),
) -> RateFit:
    """Fit log(values) = a - delta_hat * t on the strictly positive part
    of the window; needs at least two usable points."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    lo, hi = window
    mask = (times >= lo) & (times <= hi) & (values > 0)
    if mask.sum() < 2:
        raise NonpositiveData(
            "fewer than two strictly positive samples in the fit window"
        )
    t = times[mask]
    y = np.log(values[mask])
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else 1.0 - float((resid ** 2).sum()) / ss_tot
    return RateFit(
        delta_hat=float(-slope),
        window=(float(t[0]), float(t[-1])),
        r_squared=r2,
        theory_delta=theory_delta,
    )


def lyapunov_monitor(
    traj: Trajectory,
    P: np.ndarray,
    L: np.ndarray,
    psi: np.ndarray,
    gamma: float,
) -> LyapunovSeries:
    """Evaluate the consensus energy along one path.

    V3_check(t) = theta(t).T (L kron P) theta(t) and
    V3(t) = V3_check(t) + sum_i exp(-gamma t) (c_i(t) - psi_i)^2,
    together with exp(delta t) V3_check(t) for delta = 1 / lambda_max(P).
    """
    L = np.asarray(L, dtype=float)
    if not np.allclose(L, L.T, rtol=0, atol=1e-12):
        raise AsymmetricLaplacian("the energy form needs a symmetric Laplacian")
    P = np.asarray(P, dtype=float)
    psi = np.asarray(psi, dtype=float).ravel()
    theta = traj.states - traj.states.mean(axis=1, keepdims=True)
    W = theta @ P
    v_check = np.einsum("ij,tip,tjp->t", L, theta, W)
    dev = traj.gains - psi[None, :]
    v3 = v_check + (np.exp(-gamma * traj.times)[:, None] * dev ** 2).sum(axis=1)
    delta = 1.0 / float(np.linalg.eigvalsh(P)[-1])
    scaled = np.exp(delta * traj.times) * v_check
    return LyapunovSeries(
        times=traj.times, V3=v3, V3_check=v_check, scaled=scaled, delta=delta
    )


def gain_convergence(
    traj: Trajectory, tail_fraction: float = 0.2, rel_tol: float = 1e-2
) -> tuple[np.ndarray, np.ndarray]:
    """Final gains and a plateau flag per agent.

    The flag is true when the gain's growth over the trailing
    ``tail_fraction`` of the horizon is at most ``rel_tol`` of its final
    value.
    """
    if not (0 < tail_fraction < 1):
        raise ValueError("tail_fraction must lie strictly between 0 and 1")
    t_end = traj.times[-1]
    idx = int(np.searchsorted(traj.times, t_end * (1 - tail_fraction)))
    idx = min(idx, len(traj.times) - 1)
    c_final = traj.gains[-1]
    growth = c_final - traj.gains[idx]
    return c_final, growth <= rel_tol * c_final


def input_sup(traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    """Per-agent supremum of |u_i(t)| over the recorded samples, with the
    time at which it is attained."""
    norms = np.linalg.norm(traj.inputs, axis=2)
    idx = norms.argmax(axis=0)
    return norms.max(axis=0), traj.times[idx]


def time_to_threshold(times: np.ndarray, values: np.ndarray, threshold: float) -> float:
    """First sampled time at which values drop to the threshold, else nan."""
    below = np.nonzero(np.asarray(values) <= threshold)[0]
    return float(np.asarray(times)[below[0]]) if below.size else float("nan")
