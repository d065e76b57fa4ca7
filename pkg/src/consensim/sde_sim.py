"""Closed-loop Euler-Maruyama integration with reproducible noise.

Every agent is driven by one shared scalar Brownian motion, so a path is
integrated as

    x_i' = x_i + h (A x_i + B u_i) + (C x_i) dW,   dW ~ N(0, h)
    c_i' = c_i + h exp(gamma t) xi_i' Gamma xi_i

with the input and gain rate evaluated at the left endpoint of the step.

Noise streams are counter based and documented: path ``p`` of a run with
master seed ``s`` draws its increments from a Philox generator keyed with
the two 64-bit words ``(s, p)``, and the optional uniform initial-state
sampler uses the key ``(s, X0_STREAM)`` with the fixed constant below.
That makes every path, and the whole ensemble, a pure function of the
configuration, independent of execution order and thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConfigInvalid, DimensionMismatch
from .graph_topology import WeightedDigraph, build_laplacian
from .protocol import (
    DIRECTED_MU_ONE,
    UNDIRECTED_EXP,
    UNDIRECTED_STATIC,
    UNIFIED_DIRECTED,
    UNIFIED_DIRECTED_ALT,
    ProtocolSpec,
    control_input,
    gain_rate,
    neighborhood_error,
)
from .riccati import RiccatiSolution, SystemModel

X0_STREAM = 0x9E3779B97F4A7C15
"""Stream constant reserving the initial-state draw its own Philox key."""

VARIANT_CODES = {
    UNIFIED_DIRECTED: 0,
    UNIFIED_DIRECTED_ALT: 1,
    DIRECTED_MU_ONE: 2,
    UNDIRECTED_STATIC: 3,
    UNDIRECTED_EXP: 4,
}


def _philox(master_seed: int, stream: int) -> np.random.Generator:
    key = np.array([master_seed, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def brownian_increments(master_seed: int, path_index: int, steps: int, h: float) -> np.ndarray:
    """The documented per-path increment stream, dW ~ N(0, h)."""
    rng = _philox(master_seed, path_index)
    return rng.standard_normal(steps) * np.sqrt(h)


def sample_uniform_x0(master_seed: int, size: int, lo: float, hi: float) -> np.ndarray:
    """One uniform initial-state draw per experiment, from its own stream."""
    rng = _philox(master_seed, X0_STREAM)
    return rng.uniform(lo, hi, size)


@dataclass
class SimConfig:
    """Everything one closed-loop run needs, minus the path index."""

    model: SystemModel
    graph: WeightedDigraph
    spec: ProtocolSpec
    sol: RiccatiSolution
    h: float
    T: float
    output_stride: int = 10
    master_seed: int = 0
    x0: np.ndarray = None
    blowup_threshold: float = 1e9

    def __post_init__(self):
        if not (0 < self.h <= self.T):
            raise ConfigInvalid(f"need 0 < h <= T, got h={self.h}, T={self.T}")
        if self.output_stride < 1:
            raise ConfigInvalid("output_stride must be at least 1")
        if self.blowup_threshold <= 0:
            raise ConfigInvalid("blowup_threshold must be positive")
        if not (0 <= int(self.master_seed) < 2 ** 64):
            raise ConfigInvalid("master_seed must fit in 64 unsigned bits")
        steps = round(self.T / self.h)
        if steps < 1 or abs(steps * self.h - self.T) > 1e-9 * max(1.0, self.T):
            raise ConfigInvalid(f"T={self.T} is not an integer number of steps of h={self.h}")
        if steps % self.output_stride != 0:
            raise ConfigInvalid(
                f"step count {steps} is not a multiple of output_stride={self.output_stride}"
            )
        N, n = self.model.N, self.model.n
        if self.graph.n_nodes != N:
            raise DimensionMismatch(
                f"graph has {self.graph.n_nodes} nodes, model expects N={N}"
            )
        self.x0 = np.asarray(self.x0, dtype=float).ravel()
        if self.x0.size != N * n:
            raise DimensionMismatch(f"x0 length {self.x0.size}, expected N*n={N * n}")
        c0 = np.atleast_1d(np.asarray(self.spec.c0, dtype=float))
        if c0.size == 1:
            c0 = np.full(N, float(c0[0]))
        elif c0.size != N:
            raise DimensionMismatch(f"c0 length {c0.size}, expected 1 or N={N}")
        self.spec.c0 = c0

    @property
    def steps(self) -> int:
        return round(self.T / self.h)


@dataclass
class Trajectory:
    """One sampled path: states, adaptive gains, and inputs over time."""

    times: np.ndarray
    states: np.ndarray  # (samples, N, n)
    gains: np.ndarray   # (samples, N)
    inputs: np.ndarray  # (samples, N, m)
    path_index: int
    terminated_early: bool = False
    reason: str | None = None


def em_step(x, c, t, h, dW, cfg: SimConfig):
    """One explicit step of the closed loop, in terms of the protocol API.

    The fast kernels implement exactly this update; this version is the
    readable reference and the unit-test oracle for single steps.
    """
    model, spec, sol = cfg.model, cfg.spec, cfg.sol
    N, n, m = model.N, model.n, model.m
    lap = build_laplacian(cfg.graph).matrix
    xi = neighborhood_error(lap, x)
    u = control_input(spec, xi, c, sol.K, sol.P)
    X = np.asarray(x, dtype=float).reshape(N, n)
    U = u.reshape(N, m)
    x_next = X + h * (X @ model.A.T + U @ model.B.T) + dW * (X @ model.C.T)
    c_next = np.asarray(c, dtype=float) + h * gain_rate(spec, xi, sol.Gamma, t)
    return x_next.ravel(), c_next


def simulate_path(cfg: SimConfig, path_index: int) -> Trajectory:
    """Integrate one path; a pure function of (cfg, master_seed, path_index)."""
    model, spec = cfg.model, cfg.spec
    N, n, m = model.N, model.n, model.m
    steps = cfg.steps
    stride = cfg.output_stride
    nrec = steps // stride + 1

    dW = brownian_increments(int(cfg.master_seed), int(path_index), steps, cfg.h)
    times = np.empty(nrec)
    xs = np.empty((nrec, N, n))
    cs = np.empty((nrec, N))
    us = np.empty((nrec, N, m))

    lap = build_laplacian(cfg.graph).matrix
    written, status = _kernels.integrate_path(
        model.A, model.B, model.C, lap, cfg.sol.K, cfg.sol.P, cfg.sol.Gamma,
        VARIANT_CODES[spec.variant], spec.k1, spec.k2, spec.mu, spec.gamma,
        cfg.x0.reshape(N, n), spec.c0, cfg.h, steps, stride,
        cfg.blowup_threshold, dW, times, xs, cs, us,
    )
    blew_up = status == _kernels.STATUS_BLOWUP
    reason = None
    if blew_up:
        last_t = times[written - 1] if written else 0.0
        reason = f"blowup after t={last_t:.6g} (|x| exceeded {cfg.blowup_threshold:g})"
    return Trajectory(
        times=times[:written],
        states=xs[:written],
        gains=cs[:written],
        inputs=us[:written],
        path_index=path_index,
        terminated_early=blew_up,
        reason=reason,
    )


def run_ensemble(cfg: SimConfig, M: int, threads: int = 1) -> list[Trajectory]:
    """Integrate paths 0..M-1; results do not depend on thread count."""
    if M < 1:
        raise ConfigInvalid("path count M must be at least 1")
    if threads <= 1:
        return [simulate_path(cfg, p) for p in range(M)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda p: simulate_path(cfg, p), range(M)))
