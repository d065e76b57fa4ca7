"""Riccati equation with state-multiplicative noise, and the feedback gains.

The equation solved here is

    A.T P + P A - P B B.T P + C.T P C + I = 0

whose stabilizing positive definite root supplies the consensus gains
K = -B.T P and Gamma = P B B.T P.  "Stabilizing" means mean-square
stabilizing: with A_k = A - B B.T P, the operator

    X  ->  A_k.T X + X A_k + C.T X C

has spectrum strictly in the open left half plane.

Each Newton step solves the generalized Lyapunov equation
``A_k.T D + D A_k + C.T D C = -F(P)`` through the dense n^2 x n^2 system
obtained from ``vec(M.T X + X M + C.T X C) = (I (x) M.T + M.T (x) I +
C.T (x) C.T) vec(X)`` with column-major vec.  Newton converges to the
stabilizing root only from a mean-square stabilizing start, so when the
plain deterministic seed is not one the solver continues in the noise
scale: it solves a family of equations with C replaced by tau * C,
growing tau from 0 to 1 and halving each tau step until the previous
root is a mean-square stabilizing start for the next equation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_continuous_are

from .errors import DimensionMismatch, DivergedIteration, NotStabilizable

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100


@dataclass
class SystemModel:
    """Agent dynamics dx = (A x + B u) dt + C x dw, replicated N times."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    N: int

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        self.C = np.atleast_2d(np.asarray(self.C, dtype=float))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise DimensionMismatch(f"A must be square, got {self.A.shape}")
        if self.B.ndim != 2 or self.B.shape[0] != n:
            raise DimensionMismatch(f"B must be {n}xm, got {self.B.shape}")
        if self.C.shape != (n, n):
            raise DimensionMismatch(f"C must be {n}x{n}, got {self.C.shape}")
        if self.N < 2:
            raise DimensionMismatch("agent count N must be at least 2")
        if self.B.shape[1] < 1:
            raise DimensionMismatch("input dimension m must be at least 1")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


@dataclass
class RiccatiSolution:
    """Stabilizing root P with its derived gains and solve metadata."""

    P: np.ndarray
    K: np.ndarray
    Gamma: np.ndarray
    residual: float
    lambda_max_P: float
    iterations: int
    residual_history: list[float] = field(default_factory=list)


def sare_residual(model: SystemModel, P: np.ndarray) -> float:
    """Frobenius norm of A.T P + P A - P B B.T P + C.T P C + I."""
    P = np.asarray(P, dtype=float)
    return float(np.linalg.norm(_residual_matrix(model, P), ord="fro"))


def feedback_gains(P: np.ndarray, B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return K = -B.T P and Gamma = K.T K (equal to P B B.T P)."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    K = -B.T @ P
    return K, K.T @ K


def _residual_matrix(model: SystemModel, P: np.ndarray) -> np.ndarray:
    A, B, C = model.A, model.B, model.C
    n = model.n
    return A.T @ P + P @ A - P @ B @ B.T @ P + C.T @ P @ C + np.eye(n)


def ms_stability_margin(A_closed: np.ndarray, C: np.ndarray) -> float:
    """Largest real part of the mean-square evolution operator spectrum.

    Negative return value certifies that dx = A_closed x dt + C x dw is
    mean-square exponentially stable.
    """
    n = A_closed.shape[0]
    eye = np.eye(n)
    op = np.kron(eye, A_closed.T) + np.kron(A_closed.T, eye) + np.kron(C.T, C.T)
    return float(np.max(np.linalg.eigvals(op).real))


def _newton_sweep(model, P, C_scaled, tol, budget, history):
    """Newton iterations at a fixed noise scale; returns (P, used)."""
    A, B = model.A, model.B
    n = model.n
    eye_n = np.eye(n)
    BBt = B @ B.T
    for used in range(1, budget + 1):
        F = A.T @ P + P @ A - P @ BBt @ P + C_scaled.T @ P @ C_scaled + eye_n
        res = float(np.linalg.norm(F, ord="fro"))
        history.append(res)
        if not np.isfinite(res):
            raise DivergedIteration("Riccati iteration produced non-finite values")
        if res <= tol:
            return P, used - 1
        Ak = A - BBt @ P
        op = (
            np.kron(eye_n, Ak.T)
            + np.kron(Ak.T, eye_n)
            + np.kron(C_scaled.T, C_scaled.T)
        )
        delta = np.linalg.solve(op, (-F).ravel(order="F")).reshape((n, n), order="F")
        P = P + delta
        P = 0.5 * (P + P.T)
    res = float(np.linalg.norm(_scaled_residual(model, P, C_scaled), ord="fro"))
    history.append(res)
    if res <= tol:
        return P, budget
    raise NotStabilizable(
        f"Newton iteration did not reach tol={tol:g} within the budget"
    )


def _scaled_residual(model, P, C_scaled):
    A, B = model.A, model.B
    return (
        A.T @ P + P @ A - P @ B @ B.T @ P
        + C_scaled.T @ P @ C_scaled + np.eye(model.n)
    )


def solve_sare(
    model: SystemModel,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    warm_start: np.ndarray | None = None,
) -> RiccatiSolution:
    """Solve the noisy Riccati equation for its stabilizing root.

    The seed is ``warm_start`` when given, else the deterministic Riccati
    root (noise matrix zeroed), else the identity.  When the seed is not
    mean-square stabilizing for the full noise matrix, the solver walks a
    noise-scale continuation so every Newton sweep starts from a
    stabilizing point, which keeps the iteration on the stabilizing
    branch.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    A, B, C = model.A, model.B, model.C
    n = model.n
    BBt = B @ B.T

    if warm_start is not None:
        P = 0.5 * (np.asarray(warm_start, dtype=float) + np.asarray(warm_start, dtype=float).T)
    else:
        try:
            P = solve_continuous_are(A, B, np.eye(n), np.eye(model.m))
        except Exception:
            P = np.eye(n)

    history: list[float] = []
    used_total = 0

    def margin(Pc, Cc):
        return ms_stability_margin(A - BBt @ Pc, Cc)

    try:
        if margin(P, C) < 0:
            P, used_total = _newton_sweep(model, P, C, tol, max_iter, history)
        else:
            # seed only stabilizes the noiseless equation; continue in the
            # noise scale from tau = 0, where the deterministic root is a
            # valid start, up to tau = 1
            if margin(P, np.zeros_like(C)) >= 0:
                raise NotStabilizable(
                    "no mean-square stabilizing seed found; the pair may not be "
                    "mean-square stabilizable"
                )
            tau = 0.0
            for _ in itertools.count():
                if used_total >= max_iter:
                    raise NotStabilizable(
                        f"iteration budget max_iter={max_iter} exhausted at "
                        f"noise scale {tau:.3f}"
                    )
                step = 1.0 - tau
                while step > 1e-8 and margin(P, (tau + step) * C) >= 0:
                    step *= 0.5
                if step <= 1e-8:
                    raise NotStabilizable(
                        f"noise-scale continuation stalled at {tau:.6f}"
                    )
                tau += step
                P, used = _newton_sweep(
                    model, P, tau * C, tol, max_iter - used_total, history
                )
                used_total += used
                if tau >= 1.0:
                    break
    except np.linalg.LinAlgError as exc:
        raise NotStabilizable(f"inner Lyapunov solve failed: {exc}") from exc

    if not np.all(np.isfinite(P)):
        raise DivergedIteration("Riccati solution contains non-finite entries")
    eigs = np.linalg.eigvalsh(P)
    if eigs[0] <= 0:
        raise NotStabilizable("converged root is not positive definite")
    K, Gamma = feedback_gains(P, B)
    return RiccatiSolution(
        P=P,
        K=K,
        Gamma=Gamma,
        residual=sare_residual(model, P),
        lambda_max_P=float(eigs[-1]),
        iterations=used_total,
        residual_history=history,
    )
