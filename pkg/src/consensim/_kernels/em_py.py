"""Pure numpy Euler-Maruyama path integrator.

This is the reference implementation of the closed-loop step shared with
the compiled kernel.  One call integrates a single sample path, writing
every ``stride``-th sample (including the initial state and, when no
blow-up occurs, the final one) into caller-provided arrays.

Variant codes: 0 UnifiedDirected, 1 UnifiedDirectedAlt, 2 DirectedMuOne,
3 UndirectedStatic, 4 UndirectedExp.
"""

from __future__ import annotations

import numpy as np

STATUS_OK = 0
STATUS_BLOWUP = 1


def integrate_path(
    A, B, C, L, K, P, G,
    variant, k1, k2, mu, gamma,
    x0, c0, h, steps, stride, blowup_threshold, dW,
    times, xs, cs, us,
):
    """Integrate one path; returns (records_written, status)."""
    x = np.array(x0, dtype=float)        # (N, n)
    c = np.array(c0, dtype=float)        # (N,)
    At = np.asarray(A, dtype=float).T
    Bt = np.asarray(B, dtype=float).T
    Ct = np.asarray(C, dtype=float).T
    Kt = np.asarray(K, dtype=float).T
    L = np.asarray(L, dtype=float)
    P = np.asarray(P, dtype=float)
    G = np.asarray(G, dtype=float)

    j = 0
    status = STATUS_OK
    for k in range(steps + 1):
        t = k * h
        xi = L @ x
        sigma = np.einsum("ik,kl,il->i", xi, P, xi)
        gq = np.einsum("ik,kl,il->i", xi, G, xi)
        if variant == 0:
            coef = c * k1 * (k2 + sigma / c) ** mu
        elif variant == 1:
            coef = c * k1 * (k2 + sigma) ** mu
        elif variant == 2:
            coef = k1 * (k2 * c + sigma)
        else:
            coef = c
        u = coef[:, None] * (xi @ Kt)
        if k % stride == 0:
            times[j] = t
            xs[j] = x
            cs[j] = c
            us[j] = u
            j += 1
        if k == steps:
            break
        x = x + h * (x @ At + u @ Bt) + dW[k] * (x @ Ct)
        c = c + (h * np.exp(gamma * t)) * gq
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > blowup_threshold:
            status = STATUS_BLOWUP
            break
    return j, status
