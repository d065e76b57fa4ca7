# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled Euler-Maruyama path integrator.

Same contract as em_py.integrate_path, with the whole time loop running
without the GIL so ensemble paths parallelize across threads.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, isfinite, pow

cnp.import_array()

STATUS_OK = 0
STATUS_BLOWUP = 1


def integrate_path(
    A, B, C, L, K, P, G,
    int variant, double k1, double k2, double mu, double gamma,
    x0, c0, double h, int steps, int stride, double blowup_threshold, dW,
    times, xs, cs, us,
):
    """Integrate one path; returns (records_written, status)."""
    cdef double[:, ::1] A_v = np.ascontiguousarray(A, dtype=np.float64)
    cdef double[:, ::1] B_v = np.ascontiguousarray(B, dtype=np.float64)
    cdef double[:, ::1] C_v = np.ascontiguousarray(C, dtype=np.float64)
    cdef double[:, ::1] L_v = np.ascontiguousarray(L, dtype=np.float64)
    cdef double[:, ::1] K_v = np.ascontiguousarray(K, dtype=np.float64)
    cdef double[:, ::1] P_v = np.ascontiguousarray(P, dtype=np.float64)
    cdef double[:, ::1] G_v = np.ascontiguousarray(G, dtype=np.float64)
    cdef double[::1] dW_v = np.ascontiguousarray(dW, dtype=np.float64)
    cdef double[::1] times_v = times
    cdef double[:, :, ::1] xs_v = xs
    cdef double[:, ::1] cs_v = cs
    cdef double[:, :, ::1] us_v = us

    cdef int N = L_v.shape[0]
    cdef int n = A_v.shape[0]
    cdef int m = B_v.shape[1]

    x_arr = np.array(x0, dtype=np.float64)
    c_arr = np.array(c0, dtype=np.float64)
    cdef double[:, ::1] x = x_arr
    cdef double[::1] c = c_arr
    xn_arr = np.empty((N, n), dtype=np.float64)
    xi_arr = np.empty((N, n), dtype=np.float64)
    u_arr = np.empty((N, m), dtype=np.float64)
    gq_arr = np.empty(N, dtype=np.float64)
    cdef double[:, ::1] xn = xn_arr
    cdef double[:, ::1] xi = xi_arr
    cdef double[:, ::1] u = u_arr
    cdef double[::1] gq = gq_arr

    cdef int j = 0
    cdef int status = STATUS_OK
    cdef int k, i, p, q, a
    cdef double t, sigma, gqi, coef, acc, acc2, drift, diff, dw, egt, amax

    with nogil:
        for k in range(steps + 1):
            t = k * h
            # xi = L @ x
            for i in range(N):
                for p in range(n):
                    acc = 0.0
                    for a in range(N):
                        acc += L_v[i, a] * x[a, p]
                    xi[i, p] = acc
            # sigma_i = xi P xi, gq_i = xi Gamma xi, u_i = coef_i * K xi_i
            for i in range(N):
                sigma = 0.0
                gqi = 0.0
                for p in range(n):
                    acc = 0.0
                    acc2 = 0.0
                    for q in range(n):
                        acc += P_v[p, q] * xi[i, q]
                        acc2 += G_v[p, q] * xi[i, q]
                    sigma += xi[i, p] * acc
                    gqi += xi[i, p] * acc2
                gq[i] = gqi
                if variant == 0:
                    coef = c[i] * k1 * pow(k2 + sigma / c[i], mu)
                elif variant == 1:
                    coef = c[i] * k1 * pow(k2 + sigma, mu)
                elif variant == 2:
                    coef = k1 * (k2 * c[i] + sigma)
                else:
                    coef = c[i]
                for p in range(m):
                    acc = 0.0
                    for q in range(n):
                        acc += K_v[p, q] * xi[i, q]
                    u[i, p] = coef * acc
            if k % stride == 0:
                times_v[j] = t
                for i in range(N):
                    for p in range(n):
                        xs_v[j, i, p] = x[i, p]
                    cs_v[j, i] = c[i]
                    for p in range(m):
                        us_v[j, i, p] = u[i, p]
                j += 1
            if k == steps:
                break
            # state step with the shared scalar Brownian increment
            dw = dW_v[k]
            amax = 0.0
            for i in range(N):
                for p in range(n):
                    drift = 0.0
                    for q in range(n):
                        drift += A_v[p, q] * x[i, q]
                    for q in range(m):
                        drift += B_v[p, q] * u[i, q]
                    diff = 0.0
                    for q in range(n):
                        diff += C_v[p, q] * x[i, q]
                    xn[i, p] = x[i, p] + h * drift + dw * diff
                    if fabs(xn[i, p]) > amax:
                        amax = fabs(xn[i, p])
            for i in range(N):
                for p in range(n):
                    x[i, p] = xn[i, p]
            # gain step, exponential factor at the left endpoint
            egt = exp(gamma * t)
            for i in range(N):
                c[i] = c[i] + h * egt * gq[i]
            if not isfinite(amax) or amax > blowup_threshold:
                status = 1  # STATUS_BLOWUP
                break
    return j, status
