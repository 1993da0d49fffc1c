# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loop for the three-block consensus box-QP cycle.

Mirrors ``_consensus_py.run_cycle``; keep the update formulas in lockstep.
"""

from libc.math cimport sqrt

import numpy as np

SUCCESS = 0
PENALTY_TOO_SMALL = 1
BUDGET = 2


def run_cycle(
    double[::1] x,
    double[::1] p,
    double[::1] alphas,
    double[::1] betas,
    double gamma,
    double c,
    double theta,
    double chi,
    double lam,
    double rho,
    double eta,
    Py_ssize_t budget,
    bint window_full,
    bint penalty_test,
    double[::1] v_hist,
    double[::1] f_hist,
    double[::1] p_hist,
    double[::1] q_out,
    double[::1] v_out,
):
    """One fixed-penalty cycle; x and p are updated in place.

    Returns ``(status, k)`` with the norm histories written into the first
    k entries of the provided buffers.
    """
    cdef Py_ssize_t n = p.shape[0] // 2
    cdef double a1 = alphas[0], a2 = alphas[1], a3 = alphas[2]
    cdef double den1 = 1.0 - lam * a1 + lam * c
    cdef double den2 = 1.0 - lam * a2 + lam * c
    cdef double den3 = 1.0 - lam * a3 + 2.0 * lam * c
    cdef double one_t = 1.0 - theta

    work = np.empty((8, n))
    cdef double[:, ::1] w = work
    prefix = np.empty((2, budget + 1))
    cdef double[:, ::1] pref = prefix
    pref[0, 0] = 0.0
    pref[1, 0] = 0.0

    cdef Py_ssize_t k, j, lo
    cdef int status = BUDGET
    cdef Py_ssize_t k_done = budget
    cdef double x1o, x2o, x3o, u, lin, f1j, f2j, d1j, d2j, d3j
    cdef double v1j, v2j, v3j, p1j, p2j
    cdef double v_sq, f_sq, p_sq, v_norm, f_norm
    cdef double scale, s_v, s_f

    # w rows: 0,1,2 hold x1,x2,x3; 3,4 hold p1,p2; 5,6,7 hold d1,d2,d3.
    for j in range(n):
        w[0, j] = x[j]
        w[1, j] = x[n + j]
        w[2, j] = x[2 * n + j]
        w[3, j] = p[j]
        w[4, j] = p[n + j]

    for k in range(1, budget + 1):
        v_sq = 0.0
        f_sq = 0.0
        p_sq = 0.0
        # Sweep block 1 fully (it only reads the old x2, x3), then block 2
        # (reads new x1 via nothing, old x3), then block 3 (new x1, x2).
        for j in range(n):
            x1o = w[0, j]
            lin = one_t * w[3, j] - c * w[2, j]
            u = (x1o + lam * betas[j] - lam * lin) / den1
            if u > gamma:
                u = gamma
            elif u < -gamma:
                u = -gamma
            w[0, j] = u
            w[5, j] = u - x1o
        for j in range(n):
            x2o = w[1, j]
            lin = one_t * w[4, j] - c * w[2, j]
            u = (x2o + lam * betas[n + j] - lam * lin) / den2
            if u > gamma:
                u = gamma
            elif u < -gamma:
                u = -gamma
            w[1, j] = u
            w[6, j] = u - x2o
        for j in range(n):
            x3o = w[2, j]
            lin = -(one_t * w[3, j] + c * w[0, j]) - (one_t * w[4, j] + c * w[1, j])
            u = (x3o + lam * betas[2 * n + j] - lam * lin) / den3
            if u > gamma:
                u = gamma
            elif u < -gamma:
                u = -gamma
            w[2, j] = u
            d3j = u - x3o
            w[7, j] = d3j

        for j in range(n):
            d1j = w[5, j]
            d2j = w[6, j]
            d3j = w[7, j]
            f1j = w[0, j] - w[2, j]
            f2j = w[1, j] - w[2, j]
            v1j = -c * d3j - d1j / lam
            v2j = -c * d3j - d2j / lam
            v3j = -d3j / lam
            v_sq += v1j * v1j + v2j * v2j + v3j * v3j
            f_sq += f1j * f1j + f2j * f2j
            p1j = one_t * w[3, j] + chi * c * f1j
            p2j = one_t * w[4, j] + chi * c * f2j
            p_sq += p1j * p1j + p2j * p2j
            q_out[j] = one_t * w[3, j] + c * f1j
            q_out[n + j] = one_t * w[4, j] + c * f2j
            w[3, j] = p1j
            w[4, j] = p2j

        v_norm = sqrt(v_sq)
        f_norm = sqrt(f_sq)
        v_hist[k - 1] = v_norm
        f_hist[k - 1] = f_norm
        p_hist[k - 1] = sqrt(p_sq)
        pref[0, k] = pref[0, k - 1] + v_norm
        pref[1, k] = pref[1, k - 1] + f_norm

        if v_norm <= rho and f_norm <= eta:
            status = SUCCESS
            k_done = k
            break
        if penalty_test and k % 2 == 0 and k >= 4:
            lo = 0 if window_full else k // 2 - 1
            scale = 2.0 / (k + 2)
            s_v = scale * (pref[0, k] - pref[0, lo])
            s_f = scale * (pref[1, k] - pref[1, lo])
            if s_v / rho + sqrt(c * c * c / k) * s_f / eta <= 1.0:
                status = PENALTY_TOO_SMALL
                k_done = k
                break

    for j in range(n):
        x[j] = w[0, j]
        x[n + j] = w[1, j]
        x[2 * n + j] = w[2, j]
        p[j] = w[3, j]
        p[n + j] = w[4, j]
        v_out[j] = -c * w[7, j] - w[5, j] / lam
        v_out[n + j] = -c * w[7, j] - w[6, j] / lam
        v_out[2 * n + j] = -w[7, j] / lam
    return status, k_done
