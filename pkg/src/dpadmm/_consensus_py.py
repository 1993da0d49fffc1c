"""Pure-numpy twin of the compiled consensus cycle kernel.

Same calling convention as the compiled module so the two are selectable at
import time. Keep the update formulas in lockstep with ``_consensus_cycle.pyx``.
"""

from __future__ import annotations

import math

import numpy as np

SUCCESS = 0
PENALTY_TOO_SMALL = 1
BUDGET = 2


def run_cycle(
    x,
    p,
    alphas,
    betas,
    gamma,
    c,
    theta,
    chi,
    lam,
    rho,
    eta,
    budget,
    window_full,
    penalty_test,
    v_hist,
    f_hist,
    p_hist,
    q_out,
    v_out,
):
    """One fixed-penalty cycle on the three-block consensus box-QP family.

    ``x`` (length 3n) and ``p`` (length 2n) are updated in place; the norm
    histories fill the first k entries of the provided buffers. Returns
    ``(status, k)``.
    """
    n = p.shape[0] // 2
    x1, x2, x3 = x[:n].copy(), x[n : 2 * n].copy(), x[2 * n :].copy()
    b1, b2, b3 = betas[:n], betas[n : 2 * n], betas[2 * n :]
    a1, a2, a3 = float(alphas[0]), float(alphas[1]), float(alphas[2])
    den1 = 1.0 - lam * a1 + lam * c
    den2 = 1.0 - lam * a2 + lam * c
    den3 = 1.0 - lam * a3 + 2.0 * lam * c
    one_t = 1.0 - theta

    sv_full = 0.0
    sf_full = 0.0
    pv = np.empty(budget + 1)
    pf = np.empty(budget + 1)
    pv[0] = pf[0] = 0.0

    status = BUDGET
    k_done = budget
    p1, p2 = p[:n].copy(), p[n:].copy()
    p1_prev, p2_prev = p1, p2
    f1 = f2 = d1 = d2 = d3 = np.zeros(n)

    for k in range(1, budget + 1):
        x1o, x2o, x3o = x1, x2, x3
        p1_prev, p2_prev = p1, p2

        w1 = one_t * p1 - c * x3o
        x1 = np.clip((x1o + lam * b1 - lam * w1) / den1, -gamma, gamma)
        w2 = one_t * p2 - c * x3o
        x2 = np.clip((x2o + lam * b2 - lam * w2) / den2, -gamma, gamma)
        lin3 = -(one_t * p1 + c * x1) - (one_t * p2 + c * x2)
        x3 = np.clip((x3o + lam * b3 - lam * lin3) / den3, -gamma, gamma)

        f1 = x1 - x3
        f2 = x2 - x3
        d1, d2, d3 = x1 - x1o, x2 - x2o, x3 - x3o
        v1 = -c * d3 - d1 / lam
        v2 = -c * d3 - d2 / lam
        v3 = -d3 / lam
        v_norm = math.sqrt(
            float(v1 @ v1) + float(v2 @ v2) + float(v3 @ v3)
        )
        f_norm = math.sqrt(float(f1 @ f1) + float(f2 @ f2))
        p1 = one_t * p1 + chi * c * f1
        p2 = one_t * p2 + chi * c * f2
        p_norm = math.sqrt(float(p1 @ p1) + float(p2 @ p2))

        v_hist[k - 1] = v_norm
        f_hist[k - 1] = f_norm
        p_hist[k - 1] = p_norm
        sv_full += v_norm
        sf_full += f_norm
        pv[k] = sv_full
        pf[k] = sf_full

        if v_norm <= rho and f_norm <= eta:
            status = SUCCESS
            k_done = k
            break
        if penalty_test and k % 2 == 0 and k >= 4:
            lo = 0 if window_full else k // 2 - 1
            scale = 2.0 / (k + 2)
            s_v = scale * (pv[k] - pv[lo])
            s_f = scale * (pf[k] - pf[lo])
            if s_v / rho + math.sqrt(c**3 / k) * s_f / eta <= 1.0:
                status = PENALTY_TOO_SMALL
                k_done = k
                break

    x[:n], x[n : 2 * n], x[2 * n :] = x1, x2, x3
    p[:n], p[n:] = p1, p2
    q_out[:n] = one_t * p1_prev + c * f1
    q_out[n:] = one_t * p2_prev + c * f2
    v_out[:n] = -c * d3 - d1 / lam
    v_out[n : 2 * n] = -c * d3 - d2 / lam
    v_out[2 * n :] = -d3 / lam
    return status, k_done
