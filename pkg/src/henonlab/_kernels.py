"""Compiled inner loops for escape-rate evaluation.

Both directions of iteration reduce to the scalar recursion

    new = alpha_i * prev + beta_i * p_i(cur)

over a periodic factor schedule: forward iteration has ``alpha = a``,
``beta = 1`` acting on ``(cur, prev) = (z, w)``; backward iteration has
``alpha = 1/a``, ``beta = -1/a`` on ``(cur, prev) = (w, z)`` with the factors
reversed.
"""

import math

import numba
import numpy as np

ESCAPED = 0
BOUNDED = 1
UNDECIDED = 2

_RING = 8


@numba.njit(cache=True, nogil=True)
def _horner(row, x):
    p = 0j
    dp = 0j
    for c in row:
        dp = dp * x + p
        p = p * x + c
    return p, dp


@numba.njit(cache=True, nogil=True)
def green_kernel(cur0, prev0, dcur0, dprev0, alpha, beta, polys, degrees, abound,
                 radius, cap, tol, out_g, out_grad, out_status, out_steps):
    """Escape rate, its gradient modulus along the tangent, and a status code.

    ``cap`` counts full-map iterations; ``abound[i]`` bounds
    ``|new/(beta cur^d) - 1| * |cur|`` on the escape region.
    """
    k = alpha.shape[0]
    npts = cur0.shape[0]
    ringc = np.empty(_RING, dtype=np.complex128)
    ringp = np.empty(_RING, dtype=np.complex128)
    for idx in range(npts):
        cur = cur0[idx]
        prev = prev0[idx]
        dcur = dcur0[idx]
        dprev = dprev0[idx]
        status = UNDECIDED
        j = 0
        logD = 0.0
        entered = False
        left_box_late = False
        half = (cap * k) // 2
        while j < cap * k:
            acur = abs(cur)
            if acur >= radius and acur >= abs(prev):
                entered = True
                break
            if j >= half and (acur > radius or abs(prev) > radius):
                left_box_late = True
            if j % k == 0:
                t = j // k
                if t >= _RING:
                    conv = False
                    for per in range(1, _RING + 1):
                        slot = (t - per) % _RING
                        scale = max(1.0, abs(cur))
                        if abs(cur - ringc[slot]) < 1e-12 * scale and abs(prev - ringp[slot]) < 1e-12 * scale:
                            conv = True
                            break
                    if conv:
                        status = BOUNDED
                        break
                ringc[t % _RING] = cur
                ringp[t % _RING] = prev
            i = j % k
            p, dp = _horner(polys[i], cur)
            new = alpha[i] * prev + beta[i] * p
            dnew = alpha[i] * dprev + beta[i] * dp * dcur
            prev = cur
            dprev = dcur
            cur = new
            dcur = dnew
            logD += math.log(degrees[i])
            j += 1
        out_steps[idx] = j
        if not entered:
            if status != BOUNDED:
                status = UNDECIDED if left_box_late else BOUNDED
            out_g[idx] = 0.0
            out_grad[idx] = 0.0
            out_status[idx] = status
            continue
        # inside the escape region: telescoping sum of log|u_j| / D_j
        jj = j
        g = 0.0
        grad = 0.0
        while True:
            i = jj % k
            D = math.exp(-logD)
            g = math.log(abs(cur)) * D
            grad = abs(dcur / cur) * D if cur != 0 else 0.0
            eps = abound[i] / abs(cur)
            if eps >= 1.0:
                eps = 0.999999
            bound = -math.log(1.0 - eps) * D / degrees[i] * (4.0 / 3.0)
            if bound < tol or abs(cur) > 1e100 or D == 0.0:
                break
            p, dp = _horner(polys[i], cur)
            new = alpha[i] * prev + beta[i] * p
            dnew = alpha[i] * dprev + beta[i] * dp * dcur
            prev = cur
            dprev = dcur
            cur = new
            dcur = dnew
            logD += math.log(degrees[i])
            jj += 1
        # exact contribution of the leading coefficients beyond the stopping index
        lb = 0.0
        logDt = logD
        for s in range(2000):
            i = (jj + s) % k
            logDt += math.log(degrees[i])
            term = math.log(abs(beta[i])) * math.exp(-logDt)
            lb += term
            if abs(term) <= 1e-18 * abs(lb) or logDt > 700:
                break
        out_g[idx] = max(g + lb, 0.0)
        out_grad[idx] = grad
        out_status[idx] = ESCAPED
    return out_g
