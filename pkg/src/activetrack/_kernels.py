"""Compiled inner loops for the O(I^2) transition mixture.

Mirrors :func:`activetrack.kinematics.log_transition_matrix` followed by a
weighted log-sum-exp over previous particles, without materializing the
``I x I`` matrix.
"""

import math

import numpy as np
from numba import njit

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

# fast-math without the no-inf / no-nan assumptions: -inf marks impossible pairs
_FAST = {"nsz", "arcp", "contract", "afn", "reassoc"}


@njit(cache=True, fastmath=_FAST)
def log_mixture(nxt, prev, log_w, sig, ang, stop, dt, tol):
    """``out[i] = log sum_j exp(log p(nxt_i | prev_j) + log_w[j])``.

    States hold ``k`` agents in consecutive 4-column blocks
    ``[x, y, theta, v]``; ``sig[a]`` is ``(sigma_x, sigma_y, sigma_v,
    sigma_theta)`` for agent ``a``.
    """
    n = nxt.shape[0]
    m = prev.shape[0]
    k = sig.shape[0]
    # per agent coordinate, ordered (theta, v, x, y): scale, offset, deterministic flag
    scale = np.zeros((k, 4))
    det = np.zeros((k, 4), dtype=np.bool_)
    offset = 0.0
    for a in range(k):
        for q, col in enumerate((3, 2, 0, 1)):
            s = sig[a, col]
            if s > 0.0:
                scale[a, q] = 0.5 / (s * s)
                offset -= math.log(s) + _LOG_SQRT_2PI
            else:
                det[a, q] = True
    any_det = np.zeros(k, dtype=np.bool_)
    for a in range(k):
        any_det[a] = det[a, 0] or det[a, 1] or det[a, 2] or det[a, 3]
    base = np.empty((n, k, 2))
    for i in range(n):
        for a in range(k):
            c = 4 * a
            step = 0.0 if stop[a] else nxt[i, c + 3] * dt
            rad = math.radians(nxt[i, c + 2])
            base[i, a, 0] = nxt[i, c] - math.cos(rad) * step
            base[i, a, 1] = nxt[i, c + 1] - math.sin(rad) * step
    # column-major copy of prev so the inner loops run over contiguous memory
    cols = np.ascontiguousarray(prev.T)
    out = np.empty(n)
    tmp = np.empty(m)
    for i in range(n):
        for j in range(m):
            tmp[j] = log_w[j]
        for a in range(k):
            c = 4 * a
            th = nxt[i, c + 2] - ang[a] * dt
            v = nxt[i, c + 3]
            bx = base[i, a, 0]
            by = base[i, a, 1]
            s0, s1, s2, s3 = scale[a, 0], scale[a, 1], scale[a, 2], scale[a, 3]
            for j in range(m):
                d = th - cols[c + 2, j]
                d = d - 360.0 * math.floor((d + 180.0) * (1.0 / 360.0))
                r1 = v - cols[c + 3, j]
                r2 = bx - cols[c, j]
                r3 = by - cols[c + 1, j]
                tmp[j] -= s0 * d * d + s1 * r1 * r1 + s2 * r2 * r2 + s3 * r3 * r3
            if any_det[a]:
                for j in range(m):
                    d = th - cols[c + 2, j]
                    d = d - 360.0 * math.floor((d + 180.0) * (1.0 / 360.0))
                    if ((det[a, 0] and abs(d) > tol) or (det[a, 1] and abs(v - cols[c + 3, j]) > tol)
                            or (det[a, 2] and abs(bx - cols[c, j]) > tol)
                            or (det[a, 3] and abs(by - cols[c + 1, j]) > tol)):
                        tmp[j] = -np.inf
        top = -np.inf
        for j in range(m):
            top = max(top, tmp[j])
        if top == -np.inf:
            out[i] = -np.inf
            continue
        acc = 0.0
        for j in range(m):
            acc += math.exp(tmp[j] - top)
        out[i] = top + offset + math.log(acc)
    return out


@njit(cache=True)
def _bracket(knots, q):
    n = knots.shape[0]
    if n == 1:
        return 0, 0, 0.0
    if q <= knots[0]:
        return 0, 1, 0.0
    if q >= knots[n - 1]:
        return n - 2, n - 1, 1.0
    hi = np.searchsorted(knots, q, side="right")
    lo = hi - 1
    return lo, hi, (q - knots[lo]) / (knots[hi] - knots[lo])


@njit(cache=True)
def table_params(robot, source, d_knots, a_knots, mu, sigma):
    """Bilinear table ``(mu, sigma)`` at each robot/source row pair.

    Same geometry and clamping as the numpy path in
    :mod:`activetrack.observation`.
    """
    n = robot.shape[0]
    mu_out = np.empty(n)
    sig_out = np.empty(n)
    for r in range(n):
        dx = source[r, 0] - robot[r, 0]
        dy = source[r, 1] - robot[r, 1]
        dist = math.hypot(dx, dy)
        rel = math.degrees(math.atan2(dy, dx)) - robot[r, 2]
        rel = rel - 360.0 * math.floor((rel + 180.0) / 360.0)
        if rel >= 180.0:
            rel -= 360.0
        i0, i1, fd = _bracket(d_knots, dist)
        j0, j1, fa = _bracket(a_knots, abs(rel))
        w00 = (1.0 - fd) * (1.0 - fa)
        w01 = (1.0 - fd) * fa
        w10 = fd * (1.0 - fa)
        w11 = fd * fa
        mu_out[r] = w00 * mu[i0, j0] + w01 * mu[i0, j1] + w10 * mu[i1, j0] + w11 * mu[i1, j1]
        sig_out[r] = (w00 * sigma[i0, j0] + w01 * sigma[i0, j1] + w10 * sigma[i1, j0]
                      + w11 * sigma[i1, j1])
    return mu_out, sig_out
