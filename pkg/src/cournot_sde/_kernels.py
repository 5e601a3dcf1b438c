"""Compiled inner loops for the linear SDE and its angular process.

All kernels consume pre-generated standard normals so that randomness stays
under the control of the seeded Philox streams in :mod:`cournot_sde._rng`.
Noise enters through a stack ``ch`` of 2x2 matrices, one per Wiener channel.
"""

import math

import numpy as np
from numba import njit

_TINY = 1e-300
_HUGE = 1e300


@njit(cache=True, nogil=True)
def advance_angles(theta, z, h, a, ch):
    """Euler-Maruyama for the angle SDE, in place, over ``z.shape[0]`` steps.

    theta: (n_chains,), z: (n_steps, n_chains, n_channels) standard normals.
    """
    sq = math.sqrt(h)
    n_steps, n_chains, n_ch = z.shape
    for j in range(n_chains):
        th = theta[j]
        for t in range(n_steps):
            c = math.cos(th)
            s = math.sin(th)
            q3 = a[1, 0] * c * c + (a[1, 1] - a[0, 0]) * c * s - a[0, 1] * s * s
            drift = q3
            kick = 0.0
            for k in range(n_ch):
                m = ch[k]
                q2 = m[0, 0] * c * c + (m[0, 1] + m[1, 0]) * c * s + m[1, 1] * s * s
                q4 = m[1, 0] * c * c + (m[1, 1] - m[0, 0]) * c * s - m[0, 1] * s * s
                drift -= q2 * q4
                kick += q4 * z[t, j, k]
            th = th + drift * h + kick * sq
        theta[j] = th


@njit(cache=True, nogil=True)
def log_growth(a, ch, e0, z, h, coupled, renormalize):
    """Accumulated log-norm growth of one Euler-Maruyama path of du = Au dt + sum C_k u dW_k.

    Returns (log growth at step h, log growth of the 2h path driven by summed
    increments, overflow flag). The 2h path is only advanced when ``coupled``.
    With ``renormalize`` the state is rescaled to unit norm after every step.
    """
    sq = math.sqrt(h)
    n_steps, n_ch = z.shape
    u1, u2 = e0[0], e0[1]
    v1, v2 = e0[0], e0[1]
    lg = 0.0
    lg2 = 0.0
    dw_acc = np.zeros(n_ch)
    overflow = False
    for t in range(n_steps):
        n1 = (a[0, 0] * u1 + a[0, 1] * u2) * h
        n2 = (a[1, 0] * u1 + a[1, 1] * u2) * h
        for k in range(n_ch):
            dw = z[t, k] * sq
            m = ch[k]
            n1 += (m[0, 0] * u1 + m[0, 1] * u2) * dw
            n2 += (m[1, 0] * u1 + m[1, 1] * u2) * dw
            dw_acc[k] += dw
        u1 += n1
        u2 += n2
        r = math.sqrt(u1 * u1 + u2 * u2)
        if renormalize:
            lg += math.log(r)
            u1 /= r
            u2 /= r
        elif not (_TINY < r < _HUGE):
            overflow = True
            break
        if coupled and t % 2 == 1:
            w1 = (a[0, 0] * v1 + a[0, 1] * v2) * 2.0 * h
            w2 = (a[1, 0] * v1 + a[1, 1] * v2) * 2.0 * h
            for k in range(n_ch):
                m = ch[k]
                w1 += (m[0, 0] * v1 + m[0, 1] * v2) * dw_acc[k]
                w2 += (m[1, 0] * v1 + m[1, 1] * v2) * dw_acc[k]
                dw_acc[k] = 0.0
            v1 += w1
            v2 += w2
            r2 = math.sqrt(v1 * v1 + v2 * v2)
            if renormalize:
                lg2 += math.log(r2)
                v1 /= r2
                v2 /= r2
            elif not (_TINY < r2 < _HUGE):
                overflow = True
                break
        elif not coupled:
            for k in range(n_ch):
                dw_acc[k] = 0.0
    if not renormalize and not overflow:
        lg = math.log(math.sqrt(u1 * u1 + u2 * u2))
        if coupled:
            lg2 = math.log(math.sqrt(v1 * v1 + v2 * v2))
    return lg, lg2, overflow


@njit(cache=True, nogil=True)
def log_norm_sq_series(a, ch, e0, z, h, record_every):
    """log ||u(t)||**2 of one Euler-Maruyama path, recorded every ``record_every`` steps.

    Entry 0 is the initial value; the state is renormalized every step so the
    log stays finite for any growth or decay rate.
    """
    sq = math.sqrt(h)
    n_steps, n_ch = z.shape
    n_rec = n_steps // record_every + 1
    out = np.empty(n_rec)
    u1, u2 = e0[0], e0[1]
    acc = math.log(u1 * u1 + u2 * u2)
    out[0] = acc
    r0 = math.sqrt(u1 * u1 + u2 * u2)
    u1 /= r0
    u2 /= r0
    for t in range(n_steps):
        n1 = (a[0, 0] * u1 + a[0, 1] * u2) * h
        n2 = (a[1, 0] * u1 + a[1, 1] * u2) * h
        for k in range(n_ch):
            dw = z[t, k] * sq
            m = ch[k]
            n1 += (m[0, 0] * u1 + m[0, 1] * u2) * dw
            n2 += (m[1, 0] * u1 + m[1, 1] * u2) * dw
        u1 += n1
        u2 += n2
        r2 = u1 * u1 + u2 * u2
        if r2 == 0.0:
            acc = -math.inf
            r = 1.0
        else:
            acc += math.log(r2)
            r = math.sqrt(r2)
        u1 /= r
        u2 /= r
        if (t + 1) % record_every == 0:
            out[(t + 1) // record_every] = acc
    return out


# integrator codes for step_game
EM = 0
TAYLOR2 = 1
TAYLOR2_PRINTED = 2

# truncation reasons
OK = 0
NON_POSITIVE = 1
SINGULAR = 2
NON_FINITE = 3


@njit(cache=True, nogil=True)
def step_game(scheme, x_init, x0, c, k, ch, dw, h, eps_state, out):
    """Integrate the game SDE on the increments ``dw`` (n_steps, n_channels).

    ``c`` holds the cost slopes rewritten as x_j0 / s0**2 so that the drift
    vanishes exactly at x0; noise of channel m is ch[m] @ (x - x0).
    Fills ``out`` (n_steps + 1, 2) and returns (steps done, reason, bad x1, bad x2).
    """
    n_steps, n_ch = dw.shape
    x1, x2 = x_init[0], x_init[1]
    out[0, 0] = x1
    out[0, 1] = x2
    for n in range(n_steps):
        s = x1 + x2
        s2 = s * s
        s3 = s2 * s
        f1 = k[0] * (x2 / s2 - c[0])
        f2 = k[1] * (x1 / s2 - c[1])
        d1 = x1 - x0[0]
        d2 = x2 - x0[1]
        if scheme == EM:
            y1 = x1 + h * f1
            y2 = x2 + h * f2
            for m in range(n_ch):
                y1 += (ch[m, 0, 0] * d1 + ch[m, 0, 1] * d2) * dw[n, m]
                y2 += (ch[m, 1, 0] * d1 + ch[m, 1, 1] * d2) * dw[n, m]
        else:
            b = ch[0]
            g = dw[n, 0]
            g1 = b[0, 0] * d1 + b[0, 1] * d2
            g2 = b[1, 0] * d1 + b[1, 1] * d2
            y1 = x1 + h * f1 + g1 * g + b[0, 0] * g1 * (g * g - h) / 2
            y2 = x2 + h * f2 + g2 * g + b[1, 1] * g2 * (g * g - h) / 2
            if scheme == TAYLOR2:
                # Jacobian and Hessians of the effective drift
                j11 = -2.0 * k[0] * x2 / s3
                j12 = k[0] * (x1 - x2) / s3
                j21 = k[1] * (x2 - x1) / s3
                j22 = -2.0 * k[1] * x1 / s3
                s4 = s3 * s
                h1_11 = k[0] * 6.0 * x2 / s4
                h1_12 = k[0] * (4.0 * x2 - 2.0 * x1) / s4
                h1_22 = k[0] * (2.0 * x2 - 4.0 * x1) / s4
                h2_11 = k[1] * (2.0 * x1 - 4.0 * x2) / s4
                h2_12 = k[1] * (4.0 * x1 - 2.0 * x2) / s4
                h2_22 = k[1] * 6.0 * x1 / s4
                l0f1 = j11 * f1 + j12 * f2 + 0.5 * (
                    h1_11 * g1 * g1 + 2.0 * h1_12 * g1 * g2 + h1_22 * g2 * g2)
                l0f2 = j21 * f1 + j22 * f2 + 0.5 * (
                    h2_11 * g1 * g1 + 2.0 * h2_12 * g1 * g2 + h2_22 * g2 * g2)
                mix1 = j11 * g1 + j12 * g2 + b[0, 0] * f1 + b[0, 1] * f2
                mix2 = j21 * g1 + j22 * g2 + b[1, 0] * f1 + b[1, 1] * f2
            else:
                p = x1 * x2 / s3
                l0f1 = -2.0 * p * f1 + g1 * p
                l0f2 = -2.0 * p * f2 + g2 * p
                mix1 = (b[0, 0] - 2.0 * x2 / s3) * g1
                mix2 = (b[1, 0] - 2.0 * x1 / s3) * g2
            y1 += l0f1 * h * h / 2 + mix1 * h * g / 2
            y2 += l0f2 * h * h / 2 + mix2 * h * g / 2
        if not (math.isfinite(y1) and math.isfinite(y2)):
            return n, NON_FINITE, y1, y2
        if not (y1 > 0.0 and y2 > 0.0):
            return n, NON_POSITIVE, y1, y2
        if not y1 + y2 > eps_state:
            return n, SINGULAR, y1, y2
        x1, x2 = y1, y2
        out[n + 1, 0] = x1
        out[n + 1, 1] = x2
    return n_steps, OK, math.nan, math.nan
