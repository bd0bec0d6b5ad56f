"""Pure-numpy kernel backend.

Convolutions go through im2col + BLAS matmul; the PDE stencils use np.roll.
This backend is the portable fallback and the parity reference for the
numba backend (tests compare the two to tight tolerances).
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BACKEND = "numpy"


def _im2col(x, k):
    """[B,C,H,W] -> columns [B*H*W, C*k*k] for a stride-1 same-padded conv."""
    b, c, h, w = x.shape
    p = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    win = sliding_window_view(xp, (k, k), axis=(2, 3))  # [B,C,H,W,k,k]
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(b * h * w, c * k * k)


def conv2d_fwd(x, w):
    """Stride-1, zero same-padded correlation: [B,Ci,H,W] x [Co,Ci,k,k] -> [B,Co,H,W]."""
    b, ci, h, wid = x.shape
    co, _, k, _ = w.shape
    cols = _im2col(x, k)
    y = cols @ w.reshape(co, ci * k * k).T
    return np.ascontiguousarray(y.reshape(b, h, wid, co).transpose(0, 3, 1, 2))


def conv2d_bwd_x(dy, w):
    """Gradient wrt the conv input: correlate dy with channel-swapped, 180-rotated kernels."""
    w_flip = np.ascontiguousarray(w[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
    return conv2d_fwd(dy, w_flip)


def conv2d_bwd_w(x, dy, k):
    """Gradient wrt the conv kernels: [B,Ci,H,W], [B,Co,H,W] -> [Co,Ci,k,k]."""
    b, ci, h, wid = x.shape
    co = dy.shape[1]
    cols = _im2col(x, k)
    dyr = dy.transpose(0, 2, 3, 1).reshape(b * h * wid, co)
    dw = dyr.T @ cols
    return dw.reshape(co, ci, k, k)


def swe_lxf_step(hc, mu, mv, dt, dx, g):
    """One Lax-Friedrichs step of the 2D shallow-water system, periodic boundaries.

    Conservative variables: depth hc, momentum densities (mu, mv).
    Returns the three updated arrays.
    """
    u = mu / hc
    v = mv / hc
    ph = 0.5 * g * hc * hc

    f0, f1, f2 = mu, mu * u + ph, mu * v
    g0, g1, g2 = mv, mv * u, mv * v + ph

    r = dt / (2.0 * dx)

    def step(q, fq, gq):
        avg = 0.25 * (
            np.roll(q, -1, axis=0) + np.roll(q, 1, axis=0)
            + np.roll(q, -1, axis=1) + np.roll(q, 1, axis=1)
        )
        dfx = np.roll(fq, -1, axis=0) - np.roll(fq, 1, axis=0)
        dgy = np.roll(gq, -1, axis=1) - np.roll(gq, 1, axis=1)
        return avg - r * dfx - r * dgy

    return step(hc, f0, g0), step(mu, f1, g1), step(mv, f2, g2)


def advdiff_step(c, vx, vy, kappa, dt, dx):
    """One upwind-advection + centered-diffusion step of a scalar field, periodic."""
    if vx >= 0.0:
        adv_x = vx * (c - np.roll(c, 1, axis=0))
    else:
        adv_x = vx * (np.roll(c, -1, axis=0) - c)
    if vy >= 0.0:
        adv_y = vy * (c - np.roll(c, 1, axis=1))
    else:
        adv_y = vy * (np.roll(c, -1, axis=1) - c)
    lap = (
        np.roll(c, -1, axis=0) + np.roll(c, 1, axis=0)
        + np.roll(c, -1, axis=1) + np.roll(c, 1, axis=1)
        - 4.0 * c
    )
    return c - (dt / dx) * (adv_x + adv_y) + (kappa * dt / (dx * dx)) * lap
