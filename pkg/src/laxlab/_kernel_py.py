"""Pure-numpy fallback for the dynamic-programming kernels.

Mirrors the compiled extension: same candidate sets, same tie-breaking
(first minimum in candidate order wins), so the two backends agree up to
floating-point associativity.  Used when the extension is unavailable and
for the 3-D / cubic-interpolation paths the extension does not cover.
"""

from __future__ import annotations

import numpy as np


def _bilin_grid(values: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    n = values.shape[0]
    ix = np.floor(gx).astype(np.int64)
    iy = np.floor(gy).astype(np.int64)
    fx = gx - ix
    fy = gy - iy
    ix0 = np.mod(ix, n)
    iy0 = np.mod(iy, n)
    ix1 = ix0 + 1
    ix1[ix1 == n] = 0
    iy1 = iy0 + 1
    iy1[iy1 == n] = 0
    return (
        values[ix0, iy0] * (1 - fx) * (1 - fy)
        + values[ix1, iy0] * fx * (1 - fy)
        + values[ix0, iy1] * (1 - fx) * fy
        + values[ix1, iy1] * fx * fy
    )


def _objective(u, xmx, xmy, gi, gj, tau_h, tau, eff_inf, vx, vy):
    dx = tau_h * vx
    dy = tau_h * vy
    uy = np.minimum(_bilin_grid(u, gi - dx, gj - dy), eff_inf)
    bx = _bilin_grid(xmx, gi - 0.5 * dx, gj - 0.5 * dy)
    by = _bilin_grid(xmy, gi - 0.5 * dx, gj - 0.5 * dy)
    return uy + tau * 0.5 * ((vx - bx) ** 2 + (vy - by) ** 2)


def step_vgrid(u, xmx, xmy, tau, h, eff_inf, vels, out, out_vx, out_vy):
    n = u.shape[0]
    tau_h = tau / h
    gi, gj = np.meshgrid(np.arange(n, dtype=float), np.arange(n, dtype=float), indexing="ij")
    best = np.full_like(u, np.inf)
    bvx = np.zeros_like(u)
    bvy = np.zeros_like(u)
    for vx, vy in vels:
        cand = _objective(u, xmx, xmy, gi, gj, tau_h, tau, eff_inf, vx, vy)
        better = cand < best
        best = np.where(better, cand, best)
        bvx = np.where(better, vx, bvx)
        bvy = np.where(better, vy, bvy)
    np.minimum(best, eff_inf, out=out)
    out_vx[...] = bvx
    out_vy[...] = bvy


def _window(u, xmx, xmy, gi, gj, tau_h, tau, eff_inf, cx, cy, dv, half_k, state):
    best, bvx, bvy = state
    for a in range(-half_k, half_k + 1):
        vx = cx + a * dv
        for b in range(-half_k, half_k + 1):
            vy = cy + b * dv
            cand = _objective(u, xmx, xmy, gi, gj, tau_h, tau, eff_inf, vx, vy)
            better = cand < best
            best = np.where(better, cand, best)
            bvx = np.where(better, vx, bvx)
            bvy = np.where(better, vy, bvy)
    return best, bvx, bvy


def step_refined(u, xmx, xmy, tau, h, eff_inf, v_max, cascade, warm_vx, warm_vy,
                 out, out_vx, out_vy):
    n = u.shape[0]
    tau_h = tau / h
    gi, gj = np.meshgrid(np.arange(n, dtype=float), np.arange(n, dtype=float), indexing="ij")
    bvx = warm_vx.copy()
    bvy = warm_vy.copy()
    best = _objective(u, xmx, xmy, gi, gj, tau_h, tau, eff_inf, bvx, bvy)
    state = (best, bvx, bvy)
    zero = np.zeros_like(u)
    state = _window(u, xmx, xmy, gi, gj, tau_h, tau, eff_inf, zero, zero, v_max, 1, state)
    state = _window(u, xmx, xmy, gi, gj, tau_h, tau, eff_inf, state[1], state[2], v_max / 3.0, 1, state)
    state = _window(u, xmx, xmy, gi, gj, tau_h, tau, eff_inf, state[1], state[2], v_max / 9.0, 1, state)
    state = _window(u, xmx, xmy, gi, gj, tau_h, tau, eff_inf, warm_vx, warm_vy, 0.5, 2, state)
    state = _window(u, xmx, xmy, gi, gj, tau_h, tau, eff_inf, xmx, xmy, 0.5, 1, state)
    for dv in cascade:
        state = _window(u, xmx, xmy, gi, gj, tau_h, tau, eff_inf, state[1], state[2], dv, 1, state)
    best, bvx, bvy = state
    np.minimum(best, eff_inf, out=out)
    out_vx[...] = bvx
    out_vy[...] = bvy
