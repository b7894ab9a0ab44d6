# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Hot kernels for the semi-Lagrangian dynamic-programming step (d = 2).

Each node minimizes  interp(u, x - tau*v) + tau * L(t + tau/2, x - tau*v/2, v)
over candidate velocities.  Two search modes:

* vgrid: a caller-supplied fixed candidate lattice (the canonical operator;
  exactly monotone and shift-equivariant since the candidate set is
  field-independent).
* refined: a warm-started cascade of shrinking 3x3/5x5 windows seeded by
  the previous step's argmin, the drift velocity and a coarse global scan.
  Orders of magnitude cheaper than a dense lattice of equal resolution.
"""

import numpy as np

cimport numpy as cnp


cdef inline double _bilin(const double[:, ::1] a, int n, double gx, double gy) noexcept nogil:
    cdef long ix = <long>gx
    if gx < ix:  # floor for negatives
        ix -= 1
    cdef long iy = <long>gy
    if gy < iy:
        iy -= 1
    cdef double fx = gx - ix
    cdef double fy = gy - iy
    cdef long ix0 = ix % n
    if ix0 < 0:
        ix0 += n
    cdef long iy0 = iy % n
    if iy0 < 0:
        iy0 += n
    cdef long ix1 = ix0 + 1
    if ix1 == n:
        ix1 = 0
    cdef long iy1 = iy0 + 1
    if iy1 == n:
        iy1 = 0
    return (a[ix0, iy0] * (1.0 - fx) * (1.0 - fy)
            + a[ix1, iy0] * fx * (1.0 - fy)
            + a[ix0, iy1] * (1.0 - fx) * fy
            + a[ix1, iy1] * fx * fy)


cdef inline void _bilin2(const double[:, ::1] a, const double[:, ::1] b,
                         int n, double gx, double gy,
                         double* va, double* vb) noexcept nogil:
    cdef long ix = <long>gx
    if gx < ix:
        ix -= 1
    cdef long iy = <long>gy
    if gy < iy:
        iy -= 1
    cdef double fx = gx - ix
    cdef double fy = gy - iy
    cdef long ix0 = ix % n
    if ix0 < 0:
        ix0 += n
    cdef long iy0 = iy % n
    if iy0 < 0:
        iy0 += n
    cdef long ix1 = ix0 + 1
    if ix1 == n:
        ix1 = 0
    cdef long iy1 = iy0 + 1
    if iy1 == n:
        iy1 = 0
    cdef double w00 = (1.0 - fx) * (1.0 - fy)
    cdef double w10 = fx * (1.0 - fy)
    cdef double w01 = (1.0 - fx) * fy
    cdef double w11 = fx * fy
    va[0] = (a[ix0, iy0] * w00 + a[ix1, iy0] * w10
             + a[ix0, iy1] * w01 + a[ix1, iy1] * w11)
    vb[0] = (b[ix0, iy0] * w00 + b[ix1, iy0] * w10
             + b[ix0, iy1] * w01 + b[ix1, iy1] * w11)


cdef inline double _objective(const double[:, ::1] u,
                              const double[:, ::1] xmx,
                              const double[:, ::1] xmy,
                              int n, double gi, double gj,
                              double tau_h, double tau,
                              double eff_inf,
                              double vx, double vy) noexcept nogil:
    # departure point and chord midpoint, in grid coordinates
    cdef double dx = tau_h * vx
    cdef double dy = tau_h * vy
    cdef double uy = _bilin(u, n, gi - dx, gj - dy)
    if uy > eff_inf:
        uy = eff_inf
    cdef double bx, by
    _bilin2(xmx, xmy, n, gi - 0.5 * dx, gj - 0.5 * dy, &bx, &by)
    cdef double ex = vx - bx
    cdef double ey = vy - by
    return uy + tau * 0.5 * (ex * ex + ey * ey)


def step_vgrid(const double[:, ::1] u,
               const double[:, ::1] xmx,
               const double[:, ::1] xmy,
               double tau, double h, double eff_inf,
               const double[:, ::1] vels,
               double[:, ::1] out,
               double[:, ::1] out_vx,
               double[:, ::1] out_vy):
    """Minimize over the fixed candidate list vels (k, 2); first minimum wins."""
    cdef int n = u.shape[0]
    cdef int nv = vels.shape[0]
    cdef double tau_h = tau / h
    cdef int i, j, k
    cdef double best, cand, bvx, bvy, gi, gj
    with nogil:
        for i in range(n):
            gi = i
            for j in range(n):
                gj = j
                best = eff_inf
                bvx = 0.0
                bvy = 0.0
                for k in range(nv):
                    cand = _objective(u, xmx, xmy, n, gi, gj, tau_h, tau,
                                      eff_inf, vels[k, 0], vels[k, 1])
                    if cand < best:
                        best = cand
                        bvx = vels[k, 0]
                        bvy = vels[k, 1]
                out[i, j] = best
                out_vx[i, j] = bvx
                out_vy[i, j] = bvy
    return None


cdef inline double _window(const double[:, ::1] u,
                           const double[:, ::1] xmx,
                           const double[:, ::1] xmy,
                           int n, double gi, double gj,
                           double tau_h, double tau, double eff_inf,
                           double cx, double cy, double dv, int half_k,
                           double best, double* bvx, double* bvy) noexcept nogil:
    cdef int a, b
    cdef double vx, vy, cand
    for a in range(-half_k, half_k + 1):
        vx = cx + a * dv
        for b in range(-half_k, half_k + 1):
            vy = cy + b * dv
            cand = _objective(u, xmx, xmy, n, gi, gj, tau_h, tau, eff_inf, vx, vy)
            if cand < best:
                best = cand
                bvx[0] = vx
                bvy[0] = vy
    return best


def step_refined(const double[:, ::1] u,
                 const double[:, ::1] xmx,
                 const double[:, ::1] xmy,
                 double tau, double h, double eff_inf, double v_max,
                 const double[::1] cascade,
                 const double[:, ::1] warm_vx,
                 const double[:, ::1] warm_vy,
                 double[:, ::1] out,
                 double[:, ::1] out_vx,
                 double[:, ::1] out_vy):
    """Warm-started cascade search; returns values and argmin velocities."""
    cdef int n = u.shape[0]
    cdef double tau_h = tau / h
    cdef int i, j, lev
    cdef int nlev = cascade.shape[0]
    cdef double gi, gj, best, bvx, bvy, dv
    with nogil:
        for i in range(n):
            gi = i
            for j in range(n):
                gj = j
                bvx = warm_vx[i, j]
                bvy = warm_vy[i, j]
                best = _objective(u, xmx, xmy, n, gi, gj, tau_h, tau,
                                  eff_inf, bvx, bvy)
                # coarse global scan + bridges toward the global basin
                best = _window(u, xmx, xmy, n, gi, gj, tau_h, tau, eff_inf,
                               0.0, 0.0, v_max, 1, best, &bvx, &bvy)
                best = _window(u, xmx, xmy, n, gi, gj, tau_h, tau, eff_inf,
                               bvx, bvy, v_max / 3.0, 1, best, &bvx, &bvy)
                best = _window(u, xmx, xmy, n, gi, gj, tau_h, tau, eff_inf,
                               bvx, bvy, v_max / 9.0, 1, best, &bvx, &bvy)
                # warm-start window around the previous argmin
                best = _window(u, xmx, xmy, n, gi, gj, tau_h, tau, eff_inf,
                               warm_vx[i, j], warm_vy[i, j], 0.5, 2,
                               best, &bvx, &bvy)
                # drift window around the midpoint field at the node
                best = _window(u, xmx, xmy, n, gi, gj, tau_h, tau, eff_inf,
                               xmx[i, j], xmy[i, j], 0.5, 1, best, &bvx, &bvy)
                # contraction cascade
                for lev in range(nlev):
                    dv = cascade[lev]
                    best = _window(u, xmx, xmy, n, gi, gj, tau_h, tau, eff_inf,
                                   bvx, bvy, dv, 1, best, &bvx, &bvy)
                if best > eff_inf:
                    best = eff_inf
                out[i, j] = best
                out_vx[i, j] = bvx
                out_vy[i, j] = bvy
    return None
