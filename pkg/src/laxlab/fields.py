"""The explicit vector fields and their isotopies.

Z is the autonomous radial field: it contracts each marked ball onto its
center and pushes the spin-up shell A_n onto the attracting boundary of
C_n.  The rotation isotopy turns each closed region C_n by eta(t)/rho_n of
a revolution per period, interpolated to zero across the shear shell D_n.
The full time-periodic field is X_t = Y_t + dR_t . Z o R_t^{-1}, and the
kinetic cost of deviating from it defines the Lagrangian/Hamiltonian pair.

All angles are in turns; Cartesian velocities carry the 2*pi factor.
Vectorized evaluators accept point arrays shaped (..., d).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import TWO_PI, circle_distance, from_polar, rotate_planar, wrap
from .params import ConstructionParams
from .profiles import ETA_PRIME_MAX, chi, chi_prime, eta, eta_prime, eta_winding


@dataclass
class FieldSample:
    value: np.ndarray
    jacobian: np.ndarray | None = None


def _planar_radius(x):
    return np.hypot(x[..., 0], x[..., 1])


def _meridional(p: ConstructionParams, x: np.ndarray, n: int):
    """Offset from the circle O_n, its norm, and the planar radius.

    The offset m has planar part (rp - r_n) * u_r and carries the x3.. axes
    unchanged; |m| is the distance to the circle.
    """
    rp = _planar_radius(x)
    m = np.zeros_like(x)
    scale = (rp - p.r[n]) / np.where(rp == 0.0, 1.0, rp)
    m[..., 0] = scale * x[..., 0]
    m[..., 1] = scale * x[..., 1]
    if p.d > 2:
        m[..., 2:] = x[..., 2:]
    s = np.linalg.norm(m, axis=-1)
    return m, s, rp


def z_field(p: ConstructionParams, x: np.ndarray, jac: bool = False) -> FieldSample:
    """The autonomous contraction field (analytic Jacobian on request)."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    pts = wrap(p, np.atleast_2d(x))
    val = np.zeros_like(pts)
    jmat = np.zeros(pts.shape + (p.d,)) if jac else None

    for n in range(p.N):
        delta = p.delta[n]
        sig = p.sigma[n]
        m, s, rp = _meridional(p, pts, n)

        near = s < delta  # tube: balls live here
        if np.any(near):
            unresolved = near.copy()
            for i in range(p.rho[n]):
                center = from_polar(p.r[n], i / p.rho[n], (0.0,) * (p.d - 2))
                w = pts - center
                dist = np.linalg.norm(w, axis=-1)
                sel = unresolved & (dist < delta)
                if not np.any(sel):
                    continue
                u = dist[sel] ** 2 / delta**2
                c = chi(u)
                val[sel] -= sig * c[..., None] * w[sel]
                if jac:
                    cp = chi_prime(u)
                    eye = np.eye(p.d)
                    outer = w[sel][..., :, None] * w[sel][..., None, :]
                    jmat[sel] -= sig * (
                        c[..., None, None] * eye
                        + cp[..., None, None] * (2.0 / delta**2) * outer
                    )
                unresolved &= ~sel

        shell = (s > delta) & (s < 2 * delta)
        if np.any(shell):
            ms, ss = m[shell], s[shell]
            mhat = ms / ss[..., None]
            q = (1.0 - 2.0 * delta / ss)[..., None] * ms
            u = (ss - 2 * delta) ** 2 / delta**2
            c = chi(u)
            val[shell] -= sig * c[..., None] * q
            if jac:
                cp = chi_prime(u)
                rps = rp[shell]
                ur = np.zeros_like(ms)
                ur[..., 0] = pts[shell][..., 0] / rps
                ur[..., 1] = pts[shell][..., 1] / rps
                eye = np.eye(p.d)
                p_xy = np.zeros((p.d, p.d))
                p_xy[0, 0] = p_xy[1, 1] = 1.0
                p_z = eye - p_xy
                ur_outer = ur[..., :, None] * ur[..., None, :]
                dm = (
                    ur_outer
                    + ((rps - p.r[n]) / rps)[..., None, None] * (p_xy - ur_outer)
                    + p_z
                )
                m_mhat = ms[..., :, None] * mhat[..., None, :]
                dq = (1.0 - 2.0 * delta / ss)[..., None, None] * dm + (
                    2.0 * delta / ss**2
                )[..., None, None] * m_mhat
                grad_u = (2.0 * (ss - 2 * delta) / delta**2)[..., None] * mhat
                jmat[shell] -= sig * (
                    c[..., None, None] * dq
                    + q[..., :, None] * (cp[..., None] * grad_u)[..., None, :]
                )

    if scalar:
        return FieldSample(val[0], jmat[0] if jac else None)
    return FieldSample(val.reshape(x.shape), jmat.reshape(x.shape + (p.d,)) if jac else None)


def interpolation_factor(p: ConstructionParams, x: np.ndarray, n: int) -> np.ndarray:
    """Rotation interpolation weight: 1 on the closed C_n, ramping to 0
    across D_n, zero beyond."""
    x = np.asarray(x, dtype=float)
    s = circle_distance(p, x, n)
    delta = p.delta[n]
    out = np.zeros(s.shape)
    out = np.where(s <= 2 * delta, 1.0, out)
    shear = (s > 2 * delta) & (s < 3 * delta)
    if np.any(shear):
        w = (s[shear] - 2 * delta) ** 2 / delta**2
        out[shear] = 1.0 - eta(w)
    return out


def rotation_angle(p: ConstructionParams, t: float, x: np.ndarray) -> np.ndarray:
    """Angle of the isotopy at time t, in turns; depends on x only through
    the distances to the circles."""
    x = np.asarray(x, dtype=float)
    a = np.zeros(x.shape[:-1])
    et = eta_winding(t)
    for n in range(p.N):
        a = a + et / p.rho[n] * interpolation_factor(p, x, n)
    return a


def r_t(p: ConstructionParams, t: float, x: np.ndarray) -> np.ndarray:
    x = wrap(p, np.asarray(x, dtype=float))
    return rotate_planar(x, rotation_angle(p, t, x))


def r_t_inv(p: ConstructionParams, t: float, x: np.ndarray) -> np.ndarray:
    # the angle is invariant under the rotation itself
    x = wrap(p, np.asarray(x, dtype=float))
    return rotate_planar(x, -rotation_angle(p, t, x))


def _angle_gradient(p: ConstructionParams, t: float, pts: np.ndarray) -> np.ndarray:
    """Spatial gradient of the rotation angle (nonzero only across D_n)."""
    grad = np.zeros_like(pts)
    et = eta_winding(t)
    for n in range(p.N):
        delta = p.delta[n]
        m, s, _ = _meridional(p, pts, n)
        shear = (s > 2 * delta) & (s < 3 * delta)
        if not np.any(shear):
            continue
        w = (s[shear] - 2 * delta) ** 2 / delta**2
        dfactor = -eta_prime(w) * 2.0 * (s[shear] - 2 * delta) / delta**2
        mhat = m[shear] / s[shear][..., None]
        grad[shear] += (et / p.rho[n] * dfactor)[..., None] * mhat
    return grad


def r_t_jacobian(p: ConstructionParams, t: float, x: np.ndarray) -> np.ndarray:
    """Analytic spatial differential of the isotopy, including the shear
    from the radius dependence of the angle across D_n."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    pts = wrap(p, np.atleast_2d(x))
    a = rotation_angle(p, t, pts)
    ca, sa = np.cos(TWO_PI * a), np.sin(TWO_PI * a)
    jac = np.zeros(pts.shape + (p.d,))
    for k in range(2, p.d):
        jac[..., k, k] = 1.0
    jac[..., 0, 0] = ca
    jac[..., 0, 1] = -sa
    jac[..., 1, 0] = sa
    jac[..., 1, 1] = ca
    grad = _angle_gradient(p, t, pts)
    if np.any(grad):
        rx = rotate_planar(pts, a)
        jrot = np.zeros_like(pts)  # d/d(angle) of the rotated point
        jrot[..., 0] = -TWO_PI * rx[..., 1]
        jrot[..., 1] = TWO_PI * rx[..., 0]
        jac += jrot[..., :, None] * grad[..., None, :]
    if scalar:
        return jac[0]
    return jac.reshape(x.shape + (p.d,))


def y_field(p: ConstructionParams, t: float, x: np.ndarray, jac: bool = False) -> FieldSample:
    """Velocity field of the rotation isotopy."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    pts = wrap(p, np.atleast_2d(x))
    val = np.zeros_like(pts)
    jmat = np.zeros(pts.shape + (p.d,)) if jac else None
    etp = eta_prime(t)
    if etp != 0.0:
        for n in range(p.N):
            factor = interpolation_factor(p, pts, n)
            coeff = TWO_PI * etp / p.rho[n] * factor
            val[..., 0] += coeff * -pts[..., 1]
            val[..., 1] += coeff * pts[..., 0]
            if jac:
                jmat[..., 0, 1] += -TWO_PI * etp / p.rho[n] * factor
                jmat[..., 1, 0] += TWO_PI * etp / p.rho[n] * factor
        if jac:
            # shear contribution from the radial decay of the factor
            grad = _angle_gradient(p, t, pts)  # = eta(t)/rho * dfactor * mhat
            et = eta_winding(t)
            if et != 0.0 and np.any(grad):
                # gradient of (etp/rho)*factor is (etp/et) * angle gradient
                g = (etp / et) * grad
                jpl = np.zeros_like(pts)
                jpl[..., 0] = -TWO_PI * pts[..., 1]
                jpl[..., 1] = TWO_PI * pts[..., 0]
                jmat += jpl[..., :, None] * g[..., None, :]
            elif et == 0.0 and np.any(grad):  # pragma: no cover - eta'(0)=0
                raise AssertionError("eta'(t) != 0 while eta(t) == 0")
    if scalar:
        return FieldSample(val[0], jmat[0] if jac else None)
    return FieldSample(val.reshape(x.shape), jmat.reshape(x.shape + (p.d,)) if jac else None)


def x_field(p: ConstructionParams, t: float, x: np.ndarray, jac: bool = False) -> FieldSample:
    """The full 1-periodic field X_t = Y_t + dR_t . Z o R_t^{-1}.

    The conjugated term is supported where rotations are rigid, so the
    differential of R_t acts as the plain rotation there.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    pts = wrap(p, np.atleast_2d(x))
    ys = y_field(p, t, pts, jac=jac)
    a = rotation_angle(p, t, pts)
    back = rotate_planar(pts, -a)
    zs = z_field(p, back, jac=jac)
    val = ys.value + rotate_planar(zs.value, a)
    jmat = None
    if jac:
        ca, sa = np.cos(TWO_PI * a), np.sin(TWO_PI * a)
        rot = np.zeros(pts.shape + (p.d,))
        for k in range(2, p.d):
            rot[..., k, k] = 1.0
        rot[..., 0, 0] = ca
        rot[..., 0, 1] = -sa
        rot[..., 1, 0] = sa
        rot[..., 1, 1] = ca
        rot_inv = np.swapaxes(rot, -1, -2)
        jmat = ys.jacobian + rot @ zs.jacobian @ rot_inv
    if scalar:
        return FieldSample(val[0], jmat[0] if jac else None)
    return FieldSample(val.reshape(x.shape), jmat.reshape(x.shape + (p.d,)) if jac else None)


def lagrangian(p: ConstructionParams, t: float, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Running cost: half the squared deviation from the drift field."""
    xv = x_field(p, t, x).value
    dv = np.asarray(v, dtype=float) - xv
    return 0.5 * np.sum(dv * dv, axis=-1)


def hamiltonian(p: ConstructionParams, t: float, x: np.ndarray, pc: np.ndarray) -> np.ndarray:
    xv = x_field(p, t, x).value
    pc = np.asarray(pc, dtype=float)
    return 0.5 * np.sum((pc + xv) ** 2, axis=-1) - 0.5 * np.sum(xv * xv, axis=-1)


def hamiltonian_vector_field(
    p: ConstructionParams, t: float, x: np.ndarray, pc: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """(dx/dt, dp/dt) of the Hamiltonian flow."""
    fs = x_field(p, t, x, jac=True)
    pc = np.asarray(pc, dtype=float)
    xdot = pc + fs.value
    pdot = -np.einsum("...i,...ij->...j", pc, fs.jacobian)
    return xdot, pdot


def stiffness_bound(p: ConstructionParams) -> float:
    """Crude bound on the spatial Lipschitz constant of the fields, used to
    pick stable integrator substeps."""
    radial = max(6.0 * s for s in p.sigma)
    shear = max(
        TWO_PI * ETA_PRIME_MAX / rho * (1.0 + 3.0 * (r + 3 * d) / d)
        for rho, r, d in zip(p.rho, p.r, p.delta)
    )
    return max(radial, shear, 1.0)


def default_substep(p: ConstructionParams) -> float:
    return min(p.tau / 4.0, 0.25 / stiffness_bound(p))


def _rk4(rhs, x0: np.ndarray, t0: float, t1: float, n_steps: int, record=None):
    x = np.array(x0, dtype=float)
    h = (t1 - t0) / n_steps
    if record is not None:
        record(t0, x)
    for k in range(n_steps):
        t = t0 + k * h
        k1 = rhs(t, x)
        k2 = rhs(t + h / 2, x + h / 2 * k1)
        k3 = rhs(t + h / 2, x + h / 2 * k2)
        k4 = rhs(t + h, x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if record is not None:
            record(t + h, x)
    return x


def flow(
    p: ConstructionParams,
    which: str,
    x: np.ndarray,
    t0: float,
    t1: float,
    n_sub: int | None = None,
    samples: bool = False,
):
    """Integrate one of the flows (g, minus_g, f) from t0 to t1.

    g integrates the autonomous contraction field, minus_g its reversal
    (both accept either time order); f integrates the full field X_t
    forward.  Returns the endpoint, or (endpoint, times, points) with
    samples=True.
    """
    x = np.asarray(x, dtype=float)
    if which == "g":
        rhs = lambda t, y: z_field(p, y).value
    elif which == "minus_g":
        rhs = lambda t, y: -z_field(p, y).value
    elif which == "f":
        if t1 < t0:
            raise ValueError("the time-dependent flow runs forward only")
        rhs = lambda t, y: x_field(p, t, y).value
    else:
        raise ValueError(f"unknown flow {which!r}")
    span = abs(t1 - t0)
    if span == 0.0:
        if samples:
            return x.copy(), np.array([t0]), x[None].copy()
        return x.copy()
    h = 1.0 / n_sub if n_sub else default_substep(p)
    n_steps = max(1, int(np.ceil(span / h)))
    if span / n_steps < 1e-9:
        raise ValueError("step-size underflow: requested span too small for accuracy")
    if samples:
        times, pts = [], []
        rec = lambda t, y: (times.append(t), pts.append(y.copy()))
        end = _rk4(rhs, x, t0, t1, n_steps, rec)
        return end, np.array(times), np.array(pts)
    return _rk4(rhs, x, t0, t1, n_steps)


def f_map(p: ConstructionParams, t: float, x: np.ndarray, n_sub: int | None = None) -> np.ndarray:
    """The isotopy composition R_t o g_t on [0, 1], extended to t >= 0 by
    composing the time-1 map.  Exact rotations; only g is integrated."""
    if t < 0:
        raise ValueError("f_map extends to non-negative times only")
    x = np.asarray(x, dtype=float)
    k = int(np.floor(t + 1e-12))
    frac = t - k
    for _ in range(k):
        x = r_t(p, 1.0, flow(p, "g", x, 0.0, 1.0, n_sub=n_sub))
    if frac > 1e-12:
        x = r_t(p, frac, flow(p, "g", x, 0.0, frac, n_sub=n_sub))
    return wrap(p, x)


def sup_x_norm(p: ConstructionParams, t_samples: int = 17) -> float:
    """Numeric sup-norm of the drift field over a time/space sample grid."""
    n = min(p.grid_n, 128)
    h = p.torus_side / n
    axes = [np.arange(n) * h - p.torus_side / 2.0] * p.d
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, p.d)
    keep = _planar_radius(mesh) <= p.chart_radius
    mesh = mesh[keep]
    best = 0.0
    for t in np.linspace(0.0, 1.0, t_samples):
        val = x_field(p, float(t), mesh).value
        best = max(best, float(np.max(np.linalg.norm(val, axis=-1))))
    return best


def resolve_v_max(p: ConstructionParams) -> float:
    """Velocity search radius: configured value, or 2 sup|X| + 1."""
    if p.v_max and p.v_max > 0:
        return p.v_max
    return 2.0 * sup_x_norm(p) + 1.0
