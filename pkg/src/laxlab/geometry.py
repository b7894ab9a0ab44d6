"""Periodic domain geometry: nested circles, shells, and marked points.

The working chart is the centered ball of radius ``chart_radius`` inside the
periodic box [-side/2, side/2)^d.  Around each circle O_n (radius r_n in the
x1-x2 plane) sit the marked balls B_n^i, the inner tube, the spin-up shell
A_n, the attracting boundary of C_n, and the shear shell D_n.  Everything
outside every shell is the far region; beyond all 3*delta_n collars it is
the fixed-point region where all dynamics vanish.

Angles are measured in turns (the circle is R/Z), so the i-th marked point
on circle n sits at angle i/rho_n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import ConstructionParams

TWO_PI = 2.0 * np.pi


def wrap(p: ConstructionParams, x: np.ndarray) -> np.ndarray:
    """Reduce coordinates into [-side/2, side/2)."""
    half = p.torus_side / 2.0
    return (np.asarray(x, dtype=float) + half) % p.torus_side - half


def to_polar(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Planar polar form (r, theta in turns) of the first two coordinates."""
    x = np.asarray(x, dtype=float)
    r = np.hypot(x[..., 0], x[..., 1])
    theta = np.arctan2(x[..., 1], x[..., 0]) / TWO_PI % 1.0
    return r, theta


def from_polar(r, theta_turns, rest=()) -> np.ndarray:
    """Cartesian point from planar polar coordinates plus extra axes."""
    a = TWO_PI * np.asarray(theta_turns, dtype=float)
    head = np.stack([r * np.cos(a), r * np.sin(a)], axis=-1)
    if len(rest) == 0:
        return head
    tail = np.broadcast_to(np.asarray(rest, dtype=float), head.shape[:-1] + (len(rest),))
    return np.concatenate([head, tail], axis=-1)


def rotate_planar(x: np.ndarray, angle_turns: float) -> np.ndarray:
    """Rotate the x1-x2 plane by an angle given in turns."""
    x = np.asarray(x, dtype=float)
    a = TWO_PI * angle_turns
    c, s = np.cos(a), np.sin(a)
    out = x.copy()
    out[..., 0] = c * x[..., 0] - s * x[..., 1]
    out[..., 1] = s * x[..., 0] + c * x[..., 1]
    return out


def circle_distance(p: ConstructionParams, x: np.ndarray, n: int) -> np.ndarray:
    """Euclidean distance from x to the circle O_n."""
    x = np.asarray(x, dtype=float)
    rp = np.hypot(x[..., 0], x[..., 1])
    merid2 = (rp - p.r[n]) ** 2
    if p.d > 2:
        merid2 = merid2 + np.sum(x[..., 2:] ** 2, axis=-1)
    return np.sqrt(merid2)


def marked_point(p: ConstructionParams, name: str) -> np.ndarray:
    for label, pt in marked_points(p):
        if label == name:
            return pt
    raise KeyError(name)


def marked_points(p: ConstructionParams) -> list[tuple[str, np.ndarray]]:
    """All marked points: x_n^i on the circles, y_n on the tube boundary,
    the origin, and (d = 2) the shell tips z_n^+-."""
    rest = (0.0,) * (p.d - 2)
    out: list[tuple[str, np.ndarray]] = []
    for n in range(p.N):
        for i in range(p.rho[n]):
            out.append((f"x_{n}^{i}", from_polar(p.r[n], i / p.rho[n], rest)))
        out.append((f"y_{n}", from_polar(p.r[n] + p.delta[n], 0.0, rest)))
    out.append(("z_inf", np.zeros(p.d)))
    if p.d == 2:
        for n in range(p.N):
            out.append((f"z_{n}^+", np.array([p.r[n] + 2 * p.delta[n], 0.0])))
            out.append((f"z_{n}^-", np.array([p.r[n] - 2 * p.delta[n], 0.0])))
    return out


@dataclass(frozen=True)
class RegionLabel:
    """Finest region containing a point.

    kind: one of ball, tube, shell_a, c_boundary, shell_d, d_far.
    n, i: circle / marked-ball indices where applicable (-1 otherwise).
    sign: +1 outer / -1 inner branch of two-component shells when d = 2.
    prime: for d_far, True when the point is strictly beyond every
    3*delta_n collar (the region where the fields vanish identically).
    """

    kind: str
    n: int = -1
    i: int = -1
    sign: int = 0
    prime: bool = False

    @property
    def name(self) -> str:
        s = {1: "+", -1: "-", 0: ""}[self.sign]
        if self.kind == "ball":
            return f"B_{self.n}^{self.i}"
        if self.kind == "tube":
            return f"O_{self.n}"
        if self.kind == "shell_a":
            return f"A_{self.n}{s}"
        if self.kind == "c_boundary":
            return f"C_{self.n}-boundary"
        if self.kind == "shell_d":
            return f"D_{self.n}{s}"
        return "D'" if self.prime else "D"

    @property
    def in_c(self) -> bool:
        """Inside the closed rotation region C_n (tube, balls, A_n, boundary)."""
        return self.kind in ("ball", "tube", "shell_a", "c_boundary")

    @property
    def in_d(self) -> bool:
        """Inside the complement of every closed C_n."""
        return self.kind in ("shell_d", "d_far")


def classify_point(p: ConstructionParams, x: np.ndarray) -> RegionLabel:
    """Finest region label of x; total on the box.

    Tie-breaks are half-open towards the closed outer region:
    distance-to-circle in [delta, 2*delta) labels A_n, exactly 2*delta
    labels the attracting boundary of C_n, in (2*delta, 3*delta) labels
    D_n, and exactly 3*delta falls to the far region (prime only when
    strictly beyond every collar).
    """
    x = wrap(p, np.asarray(x, dtype=float))
    rp = np.hypot(x[0], x[1])
    on_boundary_ring = False
    for n in range(p.N):
        s = float(circle_distance(p, x, n))
        delta = p.delta[n]
        if s < delta:
            for i in range(p.rho[n]):
                center = from_polar(p.r[n], i / p.rho[n], (0.0,) * (p.d - 2))
                if np.linalg.norm(x - center) < delta:
                    return RegionLabel("ball", n=n, i=i)
            return RegionLabel("tube", n=n)
        sign = int(np.sign(rp - p.r[n])) if p.d == 2 else 0
        if s < 2 * delta:
            return RegionLabel("shell_a", n=n, sign=sign)
        if s == 2 * delta:
            return RegionLabel("c_boundary", n=n)
        if s < 3 * delta:
            return RegionLabel("shell_d", n=n, sign=sign)
        if s == 3 * delta:
            on_boundary_ring = True
    return RegionLabel("d_far", prime=not on_boundary_ring)


def region_masks(p: ConstructionParams, points: np.ndarray) -> dict[str, np.ndarray]:
    """Vectorized region masks for an array of points shaped (..., d).

    Returns boolean masks keyed by the coarse region names used by the
    reports; the shell masks carry one entry per circle.
    """
    points = np.asarray(points, dtype=float)
    masks: dict[str, np.ndarray] = {}
    in_any_c = np.zeros(points.shape[:-1], dtype=bool)
    in_any_cd = np.zeros(points.shape[:-1], dtype=bool)
    for n in range(p.N):
        s = circle_distance(p, points, n)
        delta = p.delta[n]
        tube = s < delta
        balls = np.zeros_like(tube)
        for i in range(p.rho[n]):
            center = from_polar(p.r[n], i / p.rho[n], (0.0,) * (p.d - 2))
            di = np.linalg.norm(points - center, axis=-1)
            ball = di < delta
            masks[f"B_{n}^{i}"] = ball
            balls |= ball
        masks[f"B_{n}"] = tube
        masks[f"tube_{n}"] = tube & ~balls
        masks[f"A_{n}"] = (s >= delta) & (s < 2 * delta)
        masks[f"C_{n}"] = s < 2 * delta
        masks[f"C_{n}_closed"] = s <= 2 * delta
        masks[f"D_{n}"] = (s > 2 * delta) & (s < 3 * delta)
        if p.d == 2:
            rp = np.hypot(points[..., 0], points[..., 1])
            masks[f"A_{n}+"] = masks[f"A_{n}"] & (rp > p.r[n])
            masks[f"A_{n}-"] = masks[f"A_{n}"] & (rp < p.r[n])
            masks[f"D_{n}+"] = masks[f"D_{n}"] & (rp > p.r[n])
            masks[f"D_{n}-"] = masks[f"D_{n}"] & (rp < p.r[n])
        in_any_c |= s <= 2 * delta
        in_any_cd |= s <= 3 * delta
    masks["D"] = ~in_any_c
    masks["D_prime"] = ~in_any_cd
    return masks
