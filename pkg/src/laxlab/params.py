"""Construction parameters: the single source of truth for a run.

All scalars of the geometric construction (orbit periods, circle radii,
shell widths, radial speeds) together with grid and solver settings live
here.  Validation separates hard structural failures (overlapping shells,
non-increasing periods) from soft regularity advisories.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class ToleranceBundle:
    """Numeric tolerances used across the laboratory.

    combined = barrier + 2 * solver_step; the margin gates in the reports
    require measured positivity margins to exceed margin_factor * combined.
    """

    barrier: float = 1.0e-3
    solver_step: float = 2.0e-3
    margin_factor: float = 5.0
    ambiguity_factor: float = 3.0

    @property
    def combined(self) -> float:
        return self.barrier + 2.0 * self.solver_step

    @property
    def margin(self) -> float:
        return self.margin_factor * self.combined

    @property
    def ambiguity(self) -> float:
        return self.ambiguity_factor * self.combined


@dataclass(frozen=True)
class ConstructionParams:
    d: int = 2
    N: int = 2
    rho: tuple[int, ...] = (2, 3)
    r: tuple[float, ...] = (0.625, 0.1875)
    delta: tuple[float, ...] = (0.078125, 0.0546875)
    sigma: tuple[float, ...] = (20.0, 40.0)
    chart_radius: float = 0.9
    torus_side: float = 2.0
    grid_n: int = 256
    tau: float = 1.0 / 48.0
    v_max: float = 0.0  # 0 -> derived as 2 * sup|X| + 1
    horizon_P: int = 13
    p_burn: int = 3
    tol: ToleranceBundle = field(default_factory=ToleranceBundle)

    def __post_init__(self):
        report = validate_params(self)
        if report.errors:
            raise ValueError("invalid construction parameters: " + "; ".join(report.errors))

    @property
    def h(self) -> float:
        return self.torus_side / self.grid_n

    @property
    def steps_per_unit(self) -> int:
        return round(1.0 / self.tau)

    @property
    def lcm_rho(self) -> int:
        return math.lcm(*self.rho)

    @property
    def products(self) -> tuple[int, ...]:
        """Truncated products p_k = rho_0 * ... * rho_k."""
        out, acc = [], 1
        for rho in self.rho:
            acc *= rho
            out.append(acc)
        return tuple(out)

    def with_grid(self, grid_n: int) -> "ConstructionParams":
        return replace(self, grid_n=grid_n)

    def key(self) -> str:
        """Stable hash of everything that affects computed fields."""
        payload = json.dumps(
            {
                "d": self.d,
                "N": self.N,
                "rho": self.rho,
                "r": self.r,
                "delta": self.delta,
                "sigma": self.sigma,
                "chart_radius": self.chart_radius,
                "torus_side": self.torus_side,
                "grid_n": self.grid_n,
                "tau": self.tau,
                "v_max": self.v_max,
                "horizon_P": self.horizon_P,
                "p_burn": self.p_burn,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def validate_params(p: ConstructionParams) -> ValidationReport:
    """Check all structural invariants; collect soft regularity advisories.

    Hard failures: malformed sequences, shells that overlap each other or
    the origin or the chart boundary, a time step that does not divide 1.
    Soft warnings flag low effective smoothness of the finite truncation.
    """
    rep = ValidationReport()
    err = rep.errors.append
    warn = rep.warnings.append

    if p.d not in (2, 3):
        err(f"d must be 2 or 3, got {p.d}")
    n = p.N
    if not (len(p.rho) == len(p.r) == len(p.delta) == len(p.sigma) == n):
        err("rho, r, delta, sigma must all have length N")
        return rep

    if p.rho[0] < 2:
        err(f"rho_0 must be >= 2, got {p.rho[0]}")
    for i in range(n - 1):
        if p.rho[i + 1] <= p.rho[i]:
            err(f"periods must be strictly increasing: rho_{i+1} <= rho_{i}")
    for i in range(n - 1):
        if p.r[i + 1] >= p.r[i]:
            err(f"radii must be strictly decreasing: r_{i+1} >= r_{i}")
    for i in range(n):
        if p.r[i] <= 0 or p.delta[i] <= 0 or p.sigma[i] <= 0:
            err(f"r, delta, sigma must be positive at index {i}")

    if rep.errors:
        return rep

    if p.r[0] + 3 * p.delta[0] >= p.chart_radius:
        err(
            f"outermost shell leaves the chart: r_0 + 3 delta_0 = "
            f"{p.r[0] + 3 * p.delta[0]:.6g} >= chart_radius {p.chart_radius}"
        )
    for i in range(n - 1):
        if p.r[i + 1] + 3 * p.delta[i + 1] >= p.r[i] - 3 * p.delta[i]:
            err(
                f"shells {i} and {i+1} overlap: "
                f"{p.r[i+1] + 3*p.delta[i+1]:.6g} >= {p.r[i] - 3*p.delta[i]:.6g}"
            )
    for i in range(n):
        if p.delta[i] >= p.r[i] / 2:
            err(f"shell {i} reaches the origin: delta_{i} >= r_{i}/2")
        # disjointness of the marked balls on circle i
        gap = 2 * p.r[i] * math.sin(math.pi / p.rho[i])
        if 2 * p.delta[i] >= gap:
            err(
                f"balls on circle {i} overlap: 2 delta = {2*p.delta[i]:.6g}"
                f" >= chord {gap:.6g}"
            )

    if p.chart_radius >= p.torus_side / 2:
        err("chart ball does not fit inside the periodic box")
    inv_tau = 1.0 / p.tau
    if abs(inv_tau - round(inv_tau)) > 1e-9:
        err(f"1/tau must be an integer, got 1/tau = {inv_tau!r}")
    if p.grid_n < 8:
        err("grid_n too small")
    if p.tau * max(p.v_max, 1.0) > p.torus_side / 2:
        err("tau * v_max exceeds half the box")
    if p.horizon_P <= p.p_burn:
        err("horizon_P must exceed the burn-in")

    # soft advisories: the infinite construction wants sigma_n = o(delta_n^k);
    # at finite N we just flag low effective smoothness margins.
    for i in range(n):
        q = p.sigma[i] / p.delta[i] ** 2
        if q > 1.0:
            warn(
                f"sigma_{i}/delta_{i}^2 = {q:.3g} > 1: "
                "low effective smoothness of the truncated field"
            )
        q2 = 1.0 / (p.rho[i] * p.delta[i] ** 2)
        if q2 > 1.0:
            warn(
                f"1/(rho_{i} delta_{i}^2) = {q2:.3g} > 1: "
                "low effective smoothness of the truncated rotation"
            )
    return rep


# -- plain-text config file (key=value; lists comma-separated) --------------

_FIELD_TYPES = {
    "d": int,
    "N": int,
    "rho": (int,),
    "r": (float,),
    "delta": (float,),
    "sigma": (float,),
    "chart_radius": float,
    "torus_side": float,
    "grid_n": int,
    "tau": float,
    "v_max": float,
    "horizon_P": int,
    "p_burn": int,
}


def params_from_config(path: str | Path) -> ConstructionParams:
    """Read ConstructionParams from a key=value text file.

    Unknown keys are rejected.  List fields take comma-separated values.
    Keys tol.barrier / tol.solver_step / tol.margin_factor /
    tol.ambiguity_factor set the tolerance bundle.
    """
    text = Path(path).read_text()
    kwargs: dict = {}
    tol_kwargs: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key.startswith("tol."):
            tol_kwargs[key[4:]] = float(value)
            continue
        if key not in _FIELD_TYPES:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        spec = _FIELD_TYPES[key]
        if isinstance(spec, tuple):
            kwargs[key] = tuple(spec[0](v.strip()) for v in value.split(","))
        else:
            kwargs[key] = spec(value)
    if tol_kwargs:
        kwargs["tol"] = ToleranceBundle(**tol_kwargs)
    return ConstructionParams(**kwargs)


def params_to_config(p: ConstructionParams) -> str:
    lines = []
    for key in _FIELD_TYPES:
        value = getattr(p, key)
        if isinstance(value, tuple):
            lines.append(f"{key} = {', '.join(str(v) for v in value)}")
        else:
            lines.append(f"{key} = {value}")
    t = p.tol
    lines += [
        f"tol.barrier = {t.barrier}",
        f"tol.solver_step = {t.solver_step}",
        f"tol.margin_factor = {t.margin_factor}",
        f"tol.ambiguity_factor = {t.ambiguity_factor}",
    ]
    return "\n".join(lines) + "\n"


def snap_to_grid(p: ConstructionParams, x: np.ndarray) -> np.ndarray:
    """Nearest grid node, with coordinates wrapped into [-side/2, side/2)."""
    h = p.h
    half = p.torus_side / 2.0
    idx = np.rint((np.asarray(x, dtype=float) + half) / h).astype(int) % p.grid_n
    return -half + idx * h
