"""Semi-Lagrangian dynamic programming for the Lax-Oleinik evolution.

One step advances a grid field by tau: each node minimizes

    interp(u, x - tau*v) + tau * L(t + tau/2, x - tau*v/2, v)

over candidate velocities (midpoint quadrature of the running cost).  The
critical value of the drift-type cost is zero, so no linear-in-time
correction is applied.

Search modes: "vgrid" is the canonical fixed candidate lattice (exactly
monotone, exactly shift-equivariant, oracle-testable); "refined" is a
warm-started shrinking-window cascade whose terminal resolution is far
below the lattice cost, used for all production evolutions.

Backends: a compiled extension when importable, else the numpy fallback
(the 3-D and cubic-interpolation paths always use the fallback).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernel_py
from .fields import resolve_v_max, x_field, z_field
from .grid import GridField, grid_points, interp_periodic
from .params import ConstructionParams

try:
    from . import _kernel

    HAVE_KERNEL = True
except ImportError:  # pragma: no cover - build-dependent
    _kernel = None
    HAVE_KERNEL = False

# terminal window spacings of the refined cascade; each level keeps the
# running best and shrinks about 3x, down to a velocity quantum whose
# per-step cost bias is O(tau * dv^2) ~ 1e-7
CASCADE = (0.55, 0.25, 0.095, 0.036, 0.014, 0.0053)


def effective_infinity(p: ConstructionParams) -> float:
    diam2 = p.d * (p.torus_side / 2.0) ** 2
    return 1.0e6 * diam2 / (2.0 * p.tau)


@dataclass(frozen=True)
class SolverConfig:
    """Velocity search and quadrature settings for the evolution."""

    tau: float
    v_max: float
    mode: str = "refined"  # or "vgrid"
    m: int = 8  # vgrid half-count per axis: lattice is (2m+1)^d
    interpolation: str = "linear"  # or "cubic" (numpy backend only)
    quadrature: str = "midpoint"
    backend: str = "auto"  # auto | cython | numpy
    autonomous: bool = False
    cascade: tuple[float, ...] = CASCADE
    eff_inf: float = 0.0

    def key(self) -> str:
        payload = json.dumps(
            [
                self.tau,
                self.v_max,
                self.mode,
                self.m,
                self.interpolation,
                self.quadrature,
                self.autonomous,
                list(self.cascade),
            ]
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def default_config(p: ConstructionParams, **overrides) -> SolverConfig:
    v_max = overrides.pop("v_max", None) or resolve_v_max(p)
    cfg = SolverConfig(tau=p.tau, v_max=v_max, eff_inf=effective_infinity(p), **overrides)
    if cfg.tau * cfg.v_max > p.torus_side / 2.0:
        raise ValueError("tau * v_max exceeds half the box")
    return cfg


def vgrid_lattice(cfg: SolverConfig, d: int) -> np.ndarray:
    """The canonical centered candidate lattice, (2m+1)^d velocities."""
    axis = np.linspace(-cfg.v_max, cfg.v_max, 2 * cfg.m + 1)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=-1)


class FieldSlices:
    """Caches drift-field slices on the grid at quantized phases.

    The field is 1-periodic in time and steps are aligned to tau, so
    slices repeat with the phase of t mod 1 (a single slice suffices in
    autonomous mode, where the drift is the contraction field alone).
    """

    def __init__(self, p: ConstructionParams, autonomous: bool = False):
        self.params = p
        self.autonomous = autonomous
        self._pts = grid_points(p)
        self._cache: dict[int, tuple[np.ndarray, ...]] = {}

    def at(self, t: float) -> tuple[np.ndarray, ...]:
        p = self.params
        if self.autonomous:
            key = -1
        else:
            phase = t % 1.0
            key = round(phase / (p.tau / 2.0)) % round(2.0 / p.tau)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if self.autonomous:
            val = z_field(p, self._pts).value
        else:
            phase = key * (p.tau / 2.0)
            val = x_field(p, phase, self._pts).value
        slices = tuple(np.ascontiguousarray(val[..., k]) for k in range(p.d))
        self._cache[key] = slices
        return slices


def _use_kernel(cfg: SolverConfig, p: ConstructionParams) -> bool:
    if cfg.backend == "numpy":
        return False
    if cfg.backend == "cython":
        if not HAVE_KERNEL:
            raise RuntimeError("compiled kernel requested but not available")
        if p.d != 2 or cfg.interpolation != "linear":
            raise RuntimeError("compiled kernel supports d=2 linear interpolation")
        return True
    return HAVE_KERNEL and p.d == 2 and cfg.interpolation == "linear"


def _step_arrays(
    u: np.ndarray,
    t: float,
    cfg: SolverConfig,
    p: ConstructionParams,
    slices: FieldSlices,
    warm: tuple[np.ndarray, ...] | None,
):
    """One step on raw arrays; returns (values, argmin velocity components)."""
    mid = slices.at(t + cfg.tau / 2.0)
    out = np.empty_like(u)
    outv = tuple(np.empty_like(u) for _ in range(p.d))
    if p.d == 2:
        xmx, xmy = mid
        if _use_kernel(cfg, p):
            if cfg.mode == "vgrid":
                vels = vgrid_lattice(cfg, 2)
                _kernel.step_vgrid(u, xmx, xmy, cfg.tau, p.h, cfg.eff_inf, vels,
                                   out, outv[0], outv[1])
            else:
                if warm is None:
                    warm = (xmx.copy(), xmy.copy())
                _kernel.step_refined(u, xmx, xmy, cfg.tau, p.h, cfg.eff_inf,
                                     cfg.v_max, np.asarray(cfg.cascade), warm[0],
                                     warm[1], out, outv[0], outv[1])
        else:
            if cfg.interpolation == "cubic":
                raise NotImplementedError("cubic interpolation arrives with the 3-D path")
            if cfg.mode == "vgrid":
                vels = vgrid_lattice(cfg, 2)
                _kernel_py.step_vgrid(u, xmx, xmy, cfg.tau, p.h, cfg.eff_inf, vels,
                                      out, outv[0], outv[1])
            else:
                if warm is None:
                    warm = (xmx.copy(), xmy.copy())
                _kernel_py.step_refined(u, xmx, xmy, cfg.tau, p.h, cfg.eff_inf,
                                        cfg.v_max, cfg.cascade, warm[0], warm[1],
                                        out, outv[0], outv[1])
    else:
        out, outv = _step_nd(u, mid, cfg, p, warm)
    return out, outv


def _step_nd(u, mid, cfg: SolverConfig, p: ConstructionParams, warm):
    """Dimension-generic fallback step (used for d = 3)."""
    from itertools import product

    pts = grid_points(p)
    tau = cfg.tau

    def objective(v):
        dep = pts - tau * v
        chord = pts - 0.5 * tau * v
        uy = np.minimum(interp_periodic(u, dep, p), cfg.eff_inf)
        cost = np.zeros_like(uy)
        for k in range(p.d):
            cost += (v[..., k] - interp_periodic(mid[k], chord, p)) ** 2
        return uy + tau * 0.5 * cost

    if cfg.mode == "vgrid":
        cands = vgrid_lattice(cfg, p.d)
        best = np.full_like(u, np.inf)
        bv = [np.zeros_like(u) for _ in range(p.d)]
        for vel in cands:
            v = np.broadcast_to(vel, pts.shape)
            cand = objective(v)
            better = cand < best
            best = np.where(better, cand, best)
            for k in range(p.d):
                bv[k] = np.where(better, vel[k], bv[k])
        return np.minimum(best, cfg.eff_inf), tuple(bv)

    if warm is None:
        warm = tuple(np.array(mid[k]) for k in range(p.d))
    bv = [w.copy() for w in warm]
    best = objective(np.stack(bv, axis=-1))

    def window(center, dv, half_k):
        nonlocal best, bv
        for offs in product(range(-half_k, half_k + 1), repeat=p.d):
            v = np.stack([center[k] + offs[k] * dv for k in range(p.d)], axis=-1)
            cand = objective(v)
            better = cand < best
            best = np.where(better, cand, best)
            for k in range(p.d):
                bv[k] = np.where(better, v[..., k], bv[k])

    zero = [np.zeros_like(u) for _ in range(p.d)]
    window(zero, cfg.v_max, 1)
    window(bv, cfg.v_max / 3.0, 1)
    window(bv, cfg.v_max / 9.0, 1)
    window(list(warm), 0.5, 2)
    window(list(mid), 0.5, 1)
    for dv in cfg.cascade:
        window(bv, dv, 1)
    return np.minimum(best, cfg.eff_inf), tuple(bv)


def lo_step(
    u: GridField,
    cfg: SolverConfig,
    slices: FieldSlices | None = None,
    warm: tuple[np.ndarray, ...] | None = None,
    return_warm: bool = False,
):
    """One Lax-Oleinik step; advances the time stamp by tau."""
    p = u.params
    if slices is None:
        slices = FieldSlices(p, autonomous=cfg.autonomous)
    out, outv = _step_arrays(u.values, u.time, cfg, p, slices, warm)
    nxt = GridField(out, u.time + cfg.tau, p)
    if return_warm:
        return nxt, outv
    return nxt


@dataclass
class EvolveResult:
    field: GridField
    snapshots: dict[float, GridField] = field(default_factory=dict)
    history: list[tuple[np.ndarray, ...]] | None = None
    fields_history: list[GridField] | None = None


def lo_evolve(
    u: GridField,
    steps: int,
    cfg: SolverConfig,
    slices: FieldSlices | None = None,
    snapshot_times: tuple[float, ...] = (),
    record_history: bool = False,
    callback=None,
) -> EvolveResult:
    """Compose steps; optionally snapshot at given times and keep the
    per-step argmin velocities (for minimizer backtracking)."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    p = u.params
    if slices is None:
        slices = FieldSlices(p, autonomous=cfg.autonomous)
    want = {round(t / cfg.tau): float(t) for t in snapshot_times}
    result = EvolveResult(field=u)
    if record_history:
        result.history = []
        result.fields_history = [u]
    base_idx = round(u.time / cfg.tau)
    if base_idx in want:
        result.snapshots[want[base_idx]] = u
    warm = None
    cur = u
    for k in range(steps):
        values, warm = _step_arrays(cur.values, cur.time, cfg, p, slices, warm)
        cur = GridField(values, u.time + (k + 1) * cfg.tau, p)
        if record_history:
            result.history.append(warm)
            result.fields_history.append(cur)
        idx = base_idx + k + 1
        if idx in want:
            result.snapshots[want[idx]] = cur
        if callback is not None:
            callback(cur)
    result.field = cur
    return result


def time_one_map(u: GridField, cfg: SolverConfig, slices: FieldSlices | None = None) -> GridField:
    """The discrete time-1 operator: 1/tau composed steps."""
    per_unit = round(1.0 / cfg.tau)
    return lo_evolve(u, per_unit, cfg, slices=slices).field


def potential_field(
    p: ConstructionParams,
    y: np.ndarray,
    t_units: float,
    cfg: SolverConfig,
    slices: FieldSlices | None = None,
    snapshot_times: tuple[float, ...] = (),
) -> EvolveResult:
    """Minimal cost from (0, y): evolve the point initial field to time
    t_units.  Values above eff_inf/2 mean unreachable within the budget."""
    from .grid import point_initial_field

    u0 = point_initial_field(p, y, effective_infinity(p))
    steps = round(t_units / cfg.tau)
    return lo_evolve(u0, steps, cfg, slices=slices, snapshot_times=snapshot_times)


def reachable_mask(f: GridField, p: ConstructionParams) -> np.ndarray:
    return f.values < effective_infinity(p) / 2.0


@dataclass
class BacktrackResult:
    times: np.ndarray
    points: np.ndarray
    velocities: np.ndarray
    step_costs: np.ndarray  # field-difference bookkeeping per step
    action_costs: np.ndarray  # objective-based action increments
    ambiguous: list[int]

    @property
    def total_cost(self) -> float:
        return float(self.step_costs.sum())


def backtrack_minimizer(evolved: EvolveResult, x: np.ndarray, cfg: SolverConfig) -> BacktrackResult:
    """Argmin-velocity chain from the final time back to the start.

    x snaps to a node at the final time; earlier points follow the recorded
    argmin fields (interpolated off nodes).  step_costs are the interpolated
    field differences, so they telescope to the total exactly; action_costs
    re-evaluate the running cost along each hop.  Steps whose argmin is not
    isolated (several coarse candidates within the ambiguity tolerance at
    separated velocities) are flagged.
    """
    if evolved.history is None or evolved.fields_history is None:
        raise ValueError("backtracking needs an evolve call with record_history=True")
    p = evolved.field.params
    fields = evolved.fields_history
    history = evolved.history
    n_steps = len(history)
    idx = fields[-1].node_index(x)
    pt = np.array([-p.torus_side / 2.0 + i * p.h for i in idx])
    pts = [pt]
    vels = []
    step_costs = []
    action_costs = []
    ambiguous = []
    tol_amb = p.tol.ambiguity
    for k in range(n_steps - 1, -1, -1):
        vfield = history[k]
        v = np.array([float(interp_periodic(vc, pts[-1], p)) for vc in vfield])
        here = pts[-1]
        prev = here - cfg.tau * v
        u_now = float(interp_periodic(fields[k + 1].values, here, p))
        u_prev = float(interp_periodic(fields[k].values, prev, p))
        step_costs.append(u_now - u_prev)
        # action increment of the hop, via the same midpoint rule
        tmid = fields[k].time + cfg.tau / 2.0
        xv = (
            z_field(p, here - 0.5 * cfg.tau * v).value
            if cfg.autonomous
            else x_field(p, tmid, here - 0.5 * cfg.tau * v).value
        )
        action_costs.append(cfg.tau * 0.5 * float(np.sum((v - xv) ** 2)))
        if _ambiguous_argmin(fields[k], here, v, tmid, cfg, tol_amb):
            ambiguous.append(k)
        vels.append(v)
        pts.append(prev)
    times = np.array([fields[0].time + cfg.tau * k for k in range(n_steps + 1)])
    return BacktrackResult(
        times=times,
        points=np.array(pts[::-1]),
        velocities=np.array(vels[::-1]),
        step_costs=np.array(step_costs[::-1]),
        action_costs=np.array(action_costs[::-1]),
        ambiguous=sorted(n_steps - 1 - k for k in ambiguous),
    )


def _ambiguous_argmin(u_prev: GridField, x, v_best, tmid, cfg: SolverConfig, tol) -> bool:
    p = u_prev.params
    cands = np.linspace(-cfg.v_max, cfg.v_max, 9)
    vv = np.stack(np.meshgrid(*([cands] * p.d), indexing="ij"), axis=-1).reshape(-1, p.d)
    dep = x - cfg.tau * vv
    chord = x - 0.5 * cfg.tau * vv
    uy = np.minimum(interp_periodic(u_prev.values, dep, p), cfg.eff_inf)
    xv = z_field(p, chord).value if cfg.autonomous else x_field(p, tmid, chord).value
    obj = uy + cfg.tau * 0.5 * np.sum((vv - xv) ** 2, axis=-1)
    best = obj.min()
    rivals = vv[obj <= best + tol]
    if len(rivals) == 0:
        return False
    spread = np.max(np.linalg.norm(rivals - v_best, axis=-1))
    return bool(spread > 1.0)
