"""Benchmark the compiled kernel against the numpy fallback."""

from __future__ import annotations

import time

import numpy as np

from .grid import GridField
from .params import ConstructionParams
from .solver import HAVE_KERNEL, FieldSlices, default_config, lo_step


def run_bench(grid_n: int = 128, steps: int = 5, mode: str = "refined") -> dict:
    p = ConstructionParams(grid_n=grid_n)
    slices = FieldSlices(p)
    rng = np.random.default_rng(7)
    u0 = GridField(
        np.cumsum(np.cumsum(rng.normal(size=(grid_n,) * p.d), axis=0), axis=1) * 1e-4,
        0.0,
        p,
    )
    results = {}
    fields = {}
    backends = ["numpy"] + (["cython"] if HAVE_KERNEL else [])
    for backend in backends:
        cfg = default_config(p, mode=mode, backend=backend)
        u = u0
        warm = None
        t0 = time.time()
        for _ in range(steps):
            u, warm = lo_step(u, cfg, slices, warm=warm, return_warm=True)
        dt = (time.time() - t0) / steps
        results[backend] = dt
        fields[backend] = u.values
    out = {
        "grid_n": grid_n,
        "steps": steps,
        "mode": mode,
        "seconds_per_step": results,
    }
    if len(fields) == 2:
        out["max_abs_difference"] = float(
            np.max(np.abs(fields["numpy"] - fields["cython"]))
        )
        out["speedup"] = results["numpy"] / results["cython"]
    return out
