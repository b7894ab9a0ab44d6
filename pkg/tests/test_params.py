import math

import numpy as np
import pytest

from laxlab.params import (
    ConstructionParams,
    ToleranceBundle,
    params_from_config,
    params_to_config,
    snap_to_grid,
    validate_params,
)


def test_defaults_validate():
    p = ConstructionParams()
    rep = validate_params(p)
    assert rep.ok
    # the finite truncation runs in the low-smoothness regime: advisory only
    assert rep.warnings


def test_disjointness_example_passes():
    p = ConstructionParams(
        grid_n=64, rho=(2, 3), r=(0.5, 0.25), delta=(0.05, 0.025), sigma=(1.0, 1.0)
    )
    assert validate_params(p).ok
    # shells [0.35, 0.65] and [0.175, 0.325] are disjoint
    assert p.r[1] + 3 * p.delta[1] < p.r[0] - 3 * p.delta[0]


def test_non_increasing_periods_fail():
    with pytest.raises(ValueError, match="increasing"):
        ConstructionParams(rho=(3, 2), r=(0.5, 0.25), delta=(0.05, 0.025), sigma=(1.0, 1.0))


def test_shell_reaching_origin_fails():
    with pytest.raises(ValueError, match="origin"):
        ConstructionParams(N=1, rho=(2,), r=(0.5,), delta=(0.5,), sigma=(1.0,))


def test_rho0_minimum():
    with pytest.raises(ValueError, match="rho_0"):
        ConstructionParams(N=1, rho=(1,), r=(0.5,), delta=(0.05,), sigma=(1.0,))


def test_overlapping_shells_fail():
    with pytest.raises(ValueError, match="overlap"):
        ConstructionParams(rho=(2, 3), r=(0.5, 0.4), delta=(0.05, 0.025), sigma=(1.0, 1.0))


def test_tau_must_divide_one():
    with pytest.raises(ValueError, match="tau"):
        ConstructionParams(tau=0.3)


def test_tolerance_bundle():
    t = ToleranceBundle(barrier=1e-3, solver_step=2e-3)
    assert t.combined == pytest.approx(5e-3)
    assert t.margin == pytest.approx(2.5e-2)
    assert t.ambiguity == pytest.approx(1.5e-2)


def test_config_roundtrip(tmp_path):
    p = ConstructionParams(grid_n=64, tau=1 / 16)
    path = tmp_path / "params.cfg"
    path.write_text(params_to_config(p))
    q = params_from_config(path)
    assert q == p


def test_config_rejects_unknown_key(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("frobnicate = 1\n")
    with pytest.raises(ValueError, match="unknown key"):
        params_from_config(path)


def test_config_comments_and_lists(tmp_path):
    path = tmp_path / "params.cfg"
    path.write_text(
        """
# comment line
grid_n = 32
rho = 2, 3
r = 0.625, 0.1875
delta = 0.078125, 0.0546875
sigma = 20, 40   # trailing comment
tau = 0.0625
"""
    )
    p = params_from_config(path)
    assert p.grid_n == 32 and p.rho == (2, 3) and p.sigma == (20.0, 40.0)


def test_products_and_lcm():
    p = ConstructionParams(grid_n=32, tau=1 / 16)
    assert p.products == (2, 6)
    assert p.lcm_rho == 6


def test_snap_to_grid():
    p = ConstructionParams(grid_n=64, tau=1 / 16)
    x = np.array([0.511, -0.013])
    s = snap_to_grid(p, x)
    assert np.all(np.abs(s - x) <= p.h / 2 + 1e-12)
    # snapped points are exact nodes
    idx = (s + p.torus_side / 2) / p.h
    assert np.allclose(idx, np.round(idx))


def test_key_changes_with_params():
    a = ConstructionParams(grid_n=64, tau=1 / 16)
    b = ConstructionParams(grid_n=32, tau=1 / 16)
    assert a.key() != b.key()
    assert a.key() == ConstructionParams(grid_n=64, tau=1 / 16).key()
