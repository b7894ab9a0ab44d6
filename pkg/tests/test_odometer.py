import math
import random
from fractions import Fraction

import pytest

from laxlab.odometer import (
    MultiplicityFn,
    OdoPoint,
    RhoSpec,
    classical_odometer,
    metric,
    multiplicity_function,
    orbit_of_zero,
    order_of_one,
    p_adic_valuation,
    prefix_orbit_cardinalities,
    rho_prime,
    tau_plus_one,
    tau_power,
)


def test_spec_validation():
    with pytest.raises(ValueError):
        RhoSpec(())
    with pytest.raises(ValueError):
        RhoSpec((2, 0))
    with pytest.raises(ValueError):
        OdoPoint(RhoSpec.of(2, 3), (1, 3))


def test_metric_examples():
    spec = RhoSpec.of(5, 5, 5, 5)
    a = spec.point((1, 2, 3, 4))
    assert metric(a, a) == 0
    b = spec.point((2, 2, 3, 4))
    assert metric(a, b) == Fraction(1, 1)
    c = spec.point((1, 2, 3, 0))
    assert metric(a, c) == Fraction(1, 8)


def test_metric_spec_mismatch():
    with pytest.raises(ValueError):
        metric(RhoSpec.of(2).zero(), RhoSpec.of(3).zero())


def test_tau_plus_one_examples():
    spec = RhoSpec.of(2, 3)
    assert tau_plus_one(spec.zero()).coords == (1, 1)
    assert tau_plus_one(tau_plus_one(spec.zero())).coords == (0, 2)
    assert tau_power(spec.zero(), 2).coords == (0, 2)


def test_tau_is_isometry_exhaustive():
    # all pairs, for every spec with <= 3 moduli of size <= 4
    specs = [RhoSpec.of(2), RhoSpec.of(3, 2), RhoSpec.of(4, 3, 2), RhoSpec.of(2, 2, 4)]
    for spec in specs:
        pts = list(spec.all_points())
        for a in pts:
            for b in pts:
                assert metric(tau_plus_one(a), tau_plus_one(b)) == metric(a, b)


def test_classical_odometer_carry():
    spec = RhoSpec.of(2, 3)
    assert classical_odometer(spec.point((1, 2))).coords == (0, 0)
    assert classical_odometer(spec.point((1, 0))).coords == (0, 1)
    assert classical_odometer(spec.zero()).coords == (1, 0)


def test_classical_odometer_orbit_length():
    spec = RhoSpec.of(2, 3)
    orbit = orbit_of_zero(spec, "carry")
    assert len(orbit) == 6
    assert len({p.coords for p in orbit}) == 6


def test_maps_are_bijections_small_specs():
    for spec in (RhoSpec.of(2, 3), RhoSpec.of(4, 2), RhoSpec.of(3, 3, 2)):
        pts = list(spec.all_points())
        for step in (tau_plus_one, classical_odometer):
            images = {step(p).coords for p in pts}
            assert len(images) == len(pts)


def test_p_adic_valuation():
    assert p_adic_valuation(2, 4) == 2
    assert p_adic_valuation(2, 6) == 1
    assert p_adic_valuation(3, 6) == 1
    assert p_adic_valuation(5, 6) == 0
    with pytest.raises(ValueError):
        p_adic_valuation(2, 0)


def test_multiplicity_function_examples():
    assert multiplicity_function(RhoSpec.of(2, 3), "sup").as_dict() == {2: 1, 3: 1}
    assert multiplicity_function(RhoSpec.of(4, 6), "sup").as_dict() == {2: 2, 3: 1}
    assert multiplicity_function(RhoSpec.of(2, 2, 2), "sum").as_dict() == {2: 3}
    m = multiplicity_function(RhoSpec.of(2, 3), "sup")
    assert m(5) == 0


def test_multiplicity_rejects_non_prime_keys():
    with pytest.raises(ValueError):
        MultiplicityFn(((4, 1),))


def test_rho_prime_examples():
    assert rho_prime(RhoSpec.of(2, 3)).moduli == (2, 3)
    assert rho_prime(RhoSpec.of(2, 4)).moduli == (2, 2)
    assert rho_prime(RhoSpec.of(6, 10, 15)).moduli == (6, 5, 1)


def test_rho_prime_postcondition_random():
    rng = random.Random(20240511)
    for _ in range(1000):
        k = rng.randint(1, 6)
        spec = RhoSpec(tuple(rng.randint(1, 60) for _ in range(k)))
        prime = rho_prime(spec)
        prod = 1
        for n in range(k):
            prod *= prime.moduli[n]
            assert prod == math.lcm(*spec.moduli[: n + 1])


def test_order_of_one():
    assert order_of_one(RhoSpec.of(2, 3), cross_check=True) == 6
    assert order_of_one(RhoSpec.of(2, 4), cross_check=True) == 4
    assert order_of_one(RhoSpec.of(1, 1, 1), cross_check=True) == 1


def test_conjugacy_smoke_prefix_cardinalities():
    # same sup-mode multiplicity function and same lcm chain => same
    # prefix orbit cardinalities; different multiplicity => some prefix differs
    a = RhoSpec.of(2, 3, 6)
    b = RhoSpec.of(6, 6, 6)
    assert multiplicity_function(a, "sup").as_dict() == multiplicity_function(
        b, "sup"
    ).as_dict()
    # lcm chains agree only eventually; compare the full-product cardinality
    assert prefix_orbit_cardinalities(a)[-1] == prefix_orbit_cardinalities(b)[-1]

    c = RhoSpec.of(4, 3)
    assert multiplicity_function(a, "sup").as_dict() != multiplicity_function(
        c, "sup"
    ).as_dict()
    assert prefix_orbit_cardinalities(a) != prefix_orbit_cardinalities(c)


def test_plus_one_orbit_matches_lcm():
    for spec in (RhoSpec.of(2, 3), RhoSpec.of(2, 4), RhoSpec.of(3, 5)):
        assert len(orbit_of_zero(spec)) == order_of_one(spec)
