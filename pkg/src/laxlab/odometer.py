"""Exact integer algebra of adding machines on finite products of cyclic groups.

Everything here works on finite truncations ``Z/m_0 x ... x Z/m_{K-1}``.
The two maps of interest are the componentwise +1 map (an isometry for the
cylinder metric) and the classical add-with-carry odometer.  Conjugacy-type
questions are decided through multiplicity functions (total or supremal
p-adic valuations of the moduli) and through the lcm-quotient sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

INFINITE = -1  # sentinel multiplicity; unreachable on finite truncations


@dataclass(frozen=True)
class RhoSpec:
    """A finite list of moduli defining the product group."""

    moduli: tuple[int, ...]

    def __post_init__(self):
        if not self.moduli:
            raise ValueError("empty modulus list")
        for m in self.moduli:
            if not isinstance(m, int) or m < 1:
                raise ValueError(f"modulus {m!r} must be a positive integer")

    def __len__(self) -> int:
        return len(self.moduli)

    @staticmethod
    def of(*moduli: int) -> "RhoSpec":
        return RhoSpec(tuple(int(m) for m in moduli))

    def zero(self) -> "OdoPoint":
        return OdoPoint(self, (0,) * len(self.moduli))

    def one(self) -> "OdoPoint":
        return OdoPoint(self, tuple(1 % m for m in self.moduli))

    def point(self, coords: Iterable[int]) -> "OdoPoint":
        return OdoPoint(self, tuple(int(c) for c in coords))

    def all_points(self):
        """Exhaustive enumeration; only sensible for tiny specs."""

        def rec(i):
            if i == len(self.moduli):
                yield ()
                return
            for tail in rec(i + 1):
                for q in range(self.moduli[i]):
                    yield (q,) + tail

        for coords in rec(0):
            yield OdoPoint(self, coords)


@dataclass(frozen=True)
class OdoPoint:
    """One residue per modulus, 0 <= q_n < m_n."""

    spec: RhoSpec
    coords: tuple[int, ...]

    def __post_init__(self):
        if len(self.coords) != len(self.spec.moduli):
            raise ValueError("coordinate count does not match spec")
        for q, m in zip(self.coords, self.spec.moduli):
            if not 0 <= q < m:
                raise ValueError(f"residue {q} out of range for modulus {m}")


def metric(a: OdoPoint, b: OdoPoint) -> Fraction:
    """Cylinder distance 2^-nu where nu is the first differing index.

    Points equal on the whole truncation are at distance 0.
    """
    if a.spec != b.spec:
        raise ValueError("points live on different spec")
    for n, (qa, qb) in enumerate(zip(a.coords, b.coords)):
        if qa != qb:
            return Fraction(1, 2**n)
    return Fraction(0)


def tau_plus_one(q: OdoPoint) -> OdoPoint:
    """Componentwise +1 mod m_n.  No carry between coordinates."""
    return OdoPoint(
        q.spec, tuple((c + 1) % m for c, m in zip(q.coords, q.spec.moduli))
    )


def tau_power(q: OdoPoint, k: int) -> OdoPoint:
    return OdoPoint(
        q.spec, tuple((c + k) % m for c, m in zip(q.coords, q.spec.moduli))
    )


def classical_odometer(q: OdoPoint) -> OdoPoint:
    """Add-with-carry: zero the maximal prefix of digits at m_n - 1, then
    increment the first non-maximal digit.  The all-maximal point maps to 0."""
    coords = list(q.coords)
    for n, m in enumerate(q.spec.moduli):
        if coords[n] != m - 1:
            coords[n] += 1
            for i in range(n):
                coords[i] = 0
            return OdoPoint(q.spec, tuple(coords))
    return q.spec.zero()


def p_adic_valuation(p: int, k: int) -> int:
    if k <= 0:
        raise ValueError("valuation defined for positive integers")
    v = 0
    while k % p == 0:
        k //= p
        v += 1
    return v


def _prime_factors(k: int) -> dict[int, int]:
    out: dict[int, int] = {}
    d = 2
    while d * d <= k:
        while k % d == 0:
            out[d] = out.get(d, 0) + 1
            k //= d
        d += 1 if d == 2 else 2
    if k > 1:
        out[k] = out.get(k, 0) + 1
    return out


@dataclass(frozen=True)
class MultiplicityFn:
    """Finite map prime -> multiplicity; absent primes have multiplicity 0.

    The INFINITE sentinel exists for API completeness only; finite
    truncations always produce finite values.
    """

    table: tuple[tuple[int, int], ...]

    def __post_init__(self):
        for p, v in self.table:
            if _prime_factors(p) != {p: 1}:
                raise ValueError(f"{p} is not prime")
            if v < 0 and v != INFINITE:
                raise ValueError("negative multiplicity")

    def __call__(self, p: int) -> int:
        for q, v in self.table:
            if q == p:
                return v
        return 0

    def as_dict(self) -> dict[int, int]:
        return dict(self.table)


def multiplicity_function(spec: RhoSpec, mode: str = "sup") -> MultiplicityFn:
    """Prime multiplicities of the modulus sequence.

    mode="sum": total valuation over the sequence (classical odometer data).
    mode="sup": supremal valuation (classification of the +1 map's closure).
    """
    if mode not in ("sum", "sup"):
        raise ValueError("mode must be 'sum' or 'sup'")
    acc: dict[int, int] = {}
    for m in spec.moduli:
        for p, v in _prime_factors(m).items():
            if mode == "sum":
                acc[p] = acc.get(p, 0) + v
            else:
                acc[p] = max(acc.get(p, 0), v)
    return MultiplicityFn(tuple(sorted(acc.items())))


def rho_prime(spec: RhoSpec) -> RhoSpec:
    """The lcm-quotient sequence: m'_0 = m_0 and
    m'_n = lcm(m_0..m_n) / lcm(m_0..m_{n-1})."""
    out = [spec.moduli[0]]
    running = spec.moduli[0]
    for m in spec.moduli[1:]:
        nxt = math.lcm(running, m)
        out.append(nxt // running)
        running = nxt
    prime = RhoSpec(tuple(out))
    # postcondition: prefix products match the lcm chain
    prod = 1
    running = 1
    for mp, m in zip(prime.moduli, spec.moduli):
        prod *= mp
        running = math.lcm(running, m)
        assert prod == running
    return prime


def order_of_one(spec: RhoSpec, cross_check: bool = False) -> int:
    """Order of (1,...,1) in the product group: the lcm of the moduli.

    With cross_check, iterate the +1 map from 0 until first return and
    compare (exponential in the spec size; tests only).
    """
    order = math.lcm(*spec.moduli)
    if cross_check:
        q = tau_plus_one(spec.zero())
        steps = 1
        while q != spec.zero():
            q = tau_plus_one(q)
            steps += 1
        assert steps == order
    return order


def orbit_of_zero(spec: RhoSpec, map_kind: str = "plus_one") -> list[OdoPoint]:
    """Orbit of 0 until first return, under +1 or the carry odometer."""
    step = tau_plus_one if map_kind == "plus_one" else classical_odometer
    zero = spec.zero()
    orbit = [zero]
    q = step(zero)
    while q != zero:
        orbit.append(q)
        q = step(q)
    return orbit


def prefix_orbit_cardinalities(spec: RhoSpec) -> list[int]:
    """Cardinality of the orbit of 0 under +1 on each prefix truncation."""
    return [
        math.lcm(*spec.moduli[: n + 1]) for n in range(len(spec.moduli))
    ]
