"""Smooth bump and ramp profiles used by the vector fields.

chi is the compactly supported bump on [0, 1], normalized so its maximum is
exactly 1 at s = 1/2.  eta ramps monotonically from 0 to 1 on [0, 1] and is
the normalized integral of the same bump family, so its derivative vanishes
to all orders at both ends.
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import PchipInterpolator

_E4 = float(np.exp(4.0))


def chi(s):
    """Bump value: exp(4) * exp(-1/(s(1-s))) on (0,1), zero outside."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = (s > 0.0) & (s < 1.0)
    si = s[inside]
    out[inside] = _E4 * np.exp(-1.0 / (si * (1.0 - si)))
    return out if out.ndim else float(out)


def chi_prime(s):
    """Derivative of chi; analytic, zero outside (0,1)."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = (s > 0.0) & (s < 1.0)
    si = s[inside]
    w = si * (1.0 - si)
    out[inside] = _E4 * np.exp(-1.0 / w) * (1.0 - 2.0 * si) / (w * w)
    return out if out.ndim else float(out)


def _raw_bump(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = (t > 0.0) & (t < 1.0)
    ti = t[inside]
    out[inside] = np.exp(-1.0 / (ti * (1.0 - ti)))
    return out


class _Eta:
    """Normalized cumulative integral of the raw bump, with exact derivative.

    The cumulative is tabulated once on a fine grid (composite Simpson) and
    interpolated monotonically; the derivative is the bump itself divided by
    the total mass, which is exact.
    """

    def __init__(self, n: int = 8193):
        t = np.linspace(0.0, 1.0, n)
        b = _raw_bump(t)
        h = t[1] - t[0]
        # composite Simpson on consecutive pairs of intervals
        cum = np.zeros(n)
        mid = _raw_bump(0.5 * (t[:-1] + t[1:]))
        cum[1:] = np.cumsum(h / 6.0 * (b[:-1] + 4.0 * mid + b[1:]))
        self.total = cum[-1]
        cum /= self.total
        cum[0], cum[-1] = 0.0, 1.0
        self._interp = PchipInterpolator(t, cum)

    def value(self, t):
        t = np.asarray(t, dtype=float)
        out = np.clip(self._interp(np.clip(t, 0.0, 1.0)), 0.0, 1.0)
        out = np.where(t <= 0.0, 0.0, np.where(t >= 1.0, 1.0, out))
        return out if out.ndim else float(out)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        out = _raw_bump(t) / self.total
        return out if out.ndim else float(out)


_ETA = _Eta()


def eta(t):
    """Ramp value: 0 for t <= 0, 1 for t >= 1, strictly increasing between."""
    return _ETA.value(t)


def eta_prime(t):
    """Exact derivative of the ramp (the normalized bump); 1-periodic
    extension is the same since the derivative vanishes at both ends."""
    t = np.asarray(t, dtype=float)
    out = np.asarray(_ETA.derivative(t % 1.0))
    return out if out.ndim else float(out)


def eta_winding(t):
    """Winding extension of the ramp: floor(t) + eta(t - floor(t)).

    Agrees with eta on [0, 1] and accumulates one unit per period, which
    is the angle bookkeeping of the isotopy composed over many periods.
    """
    t = np.asarray(t, dtype=float)
    k = np.floor(t)
    out = k + _ETA.value(t - k)
    return out if out.ndim else float(out)


ETA_PRIME_MAX = float(np.max(eta_prime(np.linspace(0.0, 1.0, 4001))))
