"""Barotropic pressure laws, Helmholtz potentials, and Bregman distances.

For a power-law phase with exponent g > 1 the pressure is p(rho) = rho**g
and the Helmholtz potential is H(rho) = rho**g / (g - 1), which satisfies
the Legendre identity rho * H'(rho) - H(rho) = p(rho).  The Bregman distance
of H is the convexity gap

    B(rho | ref) = H(rho) - H'(ref) * (rho - ref) - H(ref) >= 0,

the density-discrepancy integrand of the relative-energy functional.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

__all__ = [
    "PhaseLaw",
    "pressure",
    "dpressure",
    "helmholtz",
    "dhelmholtz",
    "bregman",
    "pressure_bregman",
]


@dataclasses.dataclass(frozen=True)
class PhaseLaw:
    """Power-law phase pressure p(rho) = rho**gamma with gamma > 1 strictly.

    gamma == 1 is rejected: H(rho) = rho**gamma / (gamma - 1) has no
    logarithmic branch here.
    """

    gamma: float

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma > 1.0):
            raise ValueError("phase law requires gamma > 1")


def pressure(rho, law: PhaseLaw):
    """Barotropic pressure rho**gamma."""
    return np.power(rho, law.gamma)


def dpressure(rho, law: PhaseLaw):
    """Pressure derivative gamma * rho**(gamma - 1)."""
    return law.gamma * np.power(rho, law.gamma - 1.0)


def helmholtz(rho, law: PhaseLaw):
    """Helmholtz potential rho**gamma / (gamma - 1)."""
    return np.power(rho, law.gamma) / (law.gamma - 1.0)


def dhelmholtz(rho, law: PhaseLaw):
    """H'(rho) = gamma * rho**(gamma - 1) / (gamma - 1)."""
    return law.gamma * np.power(rho, law.gamma - 1.0) / (law.gamma - 1.0)


def _power_gap(rho, rho_ref, gamma):
    # rho**g - ref**g - g*ref**(g-1)*(rho - ref), written as
    # ref**g * (expm1(g*log1p(x)) - g*x) with x = (rho - ref)/ref.  The
    # leading-order cancellation happens inside expm1 - g*x at ~eps*g*x
    # absolute error, so the quadratic gap keeps ~eps/x relative accuracy
    # instead of the ~eps/x**2 of the naive three-term difference.
    rho = np.asarray(rho, dtype=float)
    ref = np.asarray(rho_ref, dtype=float)
    x = (rho - ref) / ref
    with np.errstate(divide="ignore"):
        g = np.expm1(gamma * np.log1p(x)) - gamma * x
    return np.power(ref, gamma) * g


def bregman(rho, rho_ref, law: PhaseLaw):
    """Convexity gap H(rho) - H'(ref) * (rho - ref) - H(ref), clamped at 0.

    Exactly zero when rho == ref; the clamp removes sub-ulp negative
    round-off, since the gap is nonnegative by convexity.  Requires ref > 0;
    rho = 0 is allowed and gives H'(ref) * ref - H(ref) = p(ref) exactly.
    """
    out = np.maximum(_power_gap(rho, rho_ref, law.gamma) / (law.gamma - 1.0), 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def pressure_bregman(rho, rho_ref, law: PhaseLaw):
    """p(ref) - p'(ref) * (ref - rho) - p(rho), the pressure-scale gap.

    Equals minus the Bregman distance of the (convex) pressure itself, so it
    is nonpositive, and O((rho - ref)**2) on compact density windows.
    """
    out = -np.maximum(_power_gap(rho, rho_ref, law.gamma), 0.0)
    if out.ndim == 0:
        return float(out)
    return out
