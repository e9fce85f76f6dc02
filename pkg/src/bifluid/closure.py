"""Implicit pressure-equilibrium closure for the two-fluid model.

Given the per-cell partial masses R and Q, equality of the two power-law
phase pressures reduces to one scalar equation for a density-like unknown Z:

    (Z - R) * Z**(gamma - 1) = Q,    Z >= R,    gamma = gamma_plus / gamma_minus.

Z is the density of phase +, Z**gamma the density of phase -, Z**gamma_plus
the common pressure, and R / Z the volume fraction of phase +.  The residual
is strictly increasing in Z on [R, oo), so the root is unique and can be
bracketed; ``solve_closure`` is a bisection-safeguarded Newton iteration on
that bracket.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

CLOSURE_TOL = 1e-12
CLOSURE_MAX_ITER = 200
VACUUM_ALPHA_DEFAULT = 0.5

__all__ = [
    "CLOSURE_TOL",
    "CLOSURE_MAX_ITER",
    "VACUUM_ALPHA_DEFAULT",
    "NonFiniteInputError",
    "MaxIterExceededError",
    "VacuumCellError",
    "DegenerateDenominatorError",
    "ExponentPair",
    "PartialMasses",
    "ClosureState",
    "AlphaSensitivity",
    "closure_residual",
    "solve_closure",
    "solve_closure_batch",
    "recover_state",
    "alpha_partials",
    "alpha_partials_batch",
    "omega_of_alpha",
    "omega_bound",
]


class NonFiniteInputError(ValueError):
    """An input to the closure is NaN or infinite."""


class MaxIterExceededError(RuntimeError):
    """Root iteration did not converge within the iteration cap.

    With the default tolerance this signals a misconfigured tolerance, not a
    missing root: the residual is monotone and bracketed.
    """


class VacuumCellError(ValueError):
    """Operation undefined on the vacuum set R = Q = 0."""


class DegenerateDenominatorError(ArithmeticError):
    """Sensitivity denominator underflowed (inputs at sub-normal scale)."""


@dataclasses.dataclass(frozen=True)
class ExponentPair:
    """Adiabatic exponents of the two phases, both strictly above 1."""

    gamma_plus: float
    gamma_minus: float

    def __post_init__(self):
        if not (math.isfinite(self.gamma_plus) and math.isfinite(self.gamma_minus)):
            raise NonFiniteInputError("adiabatic exponents must be finite")
        if not (self.gamma_plus > 1.0 and self.gamma_minus > 1.0):
            raise ValueError("adiabatic exponents must be > 1")

    @property
    def gamma(self) -> float:
        """Exponent ratio gamma_plus / gamma_minus, always recomputed."""
        return self.gamma_plus / self.gamma_minus


@dataclasses.dataclass(frozen=True)
class PartialMasses:
    """Conserved pair: R = alpha * rho_plus, Q = (1 - alpha) * rho_minus."""

    R: float
    Q: float

    def __post_init__(self):
        if not (math.isfinite(self.R) and math.isfinite(self.Q)):
            raise NonFiniteInputError("partial masses must be finite")
        if self.R < 0.0 or self.Q < 0.0:
            raise ValueError("partial masses must be nonnegative")


@dataclasses.dataclass(frozen=True)
class ClosureState:
    """Per-cell quantities recovered from (R, Q) through the closure."""

    Z: float
    alpha: float
    rho_plus: float
    rho_minus: float
    p: float
    vacuum_flag: bool = False


@dataclasses.dataclass(frozen=True)
class AlphaSensitivity:
    """Partial derivatives of alpha(R, Q) and the compression coefficient.

    omega multiplies div(u) in the evolution equation for alpha; it satisfies
    d_alpha_dR * R + d_alpha_dQ * Q == omega.
    """

    d_alpha_dR: float
    d_alpha_dQ: float
    omega: float


def _pow_zero_safe(Z, expo):
    # 0**0 == 1; 0**negative is mapped to 0 because the residual multiplies
    # it by (Z - R), which vanishes whenever Z == 0 lies in the bracket.
    if expo >= 0.0:
        return np.power(Z, expo)
    with np.errstate(divide="ignore"):
        p = np.power(Z, expo)
    return np.where(Z == 0.0, 0.0, p)


def closure_residual(Z, R, Q, gamma):
    """Residual f(Z) = (Z - R) * Z**(gamma - 1) - Q of the closure equation.

    f is strictly increasing in Z on [R, oo): its derivative factors as
    Z**(gamma - 2) * (gamma * Z + (1 - gamma) * R), which is positive there.
    """
    Z = np.asarray(Z, dtype=float)
    Ra = np.asarray(R, dtype=float)
    Qa = np.asarray(Q, dtype=float)
    out = (Z - Ra) * _pow_zero_safe(Z, gamma - 1.0) - Qa
    if out.ndim == 0:
        return float(out)
    return out


def _validate_inputs(R, Q, gamma):
    if not (np.all(np.isfinite(R)) and np.all(np.isfinite(Q))):
        raise NonFiniteInputError("R and Q must be finite")
    if np.any(R < 0.0) or np.any(Q < 0.0):
        raise ValueError("R and Q must be nonnegative")
    if not (math.isfinite(gamma) and gamma > 0.0):
        raise ValueError("gamma must be a positive finite number")


def solve_closure_batch(R, Q, gamma, tol=CLOSURE_TOL, max_iter=CLOSURE_MAX_ITER):
    """Vectorised closure solve; returns (Z, iterations).

    Exact branches: Q == 0 gives Z = R, R == 0 gives Z = Q**(1/gamma) (zero at
    vacuum), gamma == 1 gives Z = R + Q, and gamma == 2 is solved by the
    quadratic formula.  Elsewhere a Newton iteration runs inside the bracket
    [R, hi], hi found by geometric doubling from max(R, Q**(1/gamma)) until
    the residual turns nonnegative; steps leaving the bracket fall back to
    bisection.  Convergence: |f(Z)| <= tol * max(Q, floor) with the floor a
    few ulps of Z**gamma, the round-off scale of the residual evaluation.
    Since f' >= min(1, gamma) * Z**(gamma-1) on the bracket, this bounds the
    relative error of Z by about tol / min(1, gamma).
    """
    R = np.asarray(R, dtype=float)
    Q = np.asarray(Q, dtype=float)
    _validate_inputs(R, Q, gamma)
    if not (tol > 0.0):
        raise ValueError("tol must be positive")

    if gamma == 1.0:
        return R + Q, 0
    if gamma == 2.0:
        return 0.5 * (R + np.sqrt(R * R + 4.0 * Q)), 0

    Z = np.where(Q == 0.0, R, np.power(Q, 1.0 / gamma))
    Z = np.where((R > 0.0) & (Q > 0.0), 0.0, Z)
    mask = (R > 0.0) & (Q > 0.0)
    if not mask.any():
        return Z, 0

    r = R[mask]
    q = Q[mask]
    lo = r.copy()
    hi = np.maximum(r, np.power(q, 1.0 / gamma))
    # f < 0 at both bracket seeds, so at least one doubling always runs.
    for _ in range(max_iter):
        f_hi = (hi - r) * np.power(hi, gamma - 1.0) - q
        grow = f_hi < 0.0
        if not grow.any():
            break
        lo = np.where(grow, hi, lo)
        hi = np.where(grow, 2.0 * hi, hi)
    else:
        raise MaxIterExceededError("bracket expansion did not terminate")

    z = hi.copy()
    done = np.zeros(z.shape, dtype=bool)
    f_tol_q = tol * q
    # the subtraction (z - r) bounds the achievable residual at a few ulps
    # of z**gamma, scaled by the local slope factor (1 + gamma)
    f_floor = 4.0 * (1.0 + gamma) * np.finfo(float).eps
    iterations = 0
    for iterations in range(1, max_iter + 1):
        zg1 = np.power(z, gamma - 1.0)
        f = (z - r) * zg1 - q
        neg = f < 0.0
        lo = np.where(~done & neg, z, lo)
        hi = np.where(~done & ~neg, z, hi)
        done |= np.abs(f) <= np.maximum(f_tol_q, f_floor * zg1 * z)
        if done.all():
            break
        fp = zg1 * (gamma + (1.0 - gamma) * (r / z))
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = z - f / fp
        inside = np.isfinite(newton) & (newton > lo) & (newton < hi)
        cand = np.where(inside, newton, 0.5 * (lo + hi))
        z = np.where(done, z, cand)
    else:
        bad = np.flatnonzero(mask)[~done]
        raise MaxIterExceededError(
            f"closure iteration exceeded {max_iter} iterations at cells {bad.tolist()[:8]}"
        )

    Z[mask] = z
    return Z, iterations


def solve_closure(R, Q, gamma, tol=CLOSURE_TOL, max_iter=CLOSURE_MAX_ITER) -> float:
    """Unique root Z >= R of the closure equation for scalar (R, Q)."""
    Z, _ = solve_closure_batch(
        np.asarray(R, dtype=float), np.asarray(Q, dtype=float), gamma, tol, max_iter
    )
    return float(Z)


def recover_state(
    R,
    Q,
    exps: ExponentPair,
    tol=CLOSURE_TOL,
    vacuum_alpha=VACUUM_ALPHA_DEFAULT,
) -> ClosureState:
    """Solve the closure and recover (Z, alpha, phase densities, pressure).

    Vacuum cells (R = Q = 0) get Z = p = 0, a flagged sentinel alpha, and
    vacuum_flag set; alpha has no pointwise meaning there.
    """
    Z = solve_closure(R, Q, exps.gamma, tol)
    if Z == 0.0:
        return ClosureState(
            Z=0.0,
            alpha=float(vacuum_alpha),
            rho_plus=0.0,
            rho_minus=0.0,
            p=0.0,
            vacuum_flag=True,
        )
    return ClosureState(
        Z=Z,
        alpha=float(R) / Z,
        rho_plus=Z,
        rho_minus=Z**exps.gamma,
        p=Z**exps.gamma_plus,
        vacuum_flag=False,
    )


def omega_of_alpha(alpha, gamma):
    """Compression coefficient (gamma-1) * a * (1-a) / (gamma*(1-a) + a).

    The denominator is bounded below by min(1, gamma) on [0, 1], so the
    coefficient is bounded: |omega| <= |gamma-1| / (4 * min(1, gamma)).
    """
    a = np.asarray(alpha, dtype=float)
    out = (gamma - 1.0) * a * (1.0 - a) / (gamma * (1.0 - a) + a)
    if out.ndim == 0:
        return float(out)
    return out


def omega_bound(gamma: float) -> float:
    """Sharp uniform bound on |omega_of_alpha| over alpha in [0, 1]."""
    return abs(gamma - 1.0) / (4.0 * min(1.0, gamma))


def alpha_partials_batch(R, Q, gamma, tol=CLOSURE_TOL):
    """Vectorised d(alpha)/dR, d(alpha)/dQ and omega for nonvacuum (R, Q).

    The textbook quotients -alpha**gamma / (Q*gamma*alpha**(gamma-1) +
    R**gamma) and gamma*R**(gamma-1)*(1-alpha) / (same) are evaluated with
    numerator and denominator rescaled by alpha**(1-gamma), i.e. as

        d_alpha_dQ = -alpha / (gamma*Q + R*Z**(gamma-1)),
        d_alpha_dR = gamma * Z**(gamma-1) * (1-alpha) / (gamma*Q + R*Z**(gamma-1)),

    which is the analytic one-sided limit form and stays finite down to
    alpha -> 0 where the raw denominator underflows.
    """
    R = np.asarray(R, dtype=float)
    Q = np.asarray(Q, dtype=float)
    _validate_inputs(R, Q, gamma)
    vac = (R == 0.0) & (Q == 0.0)
    if vac.any():
        raise VacuumCellError(
            f"alpha partials undefined at vacuum cells {np.flatnonzero(vac).tolist()[:8]}"
        )
    Z, _ = solve_closure_batch(R, Q, gamma, tol)
    alpha = R / Z
    zg1 = np.power(Z, gamma - 1.0)
    den = gamma * Q + R * zg1
    if np.any(den == 0.0) or not np.all(np.isfinite(den)):
        raise DegenerateDenominatorError("sensitivity denominator underflowed")
    d_dR = gamma * zg1 * (1.0 - alpha) / den
    d_dQ = -alpha / den
    return d_dR, d_dQ, omega_of_alpha(alpha, gamma)


def alpha_partials(R, Q, gamma, tol=CLOSURE_TOL) -> AlphaSensitivity:
    """Sensitivities of the recovered volume fraction at one (R, Q) point."""
    if R + Q == 0.0:
        raise VacuumCellError("alpha partials undefined at R = Q = 0")
    d_dR, d_dQ, omega = alpha_partials_batch(
        np.asarray(R, dtype=float), np.asarray(Q, dtype=float), gamma, tol
    )
    return AlphaSensitivity(float(d_dR), float(d_dQ), float(omega))
