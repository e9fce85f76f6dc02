"""Manufactured smooth solution with matching source terms.

The target fields are

    R(x, t) = a + b * sin(k x - t)
    Q(x, t) = c + d * cos(k x + t)
    u(x, t) = e * sin(k x) * cos(t),        k = 2 pi / length.

The mass sources are the exact transport residuals.  The pressure is NOT
manufactured: the momentum source absorbs the gradient of the true closure
pressure of (R, Q), with dZ/dx obtained by implicit differentiation of the
closure equation.  Cell averages of the sources use 3-point Gauss quadrature
so the forcing is not the accuracy bottleneck of a first-order scheme.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .closure import ExponentPair, solve_closure_batch, CLOSURE_TOL
from .fields import FieldState, Grid1D

_GAUSS3_NODES = (-0.5 * math.sqrt(0.6), 0.0, 0.5 * math.sqrt(0.6))
_GAUSS3_WEIGHTS = (5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0)

__all__ = ["ManufacturedSolution"]


@dataclasses.dataclass(frozen=True)
class ManufacturedSolution:
    exps: ExponentPair
    nu_eff: float
    length: float = 1.0
    a: float = 1.5
    b: float = 0.25
    c: float = 1.5
    d: float = 0.25
    e: float = 0.3
    closure_tol: float = CLOSURE_TOL

    def __post_init__(self):
        if self.a - abs(self.b) <= 0.0 or self.c - abs(self.d) <= 0.0:
            raise ValueError("manufactured partial masses must stay positive")
        if self.length <= 0.0:
            raise ValueError("length must be positive")

    @property
    def k(self) -> float:
        return 2.0 * math.pi / self.length

    # exact fields -------------------------------------------------------

    def R(self, x, t):
        return self.a + self.b * np.sin(self.k * x - t)

    def Q(self, x, t):
        return self.c + self.d * np.cos(self.k * x + t)

    def u(self, x, t):
        return self.e * np.sin(self.k * x) * math.cos(t)

    def m(self, x, t):
        return (self.R(x, t) + self.Q(x, t)) * self.u(x, t)

    def state(self, grid: Grid1D, t: float) -> FieldState:
        x = grid.x
        return FieldState(t=t, R=self.R(x, t), Q=self.Q(x, t), m=self.m(x, t))

    # derivatives --------------------------------------------------------

    def _dR(self, x, t):
        ph = np.cos(self.k * x - t)
        return -self.b * ph, self.k * self.b * ph  # (d/dt, d/dx)

    def _dQ(self, x, t):
        ph = np.sin(self.k * x + t)
        return -self.d * ph, -self.k * self.d * ph

    def _du(self, x, t):
        return (
            -self.e * np.sin(self.k * x) * math.sin(t),          # d/dt
            self.k * self.e * np.cos(self.k * x) * math.cos(t),  # d/dx
            -self.k**2 * self.e * np.sin(self.k * x) * math.cos(t),  # d2/dx2
        )

    def _pressure_gradient(self, x, t):
        # dp/dx = gamma_plus * Z**(gamma_plus - 1) * dZ/dx with dZ/dx from
        # implicit differentiation of (Z - R) Z**(gamma-1) = Q.
        g = self.exps.gamma
        Rv = self.R(x, t)
        Qv = self.Q(x, t)
        _, dR_dx = self._dR(x, t)
        _, dQ_dx = self._dQ(x, t)
        Z, _ = solve_closure_batch(Rv, Qv, g, self.closure_tol)
        zg1 = np.power(Z, g - 1.0)
        f_Z = zg1 * (g + (1.0 - g) * Rv / Z)
        dZ_dx = (zg1 * dR_dx + dQ_dx) / f_Z
        gp = self.exps.gamma_plus
        return gp * np.power(Z, gp - 1.0) * dZ_dx

    # sources ------------------------------------------------------------

    def source_R(self, x, t):
        dR_dt, dR_dx = self._dR(x, t)
        _, du_dx, _ = self._du(x, t)
        return dR_dt + dR_dx * self.u(x, t) + self.R(x, t) * du_dx

    def source_Q(self, x, t):
        dQ_dt, dQ_dx = self._dQ(x, t)
        _, du_dx, _ = self._du(x, t)
        return dQ_dt + dQ_dx * self.u(x, t) + self.Q(x, t) * du_dx

    def source_m(self, x, t):
        uv = self.u(x, t)
        rho = self.R(x, t) + self.Q(x, t)
        dR_dt, dR_dx = self._dR(x, t)
        dQ_dt, dQ_dx = self._dQ(x, t)
        du_dt, du_dx, du_dxx = self._du(x, t)
        dm_dt = (dR_dt + dQ_dt) * uv + rho * du_dt
        conv = (dR_dx + dQ_dx) * uv * uv + 2.0 * rho * uv * du_dx
        return dm_dt + conv + self._pressure_gradient(x, t) - self.nu_eff * du_dxx

    def cell_averages(self, grid: Grid1D, t: float):
        """Gauss-3 cell averages of the three sources at time t."""
        x = grid.x
        dx = grid.dx
        fR = np.zeros(grid.n)
        fQ = np.zeros(grid.n)
        fm = np.zeros(grid.n)
        for node, w in zip(_GAUSS3_NODES, _GAUSS3_WEIGHTS):
            xq = x + node * dx
            fR += w * self.source_R(xq, t)
            fQ += w * self.source_Q(xq, t)
            fm += w * self.source_m(xq, t)
        return fR, fQ, fm
