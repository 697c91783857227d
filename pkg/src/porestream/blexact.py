"""Analytic Buckley-Leverett solution by the Welge tangent construction.

For the Riemann problem S=1 | S=0 of the 1D equation S_t + f_w(S)_x = 0 in
scaled coordinates (unit total velocity, unit porosity), the entropy solution
is a rarefaction from S=1 down to the tangent point S*, followed by a shock
to S=0 travelling at sigma* = f(S*)/S* = f'(S*).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .rockfluid import FluidPair, fractional_flow, fractional_flow_deriv

__all__ = ["BLOracle", "welge", "bl_exact"]


@dataclass(frozen=True)
class BLOracle:
    """Welge construction for one flux function.

    S_star: tangent-point saturation
    sigma_star: shock speed in scaled coordinates [1/s per unit x/t]
    """

    law: object
    fluids: FluidPair
    S_star: float
    sigma_star: float

    def flux(self, S):
        return fractional_flow(self.law, self.fluids, S)

    def flux_deriv(self, S):
        return fractional_flow_deriv(self.law, self.fluids, S)

    def tangent_residual(self) -> float:
        """|f(S*)/S* - f'(S*)|, zero for an exact tangent point."""
        return abs(
            self.flux(self.S_star) / self.S_star - self.flux_deriv(self.S_star)
        )

    def rankine_hugoniot_residual(self) -> float:
        """|sigma*(S*-0) - (f(S*)-f(0))|, zero for a consistent shock."""
        return abs(self.sigma_star * self.S_star - self.flux(self.S_star))


def welge(law, fluids: FluidPair) -> BLOracle:
    """Solve f(S)/S = f'(S) for the tangent point of the 1|0 Riemann problem."""

    def gap(S):
        return fractional_flow(law, fluids, S) / S - fractional_flow_deriv(
            law, fluids, S
        )

    S_star = brentq(gap, 1e-6, 1.0 - 1e-14, xtol=1e-15, rtol=1e-15)
    sigma = fractional_flow(law, fluids, S_star) / S_star
    return BLOracle(law=law, fluids=fluids, S_star=S_star, sigma_star=sigma)


def bl_exact(oracle: BLOracle, x, t: float):
    """Exact profile S(x, t) in scaled coordinates.

    At t=0 this is the initial step (S=1 for x <= 0). For t>0 the value is 1
    up to the tail of the rarefaction, follows the inverse of f' on [S*, 1]
    through the fan, and drops to 0 beyond the shock at x = sigma* t.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    S = np.zeros_like(x)
    if t == 0.0:
        S[x <= 0.0] = 1.0
        return float(S[0]) if scalar else S

    xi = x / t
    fp1 = oracle.flux_deriv(1.0)
    behind = xi <= fp1
    S[behind] = 1.0
    fan = (~behind) & (xi <= oracle.sigma_star)

    def invert(target):
        return brentq(
            lambda s: oracle.flux_deriv(s) - target,
            oracle.S_star,
            1.0,
            xtol=1e-14,
        )

    S[fan] = [invert(v) for v in xi[fan]]
    return float(S[0]) if scalar else S
