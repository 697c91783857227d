"""Petrophysical fields and constitutive laws.

Relative permeability laws, phase mobilities, fractional flow, and the two
gravity coefficients used by the pressure and transport equations. All
functions accept scalar or ndarray saturations and are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "FluidPair",
    "BrooksCorey",
    "Quadratic",
    "PermeabilityField",
    "PorosityField",
    "relperm",
    "relperm_deriv",
    "mobilities",
    "mobility_floor",
    "fractional_flow",
    "fractional_flow_deriv",
    "gravity_flux_coefficient",
    "gravity_drive",
    "gravity_vector",
    "validate_saturation",
]

_SAT_TOL = 1e-12


@dataclass(frozen=True)
class FluidPair:
    """Viscosities [Pa s], densities [kg/m3], gravitational acceleration [m/s2].

    Gravity acts along -e_d (the last axis points up).
    """

    mu_w: float
    mu_n: float
    rho_w: float = 0.0
    rho_n: float = 0.0
    g: float = 0.0

    def __post_init__(self):
        if self.mu_w <= 0 or self.mu_n <= 0:
            raise ValueError("viscosities must be > 0")
        if self.rho_w < 0 or self.rho_n < 0:
            raise ValueError("densities must be >= 0")


@dataclass(frozen=True)
class BrooksCorey:
    """Brooks-Corey relative permeabilities with pore-size exponent lam > 0.

    k_rw = S^((2+3 lam)/lam),  k_rn = (1-S)^2 (1 - S^((2+lam)/lam)).
    """

    lam: float

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("Brooks-Corey exponent must be > 0")

    @property
    def _a(self) -> float:
        return (2.0 + 3.0 * self.lam) / self.lam

    @property
    def _b(self) -> float:
        return (2.0 + self.lam) / self.lam

    def krw(self, S):
        return np.power(S, self._a)

    def krn(self, S):
        return (1.0 - S) ** 2 * (1.0 - np.power(S, self._b))

    def d_krw(self, S):
        return self._a * np.power(S, self._a - 1.0)

    def d_krn(self, S):
        Sb = np.power(S, self._b)
        return -2.0 * (1.0 - S) * (1.0 - Sb) - (1.0 - S) ** 2 * self._b * np.power(
            S, self._b - 1.0
        )


@dataclass(frozen=True)
class Quadratic:
    """Quadratic relative permeabilities k_rw = S^2, k_rn = (1-S)^2."""

    def krw(self, S):
        return np.square(S)

    def krn(self, S):
        return np.square(1.0 - S)

    def d_krw(self, S):
        return 2.0 * np.asarray(S, dtype=float)

    def d_krn(self, S):
        return -2.0 * (1.0 - np.asarray(S, dtype=float))


def validate_saturation(S, tol: float = _SAT_TOL):
    """Clip S into [0,1]; values outside by more than tol are a domain error."""
    S = np.asarray(S, dtype=float)
    if np.any(S < -tol) or np.any(S > 1.0 + tol):
        bad = S[(S < -tol) | (S > 1.0 + tol)]
        raise ValueError(f"saturation outside [0,1]: {bad[:5]}")
    return np.clip(S, 0.0, 1.0)


def relperm(law, S):
    """Relative permeabilities (k_rw, k_rn) at wetting saturation S."""
    S = validate_saturation(S)
    return law.krw(S), law.krn(S)


def relperm_deriv(law, S):
    """Analytic derivatives (dk_rw/dS, dk_rn/dS)."""
    S = validate_saturation(S)
    return law.d_krw(S), law.d_krn(S)


def mobilities(law, fluids: FluidPair, S):
    """Phase mobilities (lam_w, lam_n) and total mobility lam_t = lam_w + lam_n.

    No floor is applied here; the pressure solver floors lam_t itself.
    """
    krw, krn = relperm(law, S)
    lam_w = krw / fluids.mu_w
    lam_n = krn / fluids.mu_n
    return lam_w, lam_n, lam_w + lam_n


def mobility_floor(fluids: FluidPair) -> float:
    """Lower bound keeping the pressure operator uniformly elliptic."""
    return 1e-12 * max(1.0 / fluids.mu_w, 1.0 / fluids.mu_n)


def fractional_flow(law, fluids: FluidPair, S):
    """Fraction of total flow carried by the wetting phase, lam_w / lam_t."""
    lam_w, lam_n, lam_t = mobilities(law, fluids, S)
    out = np.where(lam_t > 0.0, lam_w / np.where(lam_t > 0.0, lam_t, 1.0), 0.0)
    return out if out.ndim else float(out)


def fractional_flow_deriv(law, fluids: FluidPair, S):
    """Analytic df_w/dS."""
    lam_w, lam_n, lam_t = mobilities(law, fluids, S)
    d_krw, d_krn = relperm_deriv(law, S)
    d_lw = d_krw / fluids.mu_w
    d_ln = d_krn / fluids.mu_n
    denom = np.where(lam_t > 0.0, lam_t, 1.0) ** 2
    out = np.where(lam_t > 0.0, (d_lw * lam_n - lam_w * d_ln) / denom, 0.0)
    return out if out.ndim else float(out)


def gravity_flux_coefficient(law, fluids: FluidPair, S):
    """Coefficient of the gravity flux, lam_n f_w (rho_w - rho_n).

    Vanishes at both saturation endpoints.
    """
    _, lam_n, _ = mobilities(law, fluids, S)
    fw = fractional_flow(law, fluids, S)
    return lam_n * fw * (fluids.rho_w - fluids.rho_n)


def gravity_vector(fluids: FluidPair, dim: int) -> np.ndarray:
    """Gravity acceleration vector, -g along the last axis."""
    g = np.zeros(dim)
    g[dim - 1] = -fluids.g
    return g


def gravity_drive(law, fluids: FluidPair, S, dim: int):
    """Mobility-weighted gravity drive G = (lam_w rho_w + lam_n rho_n)/lam_t * g.

    Returns an array of shape S.shape + (dim,), parallel to the gravity vector.
    """
    lam_w, lam_n, lam_t = mobilities(law, fluids, S)
    lam_t = np.maximum(lam_t, mobility_floor(fluids))
    weight = (lam_w * fluids.rho_w + lam_n * fluids.rho_n) / lam_t
    return np.multiply.outer(weight, gravity_vector(fluids, dim))


@dataclass(frozen=True)
class PermeabilityField:
    """Per-cell symmetric positive definite tensors, shape (ncells, d, d) [m2]."""

    tensors: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.tensors, dtype=float)
        if t.ndim != 3 or t.shape[1] != t.shape[2] or t.shape[1] not in (2, 3):
            raise ValueError(f"expected (n, d, d) tensors, got {t.shape}")
        if not np.allclose(t, np.swapaxes(t, 1, 2), rtol=1e-12, atol=0.0):
            raise ValueError("permeability tensors must be symmetric")
        # leading principal minors > 0
        if np.any(t[:, 0, 0] <= 0):
            raise ValueError("permeability not positive definite (minor 1)")
        m2 = t[:, 0, 0] * t[:, 1, 1] - t[:, 0, 1] * t[:, 1, 0]
        if np.any(m2 <= 0):
            raise ValueError("permeability not positive definite (minor 2)")
        if t.shape[1] == 3 and np.any(np.linalg.det(t) <= 0):
            raise ValueError("permeability not positive definite (minor 3)")
        object.__setattr__(self, "tensors", t)

    @property
    def ncells(self) -> int:
        return self.tensors.shape[0]

    @property
    def dim(self) -> int:
        return self.tensors.shape[1]

    @classmethod
    def isotropic(cls, ncells: int, dim: int, k) -> "PermeabilityField":
        k = np.broadcast_to(np.asarray(k, dtype=float), (ncells,))
        t = np.zeros((ncells, dim, dim))
        for a in range(dim):
            t[:, a, a] = k
        return cls(t)

    @classmethod
    def diagonal(cls, diag: np.ndarray) -> "PermeabilityField":
        diag = np.asarray(diag, dtype=float)
        n, d = diag.shape
        t = np.zeros((n, d, d))
        for a in range(d):
            t[:, a, a] = diag[:, a]
        return cls(t)


@dataclass(frozen=True)
class PorosityField:
    """Per-cell porosity in (0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if np.any(v <= 0.0) or np.any(v > 1.0):
            raise ValueError("porosity must lie in (0, 1]")
        object.__setattr__(self, "values", v)

    @property
    def ncells(self) -> int:
        return self.values.shape[0]

    @classmethod
    def constant(cls, ncells: int, phi: float) -> "PorosityField":
        return cls(np.full(ncells, float(phi)))
