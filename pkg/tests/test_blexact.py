"""Welge tangent-construction oracle.

The frozen constants below were computed by an independent high-resolution
sweep (golden-section refinement of max_S f(S)/S on a 1e7-point grid, then
Newton polishing with the analytic derivative) and are used as fixed
reference values; the quadratic equal-viscosity case also has a closed form
(S* = 1/sqrt(2), sigma* = (1 + sqrt(2))/2).
"""

import numpy as np
import pytest

from porestream.blexact import bl_exact, welge
from porestream.rockfluid import BrooksCorey, FluidPair, Quadratic

# Brooks-Corey lambda=2, mu_w=1e-3, mu_n=5.7e-4 (the waterflood pair used
# by the built-in scenarios).
BC_S_STAR = 0.7923777075182908
BC_SIGMA_STAR = 1.1779299924904654

QUAD_S_STAR = 1.0 / np.sqrt(2.0)
QUAD_SIGMA_STAR = (1.0 + np.sqrt(2.0)) / 2.0


@pytest.fixture(scope="module")
def bc_oracle():
    return welge(BrooksCorey(2.0), FluidPair(mu_w=1e-3, mu_n=5.7e-4))


@pytest.fixture(scope="module")
def quad_oracle():
    return welge(Quadratic(), FluidPair(mu_w=1e-3, mu_n=1e-3))


def test_quadratic_equal_viscosity_closed_form(quad_oracle):
    assert quad_oracle.S_star == pytest.approx(QUAD_S_STAR, abs=1e-12)
    assert quad_oracle.sigma_star == pytest.approx(QUAD_SIGMA_STAR, abs=1e-12)


def test_brooks_corey_frozen_values(bc_oracle):
    assert bc_oracle.S_star == pytest.approx(BC_S_STAR, abs=1e-11)
    assert bc_oracle.sigma_star == pytest.approx(BC_SIGMA_STAR, abs=1e-11)


@pytest.mark.parametrize("name", ["bc", "quad"])
def test_tangent_and_shock_conditions(name, bc_oracle, quad_oracle):
    oracle = bc_oracle if name == "bc" else quad_oracle
    assert oracle.tangent_residual() <= 1e-10
    assert oracle.rankine_hugoniot_residual() <= 1e-10


def test_initial_condition_is_step(bc_oracle):
    x = np.array([-1.0, -1e-9, 0.0, 1e-9, 1.0])
    S = bl_exact(bc_oracle, x, 0.0)
    assert np.array_equal(S, [1.0, 1.0, 1.0, 0.0, 0.0])


def test_profile_structure(bc_oracle):
    t = 2.0
    xs = np.linspace(-0.5, 3.0, 800)
    S = bl_exact(bc_oracle, xs, t)
    # ahead of the shock: dry
    assert np.all(S[xs > bc_oracle.sigma_star * t + 1e-9] == 0.0)
    # behind the fan: fully saturated
    assert np.all(S[xs <= 0.0] == 1.0)
    # monotone nonincreasing overall
    assert np.all(np.diff(S) <= 1e-12)
    # value just behind the shock approaches S*
    x_behind = bc_oracle.sigma_star * t * (1.0 - 1e-9)
    assert bl_exact(bc_oracle, x_behind, t) == pytest.approx(
        bc_oracle.S_star, abs=1e-5
    )


def test_fan_inverts_flux_derivative(quad_oracle):
    t = 1.5
    xs = np.linspace(0.05, quad_oracle.sigma_star * t * 0.999, 40)
    S = bl_exact(quad_oracle, xs, t)
    assert np.allclose(quad_oracle.flux_deriv(S), xs / t, atol=1e-9)


def test_scalar_input(bc_oracle):
    val = bl_exact(bc_oracle, 0.1, 1.0)
    assert isinstance(val, float)
    assert 0.0 < val < 1.0


def test_self_similarity(bc_oracle):
    xs = np.linspace(0.0, 2.0, 50)
    S1 = bl_exact(bc_oracle, xs, 1.0)
    S2 = bl_exact(bc_oracle, 2.0 * xs, 2.0)
    assert np.allclose(S1, S2, atol=1e-12)
