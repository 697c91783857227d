import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from porestream.rockfluid import (
    BrooksCorey,
    FluidPair,
    PermeabilityField,
    PorosityField,
    Quadratic,
    fractional_flow,
    fractional_flow_deriv,
    gravity_drive,
    gravity_flux_coefficient,
    mobilities,
    mobility_floor,
    relperm,
)

BL_FLUIDS = FluidPair(mu_w=1e-3, mu_n=5.7e-4)
LAYER_FLUIDS = FluidPair(mu_w=1e-3, mu_n=5e-3)
DEEP_FLUIDS = FluidPair(mu_w=3e-4, mu_n=3e-3)

ALL_PAIRS = [BL_FLUIDS, LAYER_FLUIDS, DEEP_FLUIDS]
ALL_LAWS = [BrooksCorey(2.0), Quadratic()]


def test_relperm_quadratic_midpoint():
    krw, krn = relperm(Quadratic(), 0.5)
    assert krw == pytest.approx(0.25)
    assert krn == pytest.approx(0.25)


def test_relperm_brooks_corey_endpoint():
    krw, krn = relperm(BrooksCorey(2.0), 1.0)
    assert krw == pytest.approx(1.0)
    assert krn == pytest.approx(0.0)


def test_relperm_brooks_corey_midpoint():
    krw, krn = relperm(BrooksCorey(2.0), 0.5)
    assert krw == pytest.approx(0.5**4)
    assert krn == pytest.approx(0.25 * (1 - 0.25))


def test_relperm_rejects_out_of_range():
    with pytest.raises(ValueError):
        relperm(Quadratic(), 1.5)
    with pytest.raises(ValueError):
        relperm(Quadratic(), -0.1)
    # within tolerance is clipped, not an error
    krw, _ = relperm(Quadratic(), 1.0 + 1e-13)
    assert krw == pytest.approx(1.0)


def test_mobilities_quadratic_equal_viscosity():
    fl = FluidPair(mu_w=1e-3, mu_n=1e-3)
    lw, ln, lt = mobilities(Quadratic(), fl, 0.5)
    assert lw == pytest.approx(250.0)
    assert ln == pytest.approx(250.0)
    assert lt == pytest.approx(500.0)


def test_mobilities_layer_fluids():
    lw, ln, lt = mobilities(Quadratic(), LAYER_FLUIDS, 0.5)
    assert lw == pytest.approx(250.0)
    assert ln == pytest.approx(50.0)
    assert lt == pytest.approx(300.0)


def test_mobilities_endpoint_single_phase():
    for law in ALL_LAWS:
        lw, ln, lt = mobilities(law, BL_FLUIDS, 1.0)
        assert ln == 0.0
        assert lt == pytest.approx(lw)


def test_fractional_flow_symmetry_and_endpoints():
    fl = FluidPair(mu_w=1e-3, mu_n=1e-3)
    assert fractional_flow(Quadratic(), fl, 0.5) == pytest.approx(0.5)
    for law in ALL_LAWS:
        for pair in ALL_PAIRS:
            assert fractional_flow(law, pair, 0.0) == 0.0
            assert fractional_flow(law, pair, 1.0) == 1.0


def test_fractional_flow_layer_value():
    assert fractional_flow(Quadratic(), LAYER_FLUIDS, 0.5) == pytest.approx(250 / 300)


@pytest.mark.parametrize("law", ALL_LAWS, ids=["brooks-corey", "quadratic"])
@pytest.mark.parametrize("pair", ALL_PAIRS)
def test_fractional_flow_monotone_on_grid(law, pair):
    S = np.linspace(0.0, 1.0, 1000)
    f = fractional_flow(law, pair, S)
    assert np.all(np.diff(f) >= -1e-14)
    assert np.all((f >= 0) & (f <= 1))


@pytest.mark.parametrize("law", ALL_LAWS, ids=["brooks-corey", "quadratic"])
@pytest.mark.parametrize("pair", ALL_PAIRS)
def test_fractional_flow_deriv_matches_difference(law, pair):
    S = np.linspace(0.01, 0.99, 200)
    h = 1e-7
    fd = (fractional_flow(law, pair, S + h) - fractional_flow(law, pair, S - h)) / (
        2 * h
    )
    an = fractional_flow_deriv(law, pair, S)
    assert np.allclose(an, fd, rtol=1e-5, atol=1e-6)


def test_consistency_fw_times_lt_is_lw():
    S = np.linspace(0.0, 1.0, 257)
    for law in ALL_LAWS:
        for pair in ALL_PAIRS:
            lw, _, lt = mobilities(law, pair, S)
            f = fractional_flow(law, pair, S)
            assert np.allclose(f * lt, lw, rtol=1e-14, atol=1e-14 * np.max(lw))


def test_mobility_floor_positive():
    for pair in ALL_PAIRS:
        S = np.linspace(0, 1, 101)
        for law in ALL_LAWS:
            _, _, lt = mobilities(law, pair, S)
            assert np.all(np.maximum(lt, mobility_floor(pair)) > 0)


def test_gravity_flux_coefficient_bell_shape():
    fl = FluidPair(mu_w=1e-3, mu_n=1e-3, rho_w=1000.0, rho_n=800.0, g=9.81)
    assert gravity_flux_coefficient(Quadratic(), fl, 0.0) == 0.0
    assert gravity_flux_coefficient(Quadratic(), fl, 1.0) == 0.0
    val = gravity_flux_coefficient(Quadratic(), fl, 0.5)
    assert val == pytest.approx(250.0 * 0.5 * 200.0)


def test_gravity_flux_zero_for_equal_densities():
    fl = FluidPair(mu_w=1e-3, mu_n=1e-3, rho_w=900.0, rho_n=900.0, g=9.81)
    S = np.linspace(0, 1, 33)
    assert np.all(gravity_flux_coefficient(Quadratic(), fl, S) == 0.0)


def test_gravity_drive_examples():
    fl0 = FluidPair(mu_w=1e-3, mu_n=1e-3, rho_w=1000.0, rho_n=800.0, g=0.0)
    G = gravity_drive(Quadratic(), fl0, 0.5, dim=2)
    assert np.all(G == 0.0)

    fl = FluidPair(mu_w=1e-3, mu_n=1e-3, rho_w=1000.0, rho_n=800.0, g=9.81)
    G1 = gravity_drive(Quadratic(), fl, 1.0, dim=2)
    assert G1[1] == pytest.approx(-1000.0 * 9.81)
    Ghalf = gravity_drive(Quadratic(), fl, 0.5, dim=2)
    assert np.linalg.norm(Ghalf) == pytest.approx(900.0 * 9.81)


@settings(max_examples=50, deadline=None)
@given(S=st.floats(0.0, 1.0))
def test_gravity_drive_between_phase_densities(S):
    fl = FluidPair(mu_w=1e-3, mu_n=2e-3, rho_w=1000.0, rho_n=700.0, g=9.81)
    G = gravity_drive(Quadratic(), fl, S, dim=3)
    mag = np.linalg.norm(G)
    assert 700.0 * 9.81 - 1e-6 <= mag <= 1000.0 * 9.81 + 1e-6
    assert G[0] == 0.0 and G[1] == 0.0


def test_permeability_validation():
    t = np.zeros((2, 2, 2))
    t[:, 0, 0] = 1.0
    t[:, 1, 1] = 1.0
    PermeabilityField(t)
    t[0, 0, 1] = 2.0  # asymmetric
    with pytest.raises(ValueError):
        PermeabilityField(t)
    t[0, 0, 1] = t[0, 1, 0] = 2.0  # symmetric but indefinite
    with pytest.raises(ValueError):
        PermeabilityField(t)


def test_permeability_isotropic_constructor():
    K = PermeabilityField.isotropic(4, 2, 1e-10)
    assert K.tensors.shape == (4, 2, 2)
    assert np.all(K.tensors[:, 0, 0] == 1e-10)
    assert np.all(K.tensors[:, 0, 1] == 0.0)


def test_porosity_validation():
    PorosityField(np.array([0.2, 1.0]))
    with pytest.raises(ValueError):
        PorosityField(np.array([0.0, 0.5]))
    with pytest.raises(ValueError):
        PorosityField(np.array([1.2]))


def test_fluid_pair_validation():
    with pytest.raises(ValueError):
        FluidPair(mu_w=0.0, mu_n=1e-3)
    with pytest.raises(ValueError):
        FluidPair(mu_w=1e-3, mu_n=1e-3, rho_w=-1.0)
