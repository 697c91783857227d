"""Front-tracking solver: envelopes, evolution, sampling, averaging.

Reference values: the two-shock merge under F(S)=S^2 is computed by hand
and is exact in binary floating point (all quantities dyadic); the polyline
Welge constants (shock node and speed for the 64-interval flux grids) were
frozen from an independent envelope computation; the Godunov comparison
uses the first-order scheme in oracle_utils.
"""

import numpy as np
import pytest
from oracle_utils import godunov_polyline

from porestream.blexact import welge
from porestream.fronttrack import (
    FluxPolyline,
    PiecewiseConstantFn,
    ResolutionError,
    envelope,
    evolve,
    interval_averages,
    sample,
)
from porestream.rockfluid import (
    BrooksCorey,
    FluidPair,
    Quadratic,
    fractional_flow,
)

BC_LAW = BrooksCorey(2.0)
BC_FLUIDS = FluidPair(mu_w=1e-3, mu_n=5.7e-4)
QUAD_LAW = Quadratic()
QUAD_FLUIDS = FluidPair(mu_w=1e-3, mu_n=1e-3)

# Frozen 64-interval polyline Welge data (independent envelope computation):
# Brooks-Corey waterflood flux tangents at node 51, quadratic M=1 at node 45.
BC_POLY_SHOCK_NODE = 51
BC_POLY_SIGMA = 1.1777369138650204
QUAD_POLY_SHOCK_NODE = 45
QUAD_POLY_SIGMA = 1.2070410729253982


def bc_flux(resolution=64):
    return FluxPolyline.tabulate(
        lambda s: fractional_flow(BC_LAW, BC_FLUIDS, s), resolution
    )


def quad_flux(resolution=64):
    return FluxPolyline.tabulate(
        lambda s: fractional_flow(QUAD_LAW, QUAD_FLUIDS, s), resolution
    )


def test_equal_states_empty_fan():
    fan = envelope(bc_flux(), 0.5, 0.5)
    assert len(fan) == 0


def test_convex_flux_single_shock():
    fan = envelope(FluxPolyline.tabulate(lambda s: s * s), 1.0, 0.0)
    assert len(fan) == 1
    assert fan.speeds[0] == 1.0
    assert fan.left[0] == 1.0 and fan.right[0] == 0.0


def test_quadratic_bl_fan_matches_welge():
    fan = envelope(quad_flux(), 1.0, 0.0)
    # rarefaction segments stepping down from S=1, then one shock to 0
    assert fan.left[0] == 1.0 and fan.right[-1] == 0.0
    assert np.all(np.diff(fan.speeds) > 0.0)
    assert fan.left[-1] == QUAD_POLY_SHOCK_NODE / 64
    assert fan.speeds[-1] == QUAD_POLY_SIGMA
    # within one flux-grid spacing of the smooth-flux tangent point
    oracle = welge(QUAD_LAW, QUAD_FLUIDS)
    assert abs(fan.left[-1] - oracle.S_star) <= 1.0 / 64
    assert abs(fan.speeds[-1] - oracle.sigma_star) <= 0.05


def test_brooks_corey_fan_frozen_values():
    fan = envelope(bc_flux(), 1.0, 0.0)
    assert fan.left[-1] == BC_POLY_SHOCK_NODE / 64
    assert fan.speeds[-1] == BC_POLY_SIGMA
    oracle = welge(BC_LAW, BC_FLUIDS)
    assert abs(fan.speeds[-1] - oracle.sigma_star) <= 0.05


@pytest.mark.parametrize("make_flux", [bc_flux, quad_flux])
def test_fan_entropy_and_rankine_hugoniot(make_flux):
    flux = make_flux()
    rng = np.random.default_rng(7)
    for _ in range(200):
        a, b = rng.integers(0, 65, size=2)
        fan = envelope(flux, a / 64, b / 64)
        if len(fan) == 0:
            assert a == b
            continue
        assert np.all(np.diff(fan.speeds) > 0.0)
        fl = flux.values[np.rint(fan.left * 64).astype(int)]
        fr = flux.values[np.rint(fan.right * 64).astype(int)]
        resid = fan.speeds * (fan.right - fan.left) - (fr - fl)
        assert np.max(np.abs(resid)) <= 1e-13
        # end states reproduced exactly
        assert fan.left[0] == a / 64 and fan.right[-1] == b / 64


def test_constant_data_unchanged():
    fn = PiecewiseConstantFn.constant(0.375, anchor=-2.0)
    out = evolve(fn, bc_flux(), 1e9)
    assert np.array_equal(out.values, [0.375])


def test_two_shock_merge_exact():
    # F(S)=S^2 tabulated on the 64-grid: 0.6 snaps to 38/64 = 0.59375,
    # giving shock speeds exactly 1.59375 and 0.59375 (dyadic arithmetic),
    # collision at t=1, x=1.59375, merged 1->0 shock of speed exactly 1.
    flux = FluxPolyline.tabulate(lambda s: s * s)
    init = PiecewiseConstantFn(
        np.array([-1.0, 0.0, 1.0]), np.array([1.0, 0.6, 0.0])
    )
    out = evolve(init, flux, 2.0)
    assert np.array_equal(out.values, [1.0, 0.0])
    assert out.breakpoints[-1] == 2.59375


def test_bl_riemann_front_position():
    flux = quad_flux()
    init = PiecewiseConstantFn(np.array([-1.0, 0.0]), np.array([1.0, 0.0]))
    for t in (0.25, 1.0, 7.5):
        out = evolve(init, flux, t)
        assert out.breakpoints[-1] == QUAD_POLY_SIGMA * t
        oracle = welge(QUAD_LAW, QUAD_FLUIDS)
        assert abs(out.breakpoints[-1] - oracle.sigma_star * t) <= t / 64


def test_leftward_waves_pass_the_anchor():
    flux = FluxPolyline.tabulate(lambda s: -s)
    init = PiecewiseConstantFn(np.array([-1.0, 0.0]), np.array([1.0, 0.0]))
    out = evolve(init, flux, 2.0)
    assert out.breakpoints[-1] == -2.0
    assert sample(out, -2.5) == 1.0
    assert sample(out, -1.5) == 0.0


def test_zero_duration_returns_input_profile():
    flux = bc_flux()
    init = PiecewiseConstantFn(
        np.array([0.0, 1.0, 2.0]), np.array([1.0, 0.25, 0.0])
    )
    out = evolve(init, flux, 0.0)
    xs = np.array([-0.5, 0.5, 1.5, 2.5])
    assert np.array_equal(sample(out, xs), flux.snap(sample(init, xs)))


def test_event_budget_overflow_raises():
    flux = FluxPolyline.tabulate(lambda s: s * s)
    init = PiecewiseConstantFn(
        np.array([-1.0, 0.0, 1.0]), np.array([1.0, 0.6, 0.0])
    )
    with pytest.raises(ResolutionError):
        evolve(init, flux, 2.0, max_events=0)


def _random_profile(rng, nvals=None):
    m = int(rng.integers(2, 12)) if nvals is None else nvals
    bp = np.sort(rng.uniform(-5.0, 5.0, size=m))
    bp += np.arange(m) * 1e-6  # enforce strict increase
    vals = rng.uniform(0.0, 1.0, size=m)
    return PiecewiseConstantFn(bp, vals)


@pytest.mark.parametrize("make_flux", [bc_flux, quad_flux])
def test_tv_range_and_conservation_randomized(make_flux):
    flux = make_flux()
    rng = np.random.default_rng(42)
    for _ in range(200):
        init = _random_profile(rng)
        duration = float(rng.uniform(0.0, 3.0))
        out = evolve(init, flux, duration)
        snapped = flux.snap(init.values)
        tv_in = np.sum(np.abs(np.diff(snapped)))
        assert out.total_variation() <= tv_in + 1e-12
        assert out.values.min() >= snapped.min() - 1e-15
        assert out.values.max() <= snapped.max() + 1e-15
        # conservation on a window containing every wave of both profiles
        span = 3.0 * (1.0 + duration) + 10.0
        window = np.array(
            [[min(init.breakpoints[0], out.breakpoints[0]) - span,
              max(init.breakpoints[-1], out.breakpoints[-1]) + span]]
        )
        width = window[0, 1] - window[0, 0]
        mass_in = interval_averages(
            PiecewiseConstantFn(init.breakpoints, snapped), window
        )[0] * width
        mass_out = interval_averages(out, window)[0] * width
        drift = duration * (flux(snapped[-1]) - flux(snapped[0]))
        assert mass_out - mass_in == pytest.approx(-drift, abs=1e-10 * width)


def test_semigroup_property():
    flux = bc_flux()
    rng = np.random.default_rng(3)
    init = _random_profile(rng, nvals=8)
    one = evolve(init, flux, 2.0)
    two = evolve(evolve(init, flux, 0.75), flux, 1.25)
    edges = np.linspace(-20.0, 20.0, 81)
    win = np.column_stack((edges[:-1], edges[1:]))
    assert np.allclose(
        interval_averages(one, win), interval_averages(two, win), atol=1e-9
    )


def test_sample_tie_rule():
    fn = PiecewiseConstantFn(np.array([0.0, 1.0]), np.array([0.25, 0.75]))
    assert sample(fn, 1.0) == 0.75
    assert sample(fn, 0.999999) == 0.25
    assert sample(fn, -5.0) == 0.25
    assert sample(fn, 0.0) == 0.25


def test_interval_averages_exact():
    fn = PiecewiseConstantFn(np.array([0.0, 1.0]), np.array([1.0, 0.0]))
    win = np.array([[-2.0, -1.0], [0.5, 1.5], [2.0, 3.0], [1.0, 1.0]])
    means = interval_averages(fn, win)
    assert np.array_equal(means, [1.0, 0.5, 0.0, 0.0])


def test_godunov_oracle_equivalence():
    # BL Riemann problem, Brooks-Corey waterflood flux: front tracking is
    # exact for the polyline flux, so the L1 gap to a 4000-cell Godunov
    # reference of the same flux is pure scheme diffusion and must stay
    # below 2*dS*TV with TV = 1.
    flux = bc_flux()
    T = 1.0
    x_lo, x_hi = -0.5, 2.0
    xc, S_god = godunov_polyline(
        flux.values, 4000, x_lo, x_hi,
        lambda x: np.where(x < 0.0, 1.0, 0.0), T,
    )
    init = PiecewiseConstantFn(np.array([-1.0, 0.0]), np.array([1.0, 0.0]))
    out = evolve(init, flux, T)
    dx = (x_hi - x_lo) / 4000
    edges = x_lo + dx * np.arange(4001)
    win = np.column_stack((edges[:-1], edges[1:]))
    S_ft = interval_averages(out, win)
    l1 = np.sum(np.abs(S_ft - S_god)) * dx
    assert l1 <= 2.0 * flux.dS * 1.0
