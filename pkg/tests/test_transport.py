"""Transport splitting: grid mapping, advective and gravity steps, run loop."""

import types

import numpy as np
import pytest

from porestream.blexact import bl_exact, welge
from porestream.fronttrack import FluxPolyline
from porestream.grid import build_grid
from porestream.pressure import DIRICHLET, NEUMANN, BoundarySpec, SwipgParams
from porestream.rockfluid import (
    BrooksCorey,
    FluidPair,
    PermeabilityField,
    gravity_flux_coefficient,
)
from porestream.transport import (
    DETECTION_THRESHOLD,
    advective_step,
    gravity_step,
    map_to_grid,
    run,
)

from test_tracer import uniform_field

LAW = BrooksCorey(2.0)
FLUIDS = FluidPair(mu_w=1e-3, mu_n=5.7e-4)
PHI = 0.2


# ---------------------------------------------------------------------------
# reference 1D solver: Godunov on a fine uniform grid, polyline flux


def _range_tables(values):
    n1 = len(values)
    rmin = np.empty((n1, n1))
    rmax = np.empty((n1, n1))
    for i in range(n1):
        rmin[i, i:] = np.minimum.accumulate(values[i:])
        rmax[i, i:] = np.maximum.accumulate(values[i:])
        rmin[i, :i] = np.inf
        rmax[i, :i] = -np.inf
    return rmin, rmax


def _godunov_flux(a, b, flux, rmin, rmax):
    n = flux.resolution
    fa = flux(a)
    fb = flux(b)
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    ia = np.clip(np.ceil(lo * n - 1e-12).astype(np.int64), 0, n)
    ib = np.clip(np.floor(hi * n + 1e-12).astype(np.int64), 0, n)
    has = ia <= ib
    ib = np.maximum(ib, ia)
    inner_min = np.where(has, rmin[ia, ib], np.inf)
    inner_max = np.where(has, rmax[ia, ib], -np.inf)
    fmin = np.minimum(np.minimum(fa, fb), inner_min)
    fmax = np.maximum(np.maximum(fa, fb), inner_max)
    return np.where(a <= b, fmin, fmax)


def godunov_solve(values, dx, flux, duration, cfl=0.45, left=None, right=None):
    """First-order Godunov reference for dS/dt + dF(S)/dx = 0.

    Boundary values are held at `left`/`right` (defaulting to the end
    values of the initial data).
    """
    vals = np.asarray(values, dtype=np.float64).copy()
    speed = float(np.max(np.abs(np.diff(flux.values))) * flux.resolution)
    if speed == 0.0 or duration == 0.0:
        return vals
    nsteps = max(1, int(np.ceil(duration * speed / (cfl * dx))))
    dt = duration / nsteps
    lv = vals[0] if left is None else left
    rv = vals[-1] if right is None else right
    rmin, rmax = _range_tables(flux.values)
    for _ in range(nsteps):
        ext = np.concatenate([[lv], vals, [rv]])
        F = _godunov_flux(ext[:-1], ext[1:], flux, rmin, rmax)
        vals -= (dt / dx) * (F[1:] - F[:-1])
    return vals


# ---------------------------------------------------------------------------
# mapping


def test_map_two_contributions_weighted_average():
    S_prev = np.zeros(3)
    phi = np.full(3, PHI)
    lines = [
        (np.array([1]), np.array([1.0]), np.array([0.0])),
        (np.array([1]), np.array([3.0]), np.array([1.0])),
    ]
    S, diag = map_to_grid(lines, S_prev, phi, cell_volume=1.0)
    assert S[1] == 0.75
    assert diag.uncovered_cells == 2
    assert diag.clamped_mass == 0.0


def test_map_single_constant_profile():
    S_prev = np.full(5, 0.125)
    phi = np.full(5, PHI)
    cells = np.array([0, 2, 3])
    weights = np.array([0.75, 1.25, 0.5])
    value = 0.4375
    lines = [(cells, weights, np.full(3, value))]
    S, diag = map_to_grid(lines, S_prev, phi, cell_volume=1.0)
    assert np.all(S[cells] == value)
    assert S[1] == 0.125 and S[4] == 0.125
    assert diag.uncovered_cells == 2


def test_map_uncovered_cell_keeps_previous_bitwise():
    S_prev = np.array([0.3, 0.6180339887498949])
    phi = np.full(2, PHI)
    lines = [(np.array([0]), np.array([2.0]), np.array([0.5]))]
    S, diag = map_to_grid(lines, S_prev, phi, cell_volume=1.0)
    assert S[1] == S_prev[1]
    assert S[0] == 0.5
    assert diag.uncovered_cells == 1


def test_map_clamps_and_reports_clamped_mass():
    S_prev = np.zeros(2)
    phi = np.array([0.5, 0.25])
    lines = [
        (np.array([0]), np.array([1.0]), np.array([1.25])),
        (np.array([1]), np.array([1.0]), np.array([-0.1])),
    ]
    S, diag = map_to_grid(lines, S_prev, phi, cell_volume=2.0)
    assert S[0] == 1.0 and S[1] == 0.0
    assert diag.clamped_mass == pytest.approx(
        0.25 * 0.5 * 2.0 + 0.1 * 0.25 * 2.0, rel=1e-12
    )


# ---------------------------------------------------------------------------
# advective step on a uniform strip (analytic velocity, no pressure solve)


def bl_strip(nx=100, ny=3, length=100.0, v=2e-6):
    grid = build_grid(2, (nx, ny), (length, float(ny)))
    field = uniform_field(grid, [v, 0.0])
    injectors = nx * np.arange(ny)
    return grid, field, injectors


def advance(S, field, injectors, dt, steps, backward_only=False):
    for _ in range(steps):
        S, diag = advective_step(
            S, field, PHI, LAW, FLUIDS, dt, backward_only=backward_only
        )
        S[injectors] = 1.0
    return S, diag


def front_cell(row, threshold=0.4):
    hits = np.nonzero(row >= threshold)[0]
    return int(hits[-1]) if len(hits) else -1


def test_advective_zero_saturation_stays_zero():
    grid, field, _ = bl_strip(nx=20, ny=2)
    S = np.zeros(grid.ncells)
    out, diag = advective_step(S, field, PHI, LAW, FLUIDS, dt=5e5)
    assert np.all(out == 0.0)
    assert diag.clamped_mass == 0.0


def test_advective_stagnant_field_keeps_state():
    grid = build_grid(2, (6, 4), (6.0, 4.0))
    field = uniform_field(grid, [0.0, 0.0])
    rng = np.random.default_rng(11)
    S = rng.uniform(0.0, 1.0, grid.ncells)
    out, diag = advective_step(S, field, PHI, LAW, FLUIDS, dt=1e5)
    assert np.array_equal(out, S)
    assert out is not S
    assert diag.uncovered_cells == grid.ncells


def test_advective_bl_front_and_rarefaction():
    # uniform flow: tau per cell = phi h / v = 1e5 s, three steps of 1e6 s
    grid, field, injectors = bl_strip()
    nx, ny = grid.cells
    v, dt, steps = 2e-6, 1e6, 3
    S = np.zeros(grid.ncells)
    S[injectors] = 1.0
    S, _ = advance(S, field, injectors, dt, steps)

    assert np.all(S >= 0.0) and np.all(S <= 1.0)
    rows = S.reshape(ny, nx)
    assert np.array_equal(rows[0], rows[1]) and np.array_equal(rows[1], rows[2])

    oracle = welge(LAW, FLUIDS)
    t = steps * dt
    x_front = oracle.sigma_star * t * v / PHI
    expected = int(x_front / grid.spacing[0])
    assert abs(front_cell(rows[1]) - expected) <= 1

    # rarefaction region: compare against the exact profile well behind the
    # shock, in time-of-flight coordinates tau = phi x / v
    centers = (np.arange(nx) + 0.5) * grid.spacing[0]
    tau = PHI * centers / v
    exact = bl_exact(oracle, tau, t)
    behind = slice(1, expected - 3)
    assert np.max(np.abs(rows[1][behind] - exact[behind])) <= 0.05
    # ahead of the front: untouched
    assert np.all(rows[1][expected + 2 :] == 0.0)


def test_advective_backward_only_lags_and_loses_mass():
    grid, field, injectors = bl_strip()
    nx, ny = grid.cells
    dt, steps = 1e6, 3
    S0 = np.zeros(grid.ncells)
    S0[injectors] = 1.0
    S_bi, _ = advance(S0.copy(), field, injectors, dt, steps)
    S_b, _ = advance(S0.copy(), field, injectors, dt, steps, backward_only=True)

    rows_bi = S_bi.reshape(ny, nx)[1]
    rows_b = S_b.reshape(ny, nx)[1]
    assert front_cell(rows_b) <= front_cell(rows_bi) - 3

    mass_bi = rows_bi.sum()
    mass_b = rows_b.sum()
    assert mass_b < 0.93 * mass_bi
    assert mass_b > 0.5 * mass_bi


# ---------------------------------------------------------------------------
# gravity step


def test_gravity_equal_densities_is_identity():
    grid = build_grid(2, (3, 8), (3.0, 8.0))
    K = PermeabilityField.isotropic(grid.ncells, 2, 1e-10)
    fluids = FluidPair(mu_w=1e-3, mu_n=5.7e-4, rho_w=900.0, rho_n=900.0, g=9.81)
    rng = np.random.default_rng(5)
    S = rng.uniform(0.0, 1.0, grid.ncells)
    out, diag = gravity_step(
        S, K, np.array([0.0, -9.81]), PHI, LAW, fluids, 1e4, grid
    )
    assert np.array_equal(out, S)
    assert out is not S
    assert diag.clamped_mass == 0.0


def test_gravity_zero_vector_is_identity():
    grid = build_grid(2, (3, 8), (3.0, 8.0))
    K = PermeabilityField.isotropic(grid.ncells, 2, 1e-10)
    fluids = FluidPair(mu_w=1e-3, mu_n=5.7e-4, rho_w=1000.0, rho_n=800.0, g=0.0)
    rng = np.random.default_rng(6)
    S = rng.uniform(0.0, 1.0, grid.ncells)
    out, _ = gravity_step(S, K, np.zeros(2), PHI, LAW, fluids, 1e4, grid)
    assert np.array_equal(out, S)


def test_gravity_blob_sinks_matching_godunov_column():
    # single column; water blob over lighter non-wetting phase sinks toward
    # low y. In the column coordinate sigma (phi h / |K g| per cell) the
    # equation has the buoyancy flux alone, running downward.
    ny = 50
    grid = build_grid(2, (1, ny), (1.0, float(ny)))
    K = PermeabilityField.isotropic(grid.ncells, 2, 1e-10)
    fluids = FluidPair(mu_w=1e-3, mu_n=5.7e-4, rho_w=1000.0, rho_n=800.0, g=9.81)
    g = np.array([0.0, -fluids.g])

    flux = FluxPolyline.tabulate(
        lambda s: gravity_flux_coefficient(LAW, fluids, s), 64
    )
    speed = np.max(np.abs(np.diff(flux.values))) * flux.resolution
    w = 1e-10 * fluids.g
    sigma_cell = PHI * grid.spacing[1] / w
    dt = 2.2 * sigma_cell / speed  # fastest wave moves ~2.2 cells per step

    S = np.zeros(ny)
    S[30:36] = 1.0
    S0 = S.copy()
    steps = 3
    for _ in range(steps):
        S, diag = gravity_step(S, K, g, PHI, LAW, fluids, dt, grid)
    assert np.all(S >= 0.0) and np.all(S <= 1.0)

    # mass in the column conserved to the mapping tolerance
    assert abs(S.sum() - S0.sum()) <= 0.01 * S0.sum()

    # center of mass moves down (toward y = 0)
    y = np.arange(ny) + 0.5
    com0 = (S0 * y).sum() / S0.sum()
    com = (S * y).sum() / S.sum()
    assert com < com0 - 0.5

    # fine Godunov reference on the sigma axis (running downward: sigma
    # index q corresponds to cell ny - 1 - q)
    per = 40
    fine0 = np.repeat(S0[::-1], per)
    fine = godunov_solve(fine0, sigma_cell / per, flux, steps * dt)
    reference = fine.reshape(ny, per).mean(axis=1)[::-1]
    assert np.abs(S - reference).sum() <= 0.1 * S0.sum()
    com_ref = (reference * y).sum() / reference.sum()
    assert abs(com - com_ref) <= 0.75


# ---------------------------------------------------------------------------
# run loop


def strip_scenario(nx=6, ny=2, dt=2e5, t_end=1.2e6, injector_cols=(0,),
                   extractor_cols=(4,)):
    grid = build_grid(2, (nx, ny), (float(nx), float(ny)))
    bc = BoundarySpec(grid)
    bc.set(0, DIRICHLET, 2e5)
    bc.set(1, NEUMANN, 1.5e-3 / 1460)
    cols = np.arange(ny) * nx
    injectors = np.concatenate([cols + c for c in injector_cols])
    extractors = np.concatenate([cols + c for c in extractor_cols])
    return types.SimpleNamespace(
        grid=grid,
        permeability=PermeabilityField.isotropic(grid.ncells, 2, 1e-10),
        porosity=PHI,
        fluids=FLUIDS,
        law=LAW,
        boundary=bc,
        params=SwipgParams(),
        source=None,
        dt=dt,
        t_end=t_end,
        gravity=False,
        injector_cells=injectors,
        extractor_cells=extractors,
        initial_saturation=np.zeros(grid.ncells),
        resolution=64,
        stop_on_detection=False,
    )


def test_run_immediate_detection_when_regions_intersect():
    sc = strip_scenario(extractor_cols=(0, 1))
    sc.stop_on_detection = True
    result = run(sc)
    assert result.detection_time == sc.dt
    assert len(result.reports) == 1
    assert result.reports[0].extractor_max == 1.0


def test_run_detection_bracket_and_reports():
    sc = strip_scenario()
    S, T_d, reports = run(sc)

    assert np.all(S >= 0.0) and np.all(S <= 1.0)
    assert len(reports) == int(sc.t_end / sc.dt)
    for r in reports:
        assert r.mass_pre_gravity == r.mass_post_advective
        assert r.mass_pre_advective >= 0.0
        assert r.wall_time >= 0.0

    assert T_d is not None
    k = int(round(T_d / sc.dt))
    assert k * sc.dt == T_d
    # arrival lies in (T_d - dt, T_d]: below threshold before, above at T_d
    assert reports[k - 1].extractor_max > DETECTION_THRESHOLD
    if k >= 2:
        assert reports[k - 2].extractor_max <= DETECTION_THRESHOLD
    # saturations only grow at the extractor afterwards
    later = [r.extractor_max for r in reports[k - 1 :]]
    assert max(later) <= 1.0


def test_run_rejects_end_time_not_multiple_of_dt():
    sc = strip_scenario()
    sc.t_end = 2.5 * sc.dt
    with pytest.raises(ValueError):
        run(sc)
