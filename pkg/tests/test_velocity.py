"""BDM1 velocity post-processing: face moments, conservation, Pollock data."""

import numpy as np
import pytest
import scipy.sparse.linalg as spla

from porestream.grid import FaceRef, build_grid, interior_face_arrays
from porestream.pressure import (
    DIRICHLET,
    NEUMANN,
    BoundarySpec,
    DGSpace,
    PressureField,
    SwipgParams,
    assemble,
    face_diffusivities,
    face_weights,
    penalty,
    penalty_boundary,
    reference_element,
)
from porestream.rockfluid import (
    BrooksCorey,
    FluidPair,
    PermeabilityField,
    gravity_drive,
    mobilities,
    mobility_floor,
)
from porestream.velocity import (
    PollockCell,
    VelocityField,
    bdm1_project,
    face_average,
    pollock_coefficients,
)

from test_pressure import dirichlet_everywhere

LAW = BrooksCorey(2.0)
FLUIDS = FluidPair(mu_w=1e-3, mu_n=5.7e-4)


def solve_exact(space, K, S, law, fluids, bc, params=SwipgParams(), source=None):
    system = assemble(space, K, None, S, law, fluids, bc, params, source)
    x = spla.spsolve(system.A.tocsc(), system.b)
    return PressureField(space=space, coeffs=x)


# ---------------------------------------------------------------------------
# Pollock cell data


def test_pollock_cell_difference_quotient():
    grid = build_grid(2, (2, 1), (2.0, 1.0))
    moments = {
        0: np.array([[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]),
        1: np.zeros((4, 2)),
    }
    field = VelocityField(grid=grid, moments=moments)
    cell = pollock_coefficients(field, 0)
    assert isinstance(cell, PollockCell)
    assert cell.v_in[0] == 1.0
    assert cell.v_out[0] == 2.0
    assert cell.gradient[0] == pytest.approx(1.0, abs=0.0)
    assert cell.gradient[1] == 0.0
    right = pollock_coefficients(field, 1)
    assert right.v_in[0] == 2.0
    assert right.v_out[0] == 3.0


def test_pollock_matches_cell_face_means():
    grid = build_grid(2, (3, 2), (3.0, 2.0))
    rng = np.random.default_rng(3)
    moments = {
        0: np.column_stack([rng.normal(size=8), np.zeros(8)]),
        1: np.column_stack([rng.normal(size=9), np.zeros(9)]),
    }
    field = VelocityField(grid=grid, moments=moments)
    v_lo, v_hi = field.cell_face_means()
    for c in range(grid.ncells):
        pc = pollock_coefficients(field, c)
        assert np.array_equal(pc.v_in, v_lo[:, c])
        assert np.array_equal(pc.v_out, v_hi[:, c])


# ---------------------------------------------------------------------------
# exactness on fields the face space contains


@pytest.mark.parametrize("dim", [2, 3])
def test_constant_velocity_reproduced(dim):
    cells = (7, 5) if dim == 2 else (4, 3, 3)
    extents = (1.4, 1.0) if dim == 2 else (0.8, 0.6, 0.9)
    grid = build_grid(dim, cells, extents)
    space = DGSpace(grid)
    kdiag = np.tile(np.linspace(2e-10, 5e-10, dim), (grid.ncells, 1))
    K = PermeabilityField.diagonal(kdiag)
    S = np.full(grid.ncells, 0.4)
    avec = np.array([3.0, -2.0, 1.5][:dim]) * 1e4
    bc = dirichlet_everywhere(grid, lambda p: p @ avec + 5.0)
    pressure = solve_exact(space, K, S, LAW, FLUIDS, bc)

    field = bdm1_project(pressure, K, S, LAW, FLUIDS, bc)
    _, _, lam_t = mobilities(LAW, FLUIDS, S[:1])
    v_exact = -lam_t[0] * kdiag[0] * avec
    scale = np.abs(v_exact).max()
    for a in range(dim):
        m = field.moments[a]
        assert np.abs(m[:, 0] - v_exact[a]).max() <= 1e-12 * scale
        assert np.abs(m[:, 1:]).max() <= 1e-12 * scale
    assert field.divergence_residual().max() <= 1e-12 * scale * grid.face_area(0)

    again = bdm1_project(pressure, K, S, LAW, FLUIDS, bc)
    for a in range(dim):
        assert np.array_equal(field.moments[a], again.moments[a])

    pc = pollock_coefficients(field, grid.ncells // 2)
    assert np.abs(pc.v_in - v_exact).max() <= 1e-12 * scale
    assert np.abs(pc.gradient).max() <= 1e-12 * scale / min(grid.spacing)


def test_uniform_inflow_outflow_velocity():
    # pressure-driven 1D flow: Dirichlet inlet, Neumann outlet, sealed sides
    # must give v_x equal to the prescribed outflux on every x face
    gn = 1.5e-3 / 1460
    grid = build_grid(2, (20, 20), (100.0, 100.0))
    space = DGSpace(grid)
    K = PermeabilityField.isotropic(grid.ncells, 2, 1e-10)
    S = np.full(grid.ncells, 0.2)
    bc = BoundarySpec(grid)
    bc.set(0, DIRICHLET, 2e5)
    bc.set(1, NEUMANN, gn)
    pressure = solve_exact(space, K, S, LAW, FLUIDS, bc)

    field = bdm1_project(pressure, K, S, LAW, FLUIDS, bc)
    assert np.abs(field.moments[0][:, 0] - gn).max() <= 1e-10 * gn
    assert np.abs(field.moments[0][:, 1]).max() <= 1e-10 * gn
    assert np.abs(field.moments[1]).max() <= 1e-10 * gn

    vec = field.cell_center_vectors()
    assert np.abs(vec[:, 0] - gn).max() <= 1e-10 * gn
    assert np.abs(vec[:, 1]).max() <= 1e-10 * gn


def test_face_average_orientation():
    gn = 1.5e-3 / 1460
    grid = build_grid(2, (6, 4), (30.0, 20.0))
    space = DGSpace(grid)
    K = PermeabilityField.isotropic(grid.ncells, 2, 1e-10)
    S = np.zeros(grid.ncells)
    bc = BoundarySpec(grid)
    bc.set(0, DIRICHLET, 2e5)
    bc.set(1, NEUMANN, gn)
    pressure = solve_exact(space, K, S, LAW, FLUIDS, bc)
    field = bdm1_project(pressure, K, S, LAW, FLUIDS, bc)

    interior = FaceRef(cell_minus=0, cell_plus=1, normal_axis=0)
    assert face_average(field, interior) == pytest.approx(gn, rel=1e-10)
    # outward normal at the inlet points along -x: mean outward flux is -gn
    inlet = FaceRef(cell_minus=0, cell_plus=-1, normal_axis=0, sign=-1, side=0)
    assert face_average(field, inlet) == pytest.approx(-gn, rel=1e-10)
    outlet = FaceRef(cell_minus=5, cell_plus=-1, normal_axis=0, sign=1, side=1)
    assert face_average(field, outlet) == pytest.approx(gn, rel=1e-10)


# ---------------------------------------------------------------------------
# local conservation


def random_heterogeneous_case(dim, cells, seed, with_source):
    rng = np.random.default_rng(seed)
    grid = build_grid(dim, cells, tuple(1.0 + 0.3 * a for a in range(dim)))
    space = DGSpace(grid)
    kdiag = 1e-12 * np.exp(rng.normal(size=(grid.ncells, dim)))
    K = PermeabilityField.diagonal(kdiag)
    S = rng.uniform(0.0, 1.0, grid.ncells)
    fluids = FluidPair(mu_w=1e-3, mu_n=5.7e-4, rho_w=1000.0, rho_n=800.0, g=9.81)
    bc = BoundarySpec(grid)
    bc.set(0, DIRICHLET, lambda p: 2e5 + 1e4 * p[:, dim - 1])
    bc.set(1, NEUMANN, 1e-6)
    source = None
    if with_source:
        source = rng.normal(size=grid.ncells) * 1e-6
    return grid, space, K, S, fluids, bc, source


@pytest.mark.parametrize(
    "dim,cells,seed,with_source",
    [
        (2, (12, 9), 11, False),
        (2, (10, 10), 12, True),
        (3, (4, 3, 5), 13, True),
    ],
)
def test_local_conservation_heterogeneous(dim, cells, seed, with_source):
    grid, space, K, S, fluids, bc, source = random_heterogeneous_case(
        dim, cells, seed, with_source
    )
    params = SwipgParams(beta=4.0)
    pressure = solve_exact(space, K, S, LAW, fluids, bc, params, source)
    field = bdm1_project(pressure, K, S, LAW, fluids, bc, params, source)

    resid = field.divergence_residual(source)
    scale = field.flux_scale()
    if source is not None:
        scale = scale + np.abs(source) * grid.cell_volume
    assert np.all(resid <= 1e-10 * np.maximum(scale, scale.max() * 1e-6))


def test_incompressibility_identity_2d():
    grid, space, K, S, fluids, bc, _ = random_heterogeneous_case(
        2, (9, 7), 21, False
    )
    pressure = solve_exact(space, K, S, LAW, fluids, bc)
    field = bdm1_project(pressure, K, S, LAW, fluids, bc)
    hx, hy = grid.spacing
    v_lo, v_hi = field.cell_face_means()
    net = hy * (v_hi[0] - v_lo[0]) + hx * (v_hi[1] - v_lo[1])
    scale = hy * (np.abs(v_hi[0]) + np.abs(v_lo[0])) + hx * (
        np.abs(v_hi[1]) + np.abs(v_lo[1])
    )
    assert np.abs(net).max() <= 1e-10 * scale.max()


# ---------------------------------------------------------------------------
# quadrature oracle: recompute the face moments with an independent rule


def mono_vals(exps, pts):
    return np.array([np.prod(pts ** np.asarray(e), axis=1) for e in exps]).T


def mono_grad(exps, pts, b):
    out = np.zeros((len(pts), len(exps)))
    for j, e in enumerate(exps):
        e = np.asarray(e, dtype=float)
        if e[b] == 0:
            continue
        shifted = e.copy()
        shifted[b] -= 1
        out[:, j] = e[b] * np.prod(pts**shifted, axis=1)
    return out


def gauss01(npts):
    g, w = np.polynomial.legendre.leggauss(npts)
    return (g + 1.0) / 2.0, w / 2.0


def test_moments_match_independent_quadrature():
    rng = np.random.default_rng(7)
    grid = build_grid(2, (3, 2), (1.5, 1.0))
    space = DGSpace(grid)
    ref = reference_element(1, 2)
    exps = ref.exps
    h = np.asarray(grid.spacing)
    kdiag = 1e-12 * np.exp(rng.normal(size=(grid.ncells, 2)))
    K = PermeabilityField.diagonal(kdiag)
    S = rng.uniform(0.0, 1.0, grid.ncells)
    fluids = FluidPair(mu_w=1e-3, mu_n=5.7e-4, rho_w=1000.0, rho_n=800.0, g=9.81)
    bc = dirichlet_everywhere(grid, lambda p: 1e5 * (1.0 + p[:, 0] - 0.5 * p[:, 1]))
    params = SwipgParams(beta=2.0)

    coeffs = 1e5 * rng.normal(size=grid.ncells * space.nb)
    pressure = PressureField(space=space, coeffs=coeffs)
    field = bdm1_project(pressure, K, S, LAW, fluids, bc, params)

    Pc = coeffs.reshape(grid.ncells, space.nb)
    _, _, lam_t = mobilities(LAW, fluids, S)
    lam = np.maximum(lam_t, mobility_floor(fluids))
    tensors = K.tensors
    G = gravity_drive(LAW, fluids, S, 2)
    lamKG = lam[:, None] * np.einsum("cab,cb->ca", tensors, G)

    tq, wq = gauss01(3)

    def side_flux(cell, axis, ref_pts):
        vals = np.zeros(len(ref_pts))
        for b in range(2):
            gb = mono_grad(exps, ref_pts, b) @ Pc[cell] / h[b]
            vals += lam[cell] * tensors[cell, axis, b] * gb
        return vals - lamKG[cell, axis]

    checked = 0
    for axis, pairs in interior_face_arrays(grid).items():
        tan = 1 - axis
        for mc, pc in pairs:
            pts_m = np.zeros((3, 2))
            pts_m[:, axis] = 1.0
            pts_m[:, tan] = tq
            pts_p = pts_m.copy()
            pts_p[:, axis] = 0.0
            dm, dp = face_diffusivities(
                axis, tensors[mc], tensors[pc], lam[mc], lam[pc]
            )
            wm, wp = face_weights(dm, dp)
            sig = penalty(
                dm, dp, 1, 2, params.beta,
                grid.face_area(axis), grid.cell_volume, grid.cell_volume,
            )
            jump = mono_vals(exps, pts_m) @ Pc[mc] - mono_vals(exps, pts_p) @ Pc[pc]
            fhat = (
                -(wm * side_flux(mc, axis, pts_m) + wp * side_flux(pc, axis, pts_p))
                + sig * jump
            )
            fidx = int(field.lo_faces(axis)[mc]) + int(
                np.prod([grid.cells[b] + (b == axis) for b in range(axis)])
                if axis > 0
                else 1
            )
            want0 = fhat @ wq
            want1 = 12.0 * (fhat * (tq - 0.5)) @ wq
            got = field.moments[axis][fidx]
            scale = max(abs(want0), abs(want1), 1e-30)
            assert abs(got[0] - want0) <= 1e-14 * scale
            assert abs(got[1] - want1) <= 1e-14 * scale
            checked += 1
    assert checked == 2 * 2 + 3 * 1  # interior x faces + interior y faces

    # one Dirichlet face on the low-x side, outward normal -x
    cell = 0
    pts = np.zeros((3, 2))
    pts[:, 1] = tq
    lows = grid.cell_centers()[cell] - 0.5 * h
    phys = lows + pts * h
    gd = 1e5 * (1.0 + phys[:, 0] - 0.5 * phys[:, 1])
    delta = lam[cell] * tensors[cell, 0, 0]
    sig = penalty_boundary(
        delta, 1, 2, params.beta, grid.face_area(0), grid.cell_volume
    )
    trace = mono_vals(exps, pts) @ Pc[cell]
    fhat = -side_flux(cell, 0, pts) - sig * (trace - gd)
    want0 = fhat @ wq
    want1 = 12.0 * (fhat * (tq - 0.5)) @ wq
    got = field.moments[0][field.lo_faces(0)[cell]]
    scale = max(abs(want0), abs(want1))
    assert abs(got[0] - want0) <= 1e-14 * scale
    assert abs(got[1] - want1) <= 1e-14 * scale


def test_neumann_moments_of_varying_inflow():
    grid = build_grid(2, (4, 5), (2.0, 1.0))
    space = DGSpace(grid)
    K = PermeabilityField.isotropic(grid.ncells, 2, 1e-10)
    S = np.zeros(grid.ncells)
    gn = lambda p: 1e-6 * (2.0 + 3.0 * p[:, 1])
    bc = BoundarySpec(grid)
    bc.set(0, DIRICHLET, 1e5)
    bc.set(1, NEUMANN, gn)
    pressure = solve_exact(space, K, S, LAW, FLUIDS, bc)
    field = bdm1_project(pressure, K, S, LAW, FLUIDS, bc)

    hy = grid.spacing[1]
    lo = field.lo_faces(0)
    stride_x = grid.cells[0] + 1
    for j in range(grid.cells[1]):
        cell = grid.cell_index((grid.cells[0] - 1, j))
        fidx = lo[cell] + 1
        y_mid = (j + 0.5) * hy
        mean = 1e-6 * (2.0 + 3.0 * y_mid)
        slope = 1e-6 * 3.0 * hy
        got = field.moments[0][fidx]
        assert got[0] == pytest.approx(mean, rel=1e-13)
        assert got[1] == pytest.approx(slope, rel=1e-13)
        assert fidx % stride_x == grid.cells[0]
