"""Locally conservative velocity post-processing of the DG pressure.

The DG total velocity -lambda_t K (grad P - G) is not normal-continuous
across faces. This module projects it face-by-face onto the lowest-order
BDM space: on every face the normal flux is represented by its moments
against the linear face functions {1, t - 1/2 per tangent}, where the face
value is the interior-penalty numerical flux

    interior:  {-lambda K (grad P - G) . n}_w + sigma_e [P]
    Dirichlet: -lambda K (grad P - G) . n + sigma_e (P - g_D)
    Neumann:   g_N        (outward normal velocity, as prescribed)
    no-flow:   0

evaluated with the same weights, penalty, and quadrature as the assembly.
Because testing the pressure system against a cell indicator reproduces
exactly these flux integrals, each cell's net face flux equals its source
integral to solver tolerance: the field is locally conservative, and the
single stored value per face makes the normal component continuous by
construction. Face averages feed the per-cell-linear Pollock model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import FaceRef, StructuredGrid, boundary_face_arrays, interior_face_arrays
from .pressure import (
    DIRICHLET,
    NEUMANN,
    BoundarySpec,
    PressureField,
    SwipgParams,
    face_diffusivities,
    face_weights,
    penalty,
    penalty_boundary,
    reference_element,
)
from .rockfluid import FluidPair, PermeabilityField, gravity_drive, mobilities, mobility_floor

__all__ = [
    "VelocityField",
    "PollockCell",
    "bdm1_project",
    "face_average",
    "pollock_coefficients",
]


def _cell_coords_array(grid: StructuredGrid) -> np.ndarray:
    idx = np.arange(grid.ncells)
    coords = np.empty((grid.ncells, grid.dim), dtype=np.int64)
    for a in range(grid.dim):
        coords[:, a] = idx % grid.cells[a]
        idx = idx // grid.cells[a]
    return coords


def _face_strides(grid: StructuredGrid, axis: int) -> np.ndarray:
    counts = list(grid.cells)
    counts[axis] += 1
    strides = np.empty(grid.dim, dtype=np.int64)
    s = 1
    for b in range(grid.dim):
        strides[b] = s
        s *= counts[b]
    return strides


def _lo_face_indices(grid: StructuredGrid, axis: int) -> np.ndarray:
    """Index of each cell's low face in the axis-normal face numbering."""
    return _cell_coords_array(grid) @ _face_strides(grid, axis)


@dataclass
class VelocityField:
    """Face-based total velocity [m/s].

    moments[a] has one row per face with normal along axis a, faces numbered
    lexicographically (x fastest) over the (cells[a]+1) face planes. Column
    0 is the mean normal velocity along +axis; column 1+t is the linear
    coefficient against (t_hat - 1/2) for the t-th in-face axis (ascending
    axis order). Interior faces store one value, so the normal component is
    single-valued by construction.
    """

    grid: StructuredGrid
    moments: dict[int, np.ndarray]

    def lo_faces(self, axis: int) -> np.ndarray:
        return _lo_face_indices(self.grid, axis)

    def cell_face_means(self) -> tuple[np.ndarray, np.ndarray]:
        """(v_lo, v_hi): (dim, ncells) mean +axis normal velocity at each
        cell's low and high face per axis."""
        d = self.grid.dim
        n = self.grid.ncells
        v_lo = np.empty((d, n))
        v_hi = np.empty((d, n))
        for a in range(d):
            lo = self.lo_faces(a)
            stride = _face_strides(self.grid, a)[a]
            v_lo[a] = self.moments[a][lo, 0]
            v_hi[a] = self.moments[a][lo + stride, 0]
        return v_lo, v_hi

    def cell_center_vectors(self) -> np.ndarray:
        """(ncells, dim) velocity at cell centers of the per-cell linear model."""
        v_lo, v_hi = self.cell_face_means()
        return 0.5 * (v_lo + v_hi).T

    def divergence_residual(self, source: np.ndarray | None = None) -> np.ndarray:
        """Per-cell |net outward face flux - source integral| [m^d/s]."""
        grid = self.grid
        v_lo, v_hi = self.cell_face_means()
        net = np.zeros(grid.ncells)
        for a in range(grid.dim):
            net += grid.face_area(a) * (v_hi[a] - v_lo[a])
        if source is not None:
            net -= np.asarray(source) * grid.cell_volume
        return np.abs(net)

    def flux_scale(self) -> np.ndarray:
        """Per-cell sum of absolute face fluxes, for relative tolerances."""
        grid = self.grid
        v_lo, v_hi = self.cell_face_means()
        scale = np.zeros(grid.ncells)
        for a in range(grid.dim):
            scale += grid.face_area(a) * (np.abs(v_hi[a]) + np.abs(v_lo[a]))
        return scale


@dataclass(frozen=True)
class PollockCell:
    """Per-axis linear velocity model of one cell.

    v_in[a] and v_out[a] are the +axis normal velocities at the low and
    high face; gradient[a] = (v_out[a] - v_in[a]) / h[a].
    """

    cell: int
    v_in: np.ndarray
    v_out: np.ndarray
    gradient: np.ndarray


def bdm1_project(
    pressure: PressureField,
    K: PermeabilityField,
    S: np.ndarray,
    law,
    fluids: FluidPair,
    boundary: BoundarySpec,
    params: SwipgParams = SwipgParams(),
    source: np.ndarray | None = None,
) -> VelocityField:
    """Project the DG velocity onto single-valued linear face fluxes.

    Uses the same mobility floor, weights, penalty, and quadrature as the
    pressure assembly, which is what makes the per-cell flux balance exact
    up to the linear-solver residual.
    """
    space = pressure.space
    grid = space.grid
    d = grid.dim
    nb = space.nb
    n = grid.ncells
    h = np.asarray(grid.spacing)
    V = grid.cell_volume
    ref = reference_element(space.order, d)
    Pc = pressure.coeffs.reshape(n, nb)

    S = np.asarray(S, dtype=np.float64)
    _, _, lam_t = mobilities(law, fluids, S)
    lam = np.maximum(lam_t, mobility_floor(fluids))
    tensors = K.tensors
    G = gravity_drive(law, fluids, S, d)
    lamKG = lam[:, None] * np.einsum("cab,cb->ca", tensors, G)

    coords = _cell_coords_array(grid)
    moments = {}
    for a in range(d):
        counts = list(grid.cells)
        counts[a] += 1
        moments[a] = np.zeros((int(np.prod(counts)), d))

    def tangent_weights(fr):
        # rows: quadrature; cols: in-face axes; integrates 12*(t-1/2)*F
        return 12.0 * fr.wts[:, None] * (fr.offsets - 0.5)

    for a, pairs in interior_face_arrays(grid).items():
        if len(pairs) == 0:
            continue
        mc = pairs[:, 0]
        pc = pairs[:, 1]
        fr = ref.faces[a]
        W = fr.wts
        Tm, Tp = fr.T_hi, fr.T_lo
        Dm, Dp = fr.D_hi, fr.D_lo

        dm, dp = face_diffusivities(a, tensors[mc], tensors[pc], lam[mc], lam[pc])
        wm, wp = face_weights(dm, dp)
        sig = penalty(dm, dp, space.order, d, params.beta, grid.face_area(a), V, V)

        rowm = lam[mc, None] * tensors[mc, a, :]  # (nf, d)
        rowp = lam[pc, None] * tensors[pc, a, :]
        # lambda K grad P . e_a on each side at quad points: (nf, nq)
        gm = np.einsum("fb,bqj,fj->fq", rowm / h, Dm, Pc[mc])
        gp = np.einsum("fb,bqj,fj->fq", rowp / h, Dp, Pc[pc])
        flux_m = gm - lamKG[mc, a][:, None]
        flux_p = gp - lamKG[pc, a][:, None]
        jump = Pc[mc] @ Tm.T - Pc[pc] @ Tp.T
        Fhat = -(wm[:, None] * flux_m + wp[:, None] * flux_p) + sig[:, None] * jump

        stride = _face_strides(grid, a)[a]
        fidx = coords @ _face_strides(grid, a)
        fidx = fidx[mc] + stride  # high face of the minus cell
        moments[a][fidx, 0] = Fhat @ W
        moments[a][fidx, 1:] = Fhat @ tangent_weights(fr)

    for side, cells in boundary_face_arrays(grid).items():
        a, hi = divmod(side, 2)
        o = 1.0 if hi else -1.0
        fr = ref.faces[a]
        W = fr.wts
        T = fr.T_hi if hi else fr.T_lo
        D = fr.D_hi if hi else fr.D_lo
        kind = boundary.kind[side]
        fidx_all = coords @ _face_strides(grid, a)
        if hi:
            fidx_all = fidx_all + _face_strides(grid, a)[a]

        ref_pts = fr.pts_hi if hi else fr.pts_lo
        lows = grid.cell_centers()[cells] - 0.5 * h
        qpts = lows[:, None, :] + ref_pts[None, :, :] * h
        gvals = boundary.values_at(side, qpts)

        dir_mask = kind == DIRICHLET
        if np.any(dir_mask):
            bc = cells[dir_mask]
            gd = gvals[dir_mask]
            delta = lam[bc] * tensors[bc, a, a]
            sig = penalty_boundary(
                delta, space.order, d, params.beta, grid.face_area(a), V
            )
            row = lam[bc, None] * tensors[bc, a, :]
            grad = np.einsum("fb,bqj,fj->fq", row / h, D, Pc[bc])
            flux = grad - lamKG[bc, a][:, None]
            trace = Pc[bc] @ T.T
            # outflux along n_out = o*e_a; store the +axis component
            Fout = -o * flux + sig[:, None] * (trace - gd)
            Fhat = o * Fout
            fidx = fidx_all[bc]
            moments[a][fidx, 0] = Fhat @ W
            moments[a][fidx, 1:] = Fhat @ tangent_weights(fr)

        neu_mask = kind == NEUMANN
        if np.any(neu_mask):
            bc = cells[neu_mask]
            gn = gvals[neu_mask]
            Fhat = o * gn
            fidx = fidx_all[bc]
            moments[a][fidx, 0] = Fhat @ W
            moments[a][fidx, 1:] = Fhat @ tangent_weights(fr)

    return VelocityField(grid=grid, moments=moments)


def face_average(field: VelocityField, face: FaceRef) -> float:
    """Mean normal velocity v_bar . n_e of one face (canonical normal)."""
    grid = field.grid
    axis = face.normal_axis
    strides = _face_strides(grid, axis)
    coords = np.array(grid.cell_coords(face.cell_minus), dtype=np.int64)
    fidx = int(coords @ strides)
    if face.is_boundary:
        if face.side % 2 == 1:
            fidx += strides[axis]
    else:
        fidx += strides[axis]
    return float(face.sign) * float(field.moments[axis][fidx, 0])


def pollock_coefficients(field: VelocityField, cell: int) -> PollockCell:
    """Per-axis linear interpolation of the two opposing face averages."""
    grid = field.grid
    d = grid.dim
    v_in = np.empty(d)
    v_out = np.empty(d)
    coords = np.array(grid.cell_coords(cell), dtype=np.int64)
    for a in range(d):
        strides = _face_strides(grid, a)
        lo = int(coords @ strides)
        v_in[a] = field.moments[a][lo, 0]
        v_out[a] = field.moments[a][lo + strides[a], 0]
    return PollockCell(
        cell=cell,
        v_in=v_in,
        v_out=v_out,
        gradient=(v_out - v_in) / np.asarray(grid.spacing),
    )
