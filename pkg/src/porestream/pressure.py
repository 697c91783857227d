"""Symmetric weighted interior penalty DG discretization of the pressure equation.

Solves -div(lambda_t(S) K (grad P - G)) = q with tensor-product Q^k elements
on the structured grid. Face averages are weighted by the normal
diffusivities delta = n^T lambda_t K n of the two sides, which makes the
scheme robust for strongly heterogeneous and anisotropic permeability; the
penalty follows the harmonic-mean form

    sigma_e = 2 beta (delta^+ delta^-)/(delta^+ + delta^-) k(k+d-1) |e| / min|E|

on interior faces and sigma_e = beta delta k(k+d-1) |e|/|E| on Dirichlet
faces. Dirichlet data enters weakly; Neumann data specifies the outward
normal total velocity. Gravity contributes a volume term and weighted face
terms on interior and Dirichlet faces.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product as _iterproduct

import numpy as np
import scipy.sparse as sp

from . import krylov
from .grid import (
    StructuredGrid,
    boundary_face_arrays,
    boundary_face_centers,
    interior_face_arrays,
)
from .rockfluid import (
    FluidPair,
    PermeabilityField,
    gravity_drive,
    mobilities,
    mobility_floor,
)

__all__ = [
    "NOFLOW",
    "DIRICHLET",
    "NEUMANN",
    "DGSpace",
    "BoundarySpec",
    "SwipgParams",
    "SparseSystem",
    "PressureField",
    "reference_element",
    "face_diffusivities",
    "face_weights",
    "penalty",
    "penalty_boundary",
    "assemble",
    "solve_pressure",
]

NOFLOW = 0
DIRICHLET = 1
NEUMANN = 2


# ---------------------------------------------------------------------------
# reference element


def _gauss01(n: int):
    t, w = np.polynomial.legendre.leggauss(n)
    return (t + 1.0) / 2.0, w / 2.0


def _xfastest_tuples(entries, repeat):
    """Tuples ordered with the first coordinate varying fastest."""
    return [tuple(reversed(c)) for c in _iterproduct(entries, repeat=repeat)]


def _eval_monomials(exps: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """(npts, nb) values of the monomial basis at reference points."""
    return np.prod(pts[:, None, :] ** exps[None, :, :], axis=2)


def _eval_monomial_grad(exps: np.ndarray, pts: np.ndarray, axis: int) -> np.ndarray:
    """(npts, nb) reference derivative along one axis."""
    coef = exps[:, axis].astype(float)
    shifted = exps.copy()
    shifted[:, axis] = np.maximum(shifted[:, axis] - 1, 0)
    return coef[None, :] * np.prod(pts[:, None, :] ** shifted[None, :, :], axis=2)


@dataclass
class _FaceRef:
    """Reference traces for the two faces normal to one axis."""

    wts: np.ndarray          # (nqf,) reference face weights, sum 1
    offsets: np.ndarray      # (nqf, dim-1) in-face reference coordinates
    pts_lo: np.ndarray       # (nqf, dim) embedded points on the low face
    pts_hi: np.ndarray
    T_lo: np.ndarray         # (nqf, nb) basis traces
    T_hi: np.ndarray
    D_lo: np.ndarray         # (dim, nqf, nb) reference derivatives at traces
    D_hi: np.ndarray


@dataclass
class ReferenceElement:
    """Quadrature and monomial-basis tables on [0,1]^dim for Q^order."""

    order: int
    dim: int
    nb: int
    exps: np.ndarray         # (nb, dim) monomial exponents, x fastest
    vol_pts: np.ndarray      # (nq, dim)
    vol_wts: np.ndarray      # (nq,), sum 1
    vals: np.ndarray         # (nq, nb)
    grads: np.ndarray        # (dim, nq, nb)
    stiff: np.ndarray        # (dim, dim, nb, nb): int d_a phi_i d_b phi_j
    mass_vec: np.ndarray     # (nb,): int phi_j
    grad_vec: np.ndarray     # (dim, nb): int d_a phi_j
    mean_vec: np.ndarray     # (nb,): cell average of phi_j (== mass_vec)
    faces: dict[int, _FaceRef] = field(default_factory=dict)


@lru_cache(maxsize=None)
def reference_element(order: int, dim: int) -> ReferenceElement:
    if order < 1:
        raise ValueError("order must be >= 1")
    nq1 = order + 1
    pts1, wts1 = _gauss01(nq1)
    exps = np.array(_xfastest_tuples(range(order + 1), dim), dtype=np.int64)
    nb = len(exps)

    vol_idx = _xfastest_tuples(range(nq1), dim)
    vol_pts = np.array([[pts1[i] for i in c] for c in vol_idx])
    vol_wts = np.array([np.prod([wts1[i] for i in c]) for c in vol_idx])
    vals = _eval_monomials(exps, vol_pts)
    grads = np.stack(
        [_eval_monomial_grad(exps, vol_pts, a) for a in range(dim)]
    )
    stiff = np.einsum("aqi,q,bqj->abij", grads, vol_wts, grads)
    mass_vec = vol_wts @ vals
    grad_vec = np.einsum("q,aqj->aj", vol_wts, grads)

    ref = ReferenceElement(
        order=order,
        dim=dim,
        nb=nb,
        exps=exps,
        vol_pts=vol_pts,
        vol_wts=vol_wts,
        vals=vals,
        grads=grads,
        stiff=stiff,
        mass_vec=mass_vec,
        grad_vec=grad_vec,
        mean_vec=mass_vec.copy(),
    )
    for a in range(dim):
        off_idx = _xfastest_tuples(range(nq1), dim - 1)
        offsets = np.array([[pts1[i] for i in c] for c in off_idx])
        fwts = np.array([np.prod([wts1[i] for i in c]) for c in off_idx])
        inface = [b for b in range(dim) if b != a]
        pts_lo = np.zeros((len(offsets), dim))
        pts_lo[:, inface] = offsets
        pts_hi = pts_lo.copy()
        pts_hi[:, a] = 1.0
        ref.faces[a] = _FaceRef(
            wts=fwts,
            offsets=offsets,
            pts_lo=pts_lo,
            pts_hi=pts_hi,
            T_lo=_eval_monomials(exps, pts_lo),
            T_hi=_eval_monomials(exps, pts_hi),
            D_lo=np.stack(
                [_eval_monomial_grad(exps, pts_lo, b) for b in range(dim)]
            ),
            D_hi=np.stack(
                [_eval_monomial_grad(exps, pts_hi, b) for b in range(dim)]
            ),
        )
    return ref


# ---------------------------------------------------------------------------
# DG space and fields


@dataclass(frozen=True)
class DGSpace:
    """Discontinuous tensor-product Q^order space over the grid.

    Dofs are cell-major: dof(cell, j) = cell*nb + j, with the monomial
    basis x^jx y^jy z^jz ordered x fastest on [0,1]^dim local coordinates.
    Basis index 0 is the cell constant.
    """

    grid: StructuredGrid
    order: int = 1

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be >= 1")

    @property
    def nb(self) -> int:
        return (self.order + 1) ** self.grid.dim

    @property
    def ndofs(self) -> int:
        return self.grid.ncells * self.nb

    @property
    def ref(self) -> ReferenceElement:
        return reference_element(self.order, self.grid.dim)

    def constant_vector(self) -> np.ndarray:
        """Coefficient vector of the global constant 1."""
        v = np.zeros(self.ndofs)
        v[:: self.nb] = 1.0
        return v

    def cell_means(self, coeffs: np.ndarray) -> np.ndarray:
        """Cell averages of a DG function."""
        c = np.asarray(coeffs).reshape(self.grid.ncells, self.nb)
        return c @ self.ref.mean_vec

    def evaluate(self, coeffs: np.ndarray, cells, ref_points) -> np.ndarray:
        """(len(cells), npts) values at reference points of given cells."""
        c = np.asarray(coeffs).reshape(self.grid.ncells, self.nb)
        vals = _eval_monomials(self.ref.exps, np.atleast_2d(ref_points))
        return c[cells] @ vals.T


@dataclass(frozen=True)
class PressureField:
    """DG coefficient vector of the global pressure [Pa]."""

    space: DGSpace
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.float64)
        if c.shape != (self.space.ndofs,):
            raise ValueError("coefficient vector length mismatch")
        if not np.all(np.isfinite(c)):
            raise ValueError("pressure coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    def cell_means(self) -> np.ndarray:
        return self.space.cell_means(self.coeffs)


# ---------------------------------------------------------------------------
# boundary data


@dataclass(frozen=True)
class SwipgParams:
    """Penalty scale beta (> 0) and quadrature points per direction.

    quadrature=None uses order+1 points, exact for all Q^order terms with
    cellwise-constant coefficients.
    """

    beta: float = 1.0
    quadrature: int | None = None

    def __post_init__(self):
        if self.beta <= 0.0:
            raise ValueError("beta must be positive")
        if self.quadrature is not None and self.quadrature < 1:
            raise ValueError("quadrature must be >= 1")


class BoundarySpec:
    """Classification of every boundary face: no-flow, Dirichlet, Neumann.

    Faces default to no-flow. set() reclassifies faces of one side, either
    all of them or the subset selected by a predicate on face centers; the
    last call wins for a face, so every face carries exactly one condition.
    Values may be scalars or callables evaluated at quadrature points
    (vectorized over an (npts, dim) array).
    """

    def __init__(self, grid: StructuredGrid):
        self.grid = grid
        self._cells = boundary_face_arrays(grid)
        self.kind = {
            side: np.full(len(cells), NOFLOW, dtype=np.int8)
            for side, cells in self._cells.items()
        }
        self._entries: dict[int, list] = {side: [] for side in self._cells}

    def set(self, side: int, kind: int, value=0.0, where=None) -> "BoundarySpec":
        """Classify faces on one side.

        where: None for all faces, or a predicate on an (nfaces, dim) array
        of face centers returning a boolean mask.
        """
        if side not in self.kind:
            raise ValueError(f"side {side} not on this grid")
        if kind not in (NOFLOW, DIRICHLET, NEUMANN):
            raise ValueError(f"unknown boundary kind {kind}")
        if where is None:
            mask = np.ones(len(self.kind[side]), dtype=bool)
        else:
            centers = boundary_face_centers(self.grid, side)
            mask = np.asarray(where(centers), dtype=bool)
            if mask.shape != (len(self.kind[side]),):
                raise ValueError("predicate mask has wrong length")
        self.kind[side][mask] = kind
        self._entries[side].append((mask, kind, value))
        return self

    def cells(self, side: int) -> np.ndarray:
        return self._cells[side]

    def has_dirichlet(self) -> bool:
        return any(np.any(k == DIRICHLET) for k in self.kind.values())

    def values_at(self, side: int, qpts: np.ndarray) -> np.ndarray:
        """(nfaces, nqf) boundary values at face quadrature points.

        qpts has shape (nfaces, nqf, dim); entries for faces whose current
        kind differs from the one they were set with are ignored.
        """
        nf, nqf = qpts.shape[0], qpts.shape[1]
        out = np.zeros((nf, nqf))
        for mask, kind, value in self._entries[side]:
            live = mask & (self.kind[side] == kind)
            if not np.any(live):
                continue
            if callable(value):
                pts = qpts[live].reshape(-1, self.grid.dim)
                out[live] = np.asarray(value(pts), dtype=float).reshape(
                    int(np.sum(live)), nqf
                )
            else:
                out[live] = float(value)
        return out


# ---------------------------------------------------------------------------
# face coefficient helpers


def face_diffusivities(axis, K_minus, K_plus, lam_minus, lam_plus):
    """Normal diffusivities delta = n^T lambda_t K n on the two sides.

    For the axis-aligned normal this picks the (axis, axis) tensor entry.
    Accepts scalars or arrays of tensors (..., dim, dim).
    """
    Km = np.asarray(K_minus, dtype=float)
    Kp = np.asarray(K_plus, dtype=float)
    dm = np.asarray(lam_minus, dtype=float) * Km[..., axis, axis]
    dp = np.asarray(lam_plus, dtype=float) * Kp[..., axis, axis]
    if np.any(dm <= 0.0) or np.any(dp <= 0.0):
        raise ValueError("face diffusivities must be positive (SPD K, positive mobility)")
    return dm, dp


def face_weights(delta_minus, delta_plus):
    """Diffusivity-weighted average weights (w_minus, w_plus).

    The weight of a side is the OTHER side's diffusivity share, which
    favors the trace from the low-diffusivity side; w_minus + w_plus = 1
    exactly (computed as the complement).
    """
    wm = np.asarray(delta_plus, dtype=float) / (
        np.asarray(delta_minus, dtype=float) + delta_plus
    )
    return wm, 1.0 - wm


def penalty(delta_minus, delta_plus, order, dim, beta, face_area, vol_minus, vol_plus):
    """Interior-face penalty sigma_e (harmonic-mean diffusivity scaling)."""
    harm = (delta_minus * delta_plus) / (delta_minus + delta_plus)
    scale = order * (order + dim - 1)
    return 2.0 * beta * harm * scale * face_area / np.minimum(vol_minus, vol_plus)


def penalty_boundary(delta, order, dim, beta, face_area, vol):
    """Dirichlet-face penalty sigma_e."""
    scale = order * (order + dim - 1)
    return beta * delta * scale * face_area / vol


# ---------------------------------------------------------------------------
# assembly


@dataclass(frozen=True)
class SparseSystem:
    """Assembled symmetric system with solver metadata."""

    A: sp.csr_matrix
    b: np.ndarray
    n: int
    has_dirichlet: bool
    nullspace: np.ndarray

    def symmetry_error(self) -> float:
        diff = self.A - self.A.T
        amax = np.max(np.abs(self.A.data)) if self.A.nnz else 0.0
        dmax = np.max(np.abs(diff.data)) if diff.nnz else 0.0
        return dmax / amax if amax > 0 else 0.0


def _total_mobility(law, fluids: FluidPair, S: np.ndarray) -> np.ndarray:
    _, _, lam_t = mobilities(law, fluids, S)
    return np.maximum(lam_t, mobility_floor(fluids))


def assemble(
    space: DGSpace,
    K: PermeabilityField,
    porosity,
    S: np.ndarray,
    law,
    fluids: FluidPair,
    boundary: BoundarySpec,
    params: SwipgParams = SwipgParams(),
    source: np.ndarray | None = None,
) -> SparseSystem:
    """Assemble the SWIPG system A P = b for the current saturation.

    porosity is accepted for interface uniformity but does not enter the
    (quasi-steady) pressure equation. source is the cellwise source density
    q [1/s]; None means zero. With no Dirichlet face anywhere, the
    compatibility condition integral(g_N) = integral(q) is enforced and the
    assembled system carries the constant nullspace vector.
    """
    grid = space.grid
    if boundary.grid is not grid and boundary.grid != grid:
        raise ValueError("boundary spec was built for a different grid")
    d = grid.dim
    nb = space.nb
    n = grid.ncells
    h = np.asarray(grid.spacing)
    V = grid.cell_volume
    ref = (
        reference_element(space.order, d)
        if params.quadrature is None
        else _custom_quadrature(space.order, d, params.quadrature)
    )

    S = np.asarray(S, dtype=np.float64)
    if S.shape != (n,):
        raise ValueError("saturation must be one value per cell")
    lam = _total_mobility(law, fluids, S)
    tensors = K.tensors
    G = gravity_drive(law, fluids, S, d)  # (n, d)
    lamKG = lam[:, None] * np.einsum("cab,cb->ca", tensors, G)

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    data: list[np.ndarray] = []
    b = np.zeros(n * nb)

    def add_blocks(vcells, ucells, blocks):
        # blocks: (nf, nb, nb); rows index v dofs, cols index u dofs
        nf = len(vcells)
        r = (vcells[:, None] * nb + np.arange(nb))[:, :, None]
        c = (ucells[:, None] * nb + np.arange(nb))[:, None, :]
        rows.append(np.broadcast_to(r, (nf, nb, nb)).ravel().astype(np.int32))
        cols.append(np.broadcast_to(c, (nf, nb, nb)).ravel().astype(np.int32))
        data.append(np.ascontiguousarray(blocks).ravel())

    def add_rhs(cells, locs):
        np.add.at(b, cells[:, None] * nb + np.arange(nb), locs)

    # --- volume terms -----------------------------------------------------
    Keff = (lam[:, None, None] * tensors) * (V / np.outer(h, h))
    vol_blocks = np.einsum("cab,abij->cij", Keff, ref.stiff)
    all_cells = np.arange(n)
    add_blocks(all_cells, all_cells, vol_blocks)

    if source is not None:
        q = np.asarray(source, dtype=np.float64)
        if q.shape != (n,):
            raise ValueError("source must be one value per cell")
        add_rhs(all_cells, (q * V)[:, None] * ref.mass_vec)
    else:
        q = np.zeros(n)

    grav_on = np.any(lamKG != 0.0)
    if grav_on:
        add_rhs(all_cells, V * np.einsum("ca,a,aj->cj", lamKG, 1.0 / h, ref.grad_vec))

    # --- interior faces ---------------------------------------------------
    scale = space.order * (space.order + d - 1)
    for a, pairs in interior_face_arrays(grid).items():
        if len(pairs) == 0:
            continue
        mc = pairs[:, 0]
        pc = pairs[:, 1]
        Ae = grid.face_area(a)
        fr = ref.faces[a]
        W = fr.wts
        # minus cell exposes its high face, plus cell its low face
        Tm, Tp = fr.T_hi, fr.T_lo
        Dm, Dp = fr.D_hi, fr.D_lo

        dm, dp = face_diffusivities(a, tensors[mc], tensors[pc], lam[mc], lam[pc])
        wm, wp = face_weights(dm, dp)
        sig = penalty(dm, dp, space.order, d, params.beta, Ae, V, V)

        # flux coefficient per side: lambda * K[a, :] / h  -> (nf, d)
        fcm = lam[mc, None] * tensors[mc, a, :] / h
        fcp = lam[pc, None] * tensors[pc, a, :] / h

        # reference blocks
        Mmm = Tm.T @ (W[:, None] * Tm)
        Mmp = Tm.T @ (W[:, None] * Tp)
        Mpp = Tp.T @ (W[:, None] * Tp)
        Cmm = np.einsum("qi,q,bqj->bij", Tm, W, Dm)  # (d, nb, nb)
        Cmp = np.einsum("qi,q,bqj->bij", Tm, W, Dp)
        Cpm = np.einsum("qi,q,bqj->bij", Tp, W, Dm)
        Cpp = np.einsum("qi,q,bqj->bij", Tp, W, Dp)

        Fmm = np.einsum("fb,bij->fij", fcm, Cmm)  # v-, grad u-
        Fmp = np.einsum("fb,bij->fij", fcp, Cmp)  # v-, grad u+
        Fpm = np.einsum("fb,bij->fij", fcm, Cpm)  # v+, grad u-
        Fpp = np.einsum("fb,bij->fij", fcp, Cpp)  # v+, grad u+

        wmv = wm[:, None, None]
        wpv = wp[:, None, None]
        sgv = sig[:, None, None]
        tr = lambda M: np.swapaxes(M, 1, 2)

        add_blocks(
            mc, mc,
            Ae * (-wmv * Fmm - wmv * tr(Fmm) + sgv * Mmm),
        )
        add_blocks(
            mc, pc,
            Ae * (-wpv * Fmp + wmv * tr(Fpm) - sgv * Mmp),
        )
        add_blocks(
            pc, mc,
            Ae * (wmv * Fpm - wpv * tr(Fmp) - sgv * Mmp.T),
        )
        add_blocks(
            pc, pc,
            Ae * (wpv * Fpp + wpv * tr(Fpp) + sgv * Mpp),
        )

        if grav_on:
            gval = wm * lamKG[mc, a] + wp * lamKG[pc, a]
            tm = W @ Tm
            tp = W @ Tp
            add_rhs(mc, (-Ae * gval)[:, None] * tm)
            add_rhs(pc, (Ae * gval)[:, None] * tp)

    # --- boundary faces ---------------------------------------------------
    gN_total = 0.0
    for side, cells in boundary_face_arrays(grid).items():
        a, hi = divmod(side, 2)
        o = 1.0 if hi else -1.0
        Ae = grid.face_area(a)
        fr = ref.faces[a]
        W = fr.wts
        T = fr.T_hi if hi else fr.T_lo
        D = fr.D_hi if hi else fr.D_lo
        kind = boundary.kind[side]

        dir_mask = kind == DIRICHLET
        neu_mask = kind == NEUMANN
        if not (np.any(dir_mask) or np.any(neu_mask)):
            continue

        # quadrature points in physical coordinates for value evaluation
        ref_pts = fr.pts_hi if hi else fr.pts_lo
        lows = grid.cell_centers()[cells] - 0.5 * h
        qpts = lows[:, None, :] + ref_pts[None, :, :] * h
        gvals = boundary.values_at(side, qpts)

        if np.any(dir_mask):
            bc = cells[dir_mask]
            gd = gvals[dir_mask]
            delta = lam[bc] * tensors[bc, a, a]
            sig = penalty_boundary(delta, space.order, d, params.beta, Ae, V)
            fc = lam[bc, None] * tensors[bc, a, :] / h

            Mb = T.T @ (W[:, None] * T)
            Cb = np.einsum("qi,q,bqj->bij", T, W, D)
            Fb = np.einsum("fb,bij->fij", fc, Cb)
            sgv = sig[:, None, None]
            add_blocks(
                bc, bc,
                Ae * (-o * Fb - o * np.swapaxes(Fb, 1, 2) + sgv * Mb),
            )
            # rhs: int g_D (sigma v - lambda K grad v . n)
            gT = np.einsum("fq,q,qj->fj", gd, W, T)
            gD_der = np.einsum("fq,q,bqj->fbj", gd, W, D)
            flux_part = np.einsum("fb,fbj->fj", fc, gD_der)
            add_rhs(bc, Ae * (sig[:, None] * gT - o * flux_part))
            if grav_on:
                gface = o * lamKG[bc, a]
                tvec = W @ T
                add_rhs(bc, (-Ae * gface)[:, None] * tvec)

        if np.any(neu_mask):
            bc = cells[neu_mask]
            gn = gvals[neu_mask]
            gT = np.einsum("fq,q,qj->fj", gn, W, T)
            add_rhs(bc, -Ae * gT)
            gN_total += Ae * float(np.sum(gn @ W))

    has_dirichlet = boundary.has_dirichlet()
    if not has_dirichlet:
        q_total = float(np.sum(q) * V)
        scale_ref = max(abs(gN_total), abs(q_total), 1e-30)
        if abs(gN_total - q_total) > 1e-10 * scale_ref:
            raise ValueError(
                "pure-Neumann problem violates compatibility: "
                f"integral(g_N)={gN_total:.6e} vs integral(q)={q_total:.6e}"
            )

    A = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n * nb, n * nb),
    ).tocsr()
    A.sum_duplicates()
    nullspace = np.zeros(n * nb)
    nullspace[::nb] = 1.0
    return SparseSystem(
        A=A, b=b, n=n * nb, has_dirichlet=has_dirichlet, nullspace=nullspace
    )


@lru_cache(maxsize=None)
def _custom_quadrature(order: int, dim: int, nq1: int) -> ReferenceElement:
    """Reference element rebuilt with nq1 Gauss points per direction."""
    base = reference_element(order, dim)
    if nq1 == base.order + 1:
        return base
    raise NotImplementedError(
        "non-default quadrature orders are not implemented; the default "
        "rule is exact for Q^order with cellwise-constant coefficients"
    )


def solve_pressure(
    system: SparseSystem,
    cfg: krylov.SolverConfig,
    space: DGSpace,
    x0: np.ndarray | None = None,
) -> tuple[PressureField, int, float]:
    """Solve the assembled system; returns (field, iterations, residual).

    Pure-Neumann systems must be solved with nullspace projection enabled
    in cfg; the system's constant-vector nullspace is used.
    """
    use_proj = cfg.nullspace_projection or not system.has_dirichlet
    if use_proj and not cfg.nullspace_projection:
        cfg = krylov.SolverConfig(
            tol=cfg.tol,
            max_iter=cfg.max_iter,
            preconditioner=cfg.preconditioner,
            nullspace_projection=True,
        )
    x, iters, resid = krylov.cg_solve(
        system.A,
        system.b,
        x0=x0,
        cfg=cfg,
        nullspace=system.nullspace if use_proj else None,
    )
    return PressureField(space=space, coeffs=x), iters, resid
