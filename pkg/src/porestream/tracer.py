"""Semi-analytical streamline and gravity-line tracing in time-of-flight.

Within each cell every velocity component varies linearly along its own
axis, so the trajectory is integrable in closed form and a trace is a walk
from face to face with exact crossing times. Times are accumulated as pore
time-of-flight (porosity times travel time), the coordinate in which the
1D transport solve runs. Each streamline is traced backward and then
forward from its seed-cell center, with both legs sharing one budget value,
and records every crossed cell with its time-of-flight increment and the
saturation it held on entry.

Gravity lines reuse the same stepping with the per-cell constant field K g,
which is what the gravity-split transport step traces along.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import impl
from ._purepy import (
    TRACE_BOUNDARY,
    TRACE_BUDGET,
    TRACE_OVERFLOW,
    TRACE_PROCESS,
    TRACE_STAGNATION,
)
from .grid import StructuredGrid
from .rockfluid import PermeabilityField
from .velocity import PollockCell, VelocityField

__all__ = [
    "BUDGET",
    "BOUNDARY",
    "STAGNATION",
    "PROCESS",
    "CrossingRecord",
    "HalfTrace",
    "Streamline",
    "pollock_step",
    "trace",
    "trace_half",
    "gravity_line",
    "gravity_field_arrays",
]

BUDGET = "budget"
BOUNDARY = "boundary"
STAGNATION = "stagnation"
PROCESS = "process"

_CAUSE_NAMES = {
    TRACE_BUDGET: BUDGET,
    TRACE_BOUNDARY: BOUNDARY,
    TRACE_STAGNATION: STAGNATION,
    TRACE_PROCESS: PROCESS,
}

_LINEAR_SWITCH = 1e-12


@dataclass(frozen=True)
class CrossingRecord:
    """One cell crossing: global cell id, time-of-flight spent in the cell,
    and the saturation the cell held when the streamline entered it."""

    cell: int
    tof_increment: float
    saturation: float


@dataclass(frozen=True)
class HalfTrace:
    """One directional leg of a trace.

    cells[0] is the start cell; tof[i] is the time-of-flight spent in
    cells[i]. end_cell is -1 after leaving the domain and, for the
    process cause, the not-yet-entered cell a neighbouring partition owns.
    used is the consumed time-of-flight budget.
    """

    cells: np.ndarray
    tof: np.ndarray
    cause: str
    end_point: np.ndarray
    end_cell: int
    used: float


@dataclass
class Streamline:
    """Bidirectional trace: cells ordered from the backward end to the
    forward end, the seed-cell record at seed_index spanning both legs."""

    seed: int
    cells: np.ndarray
    tof: np.ndarray
    saturations: np.ndarray
    seed_index: int
    tau_b: float
    tau_f: float
    cause_b: str
    cause_f: str
    end_b: np.ndarray
    end_f: np.ndarray

    @property
    def records(self) -> list[CrossingRecord]:
        return [
            CrossingRecord(int(c), float(t), float(s))
            for c, t, s in zip(self.cells, self.tof, self.saturations)
        ]

    def __len__(self) -> int:
        return len(self.cells)


def _as_porosity(phi, ncells: int) -> np.ndarray:
    if (
        isinstance(phi, np.ndarray)
        and phi.dtype == np.float64
        and phi.shape == (ncells,)
        and phi.flags.c_contiguous
    ):
        return phi
    arr = np.broadcast_to(np.asarray(phi, dtype=np.float64), (ncells,))
    if np.any(arr <= 0):
        raise ValueError("porosity must be > 0")
    return np.ascontiguousarray(arr)


def _field_pack(field: VelocityField):
    pack = getattr(field, "_trace_pack", None)
    if pack is None:
        v_lo, v_hi = field.cell_face_means()
        vmax = max(float(np.abs(v_lo).max()), float(np.abs(v_hi).max()))
        pack = (
            np.ascontiguousarray(v_lo).ravel(),
            np.ascontiguousarray(v_hi).ravel(),
            vmax,
        )
        field._trace_pack = pack
    return pack


def gravity_field_arrays(K: PermeabilityField, g: np.ndarray):
    """Per-cell constant velocity K g as (vlo, vhi, vmax) kernel arrays."""
    g = np.asarray(g, dtype=np.float64)
    w = np.einsum("cab,b->ca", K.tensors, g)
    flat = np.ascontiguousarray(w.T).ravel()
    vmax = float(np.abs(w).max()) if w.size else 0.0
    return flat, flat, vmax


def _run_half(
    grid: StructuredGrid,
    vlo: np.ndarray,
    vhi: np.ndarray,
    vmax: float,
    phi: np.ndarray,
    start_cell: int,
    start_point,
    direction: float,
    budget: float,
    inside: np.ndarray | None,
    max_steps: int,
) -> HalfTrace:
    cells, tof, cause, end_point, end_cell, used = impl.trace_cells(
        vlo,
        vhi,
        phi,
        list(grid.cells),
        list(grid.spacing),
        list(grid.origin),
        int(start_cell),
        np.asarray(start_point, dtype=np.float64),
        float(direction),
        float(budget),
        float(vmax),
        inside,
        int(max_steps),
    )
    if cause == TRACE_OVERFLOW:
        raise RuntimeError(
            f"trace exceeded {max_steps} cell crossings; "
            "the field likely recirculates faster than the budget drains"
        )
    return HalfTrace(
        cells=cells,
        tof=tof,
        cause=_CAUSE_NAMES[cause],
        end_point=end_point,
        end_cell=int(end_cell),
        used=float(used),
    )


def trace_half(
    field: VelocityField,
    porosity,
    start_cell: int,
    start_point,
    direction: float,
    budget: float,
    inside: np.ndarray | None = None,
    max_steps: int = 10_000_000,
) -> HalfTrace:
    """Trace one leg from an arbitrary point; direction -1 runs upstream."""
    grid = field.grid
    vlo, vhi, vmax = _field_pack(field)
    phi = _as_porosity(porosity, grid.ncells)
    return _run_half(
        grid, vlo, vhi, vmax, phi, start_cell, start_point, direction,
        budget, inside, max_steps,
    )


def _merge(seed: int, back: HalfTrace, fwd: HalfTrace, S: np.ndarray) -> Streamline:
    nb = len(back.cells)
    nf = len(fwd.cells)
    if nb == 0 and nf == 0:
        cells = np.empty(0, dtype=np.int64)
        tof = np.empty(0, dtype=np.float64)
    elif nb == 0:
        cells = fwd.cells
        tof = fwd.tof
    elif nf == 0:
        cells = back.cells[::-1].copy()
        tof = back.tof[::-1].copy()
    else:
        cells = np.concatenate([back.cells[:0:-1], fwd.cells])
        tof = np.concatenate([back.tof[:0:-1], fwd.tof])
        tof[nb - 1] = back.tof[0] + fwd.tof[0]
    seed_index = max(nb - 1, 0)
    S = np.asarray(S, dtype=np.float64)
    return Streamline(
        seed=int(seed),
        cells=cells,
        tof=tof,
        saturations=S[cells] if len(cells) else np.empty(0),
        seed_index=seed_index,
        tau_b=back.used,
        tau_f=fwd.used,
        cause_b=back.cause,
        cause_f=fwd.cause,
        end_b=back.end_point,
        end_f=fwd.end_point,
    )


def trace(
    seed_cell: int,
    field: VelocityField,
    porosity,
    S: np.ndarray,
    dt: float,
    dt_forward: float | None = None,
    inside: np.ndarray | None = None,
    max_steps: int = 10_000_000,
) -> Streamline:
    """Bidirectional streamline from the seed-cell center, each leg bounded
    by the time-of-flight budget dt (dt_forward overrides the forward leg;
    zero gives the backward-only diagnostic mode)."""
    grid = field.grid
    vlo, vhi, vmax = _field_pack(field)
    phi = _as_porosity(porosity, grid.ncells)
    center = grid.cell_center(seed_cell)
    fwd_budget = dt if dt_forward is None else dt_forward
    back = _run_half(
        grid, vlo, vhi, vmax, phi, seed_cell, center, -1.0, dt, inside, max_steps
    )
    fwd = _run_half(
        grid, vlo, vhi, vmax, phi, seed_cell, center, 1.0, fwd_budget, inside,
        max_steps,
    )
    return _merge(seed_cell, back, fwd, S)


def gravity_line(
    seed_cell: int,
    K: PermeabilityField,
    g: np.ndarray,
    porosity,
    S: np.ndarray,
    dt: float,
    grid: StructuredGrid,
    inside: np.ndarray | None = None,
    max_steps: int = 10_000_000,
    pack: tuple[np.ndarray, np.ndarray, float] | None = None,
) -> Streamline:
    """Bidirectional trace along the per-cell constant field K g.

    Cells where K g vanishes stagnate immediately. pack carries the
    precomputed gravity_field_arrays result when tracing many seeds.
    """
    vlo, vhi, vmax = gravity_field_arrays(K, g) if pack is None else pack
    phi = _as_porosity(porosity, grid.ncells)
    center = grid.cell_center(seed_cell)
    back = _run_half(
        grid, vlo, vhi, vmax, phi, seed_cell, center, -1.0, dt, inside, max_steps
    )
    fwd = _run_half(
        grid, vlo, vhi, vmax, phi, seed_cell, center, 1.0, dt, inside, max_steps
    )
    return _merge(seed_cell, back, fwd, S)


def pollock_step(
    cell: PollockCell,
    entry_point,
    direction: float = 1.0,
    spacing=None,
):
    """Single-cell reference step in cell-local coordinates.

    entry_point lives in [0, h]^dim of the cell. Returns (exit_point,
    exit_face, travel_time) where exit_face is (axis, hi_flag); stagnation
    (no positive exit time) returns (entry_point, None, inf).
    """
    v_in = np.asarray(cell.v_in, dtype=np.float64)
    v_out = np.asarray(cell.v_out, dtype=np.float64)
    d = len(v_in)
    h = np.ones(d) if spacing is None else np.asarray(spacing, dtype=np.float64)
    p = np.asarray(entry_point, dtype=np.float64).copy()
    dirn = float(direction)

    u_lo = dirn * v_in
    u_hi = dirn * v_out
    A = (u_hi - u_lo) / h
    u = u_lo + A * p

    t_min = np.inf
    exit_axis = -1
    exit_hi = 0
    for a in range(d):
        if u[a] == 0.0:
            continue
        t = np.inf
        if u[a] > 0.0:
            if u_hi[a] > 0.0:
                if abs(A[a]) * h[a] < _LINEAR_SWITCH * u[a]:
                    t = (h[a] - p[a]) / u[a]
                else:
                    t = np.log(u_hi[a] / u[a]) / A[a]
            hi = 1
        else:
            if u_lo[a] < 0.0:
                if abs(A[a]) * h[a] < _LINEAR_SWITCH * (-u[a]):
                    t = -p[a] / u[a]
                else:
                    t = np.log(u_lo[a] / u[a]) / A[a]
            hi = 0
        if t < t_min:
            t_min = t
            exit_axis = a
            exit_hi = hi
    if exit_axis < 0:
        return p, None, np.inf

    out = np.empty(d)
    for b in range(d):
        if b == exit_axis:
            out[b] = h[b] if exit_hi else 0.0
        elif A[b] == 0.0 or abs(A[b]) * h[b] < _LINEAR_SWITCH * abs(u[b]):
            out[b] = p[b] + u[b] * t_min
        else:
            out[b] = p[b] + (u[b] / A[b]) * np.expm1(A[b] * t_min)
    return out, (exit_axis, exit_hi), float(t_min)
