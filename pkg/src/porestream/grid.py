"""Structured quadrilateral/hexahedral mesh, face topology, and slab decomposition.

Cells are numbered lexicographically with x fastest, matching the ordering of
common reservoir data files. Interior faces carry a canonical orientation:
the unit normal points from the lower-numbered cell (minus side) to the
higher-numbered cell (plus side), so jumps ``[v] = v_minus - v_plus`` are
sign-stable. Boundary faces keep the outward normal and record which domain
side they sit on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "StructuredGrid",
    "FaceRef",
    "Partition",
    "build_grid",
    "interior_faces",
    "boundary_faces",
    "interior_face_arrays",
    "boundary_face_arrays",
    "boundary_face_centers",
    "decompose",
]

BOUNDARY = -1


@dataclass(frozen=True)
class StructuredGrid:
    """Uniform axis-aligned grid on a box.

    dim: 2 or 3
    cells: cell count per axis
    spacing: cell size per axis [m]
    origin: lower corner [m]
    """

    dim: int
    cells: tuple[int, ...]
    spacing: tuple[float, ...]
    origin: tuple[float, ...]

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if len(self.cells) != self.dim or len(self.spacing) != self.dim:
            raise ValueError("cells and spacing must have one entry per axis")
        if any(n < 1 for n in self.cells):
            raise ValueError(f"cell counts must be >= 1, got {self.cells}")
        if any(h <= 0 for h in self.spacing):
            raise ValueError(f"spacings must be > 0, got {self.spacing}")

    @property
    def ncells(self) -> int:
        return int(np.prod(self.cells))

    @property
    def extent(self) -> tuple[float, ...]:
        return tuple(n * h for n, h in zip(self.cells, self.spacing))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def face_area(self, axis: int) -> float:
        """Area of a face whose normal is along `axis`."""
        return float(np.prod([h for a, h in enumerate(self.spacing) if a != axis]))

    def cell_index(self, ijk) -> int:
        """Lexicographic index (x fastest) of the cell with integer coords ijk."""
        idx = 0
        for a in reversed(range(self.dim)):
            i = ijk[a]
            if not 0 <= i < self.cells[a]:
                raise IndexError(f"cell coordinate {ijk} outside grid {self.cells}")
            idx = idx * self.cells[a] + i
        return idx

    def cell_coords(self, index: int) -> tuple[int, ...]:
        """Inverse of cell_index."""
        if not 0 <= index < self.ncells:
            raise IndexError(f"cell index {index} outside grid")
        out = []
        for a in range(self.dim):
            out.append(index % self.cells[a])
            index //= self.cells[a]
        return tuple(out)

    def cell_low(self, index: int) -> np.ndarray:
        """Lower corner of a cell [m]."""
        ijk = self.cell_coords(index)
        return np.array(
            [self.origin[a] + ijk[a] * self.spacing[a] for a in range(self.dim)]
        )

    def cell_center(self, index: int) -> np.ndarray:
        return self.cell_low(index) + 0.5 * np.asarray(self.spacing)

    def cell_centers(self) -> np.ndarray:
        """(ncells, dim) array of all cell centers, in cell-index order."""
        axes = [
            self.origin[a] + (np.arange(self.cells[a]) + 0.5) * self.spacing[a]
            for a in range(self.dim)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        # x fastest: transpose so the first axis varies fastest in C order
        return np.stack([m.T.ravel() for m in mesh], axis=1)

    def containing_cell(self, point) -> int:
        """Cell whose half-open box [low, low+h) contains the point."""
        ijk = []
        for a in range(self.dim):
            i = int(np.floor((point[a] - self.origin[a]) / self.spacing[a]))
            if not 0 <= i < self.cells[a]:
                raise IndexError(f"point {point} outside grid")
            ijk.append(i)
        return self.cell_index(ijk)


@dataclass(frozen=True)
class FaceRef:
    """One mesh face with canonical orientation.

    cell_minus: index of the minus-side cell
    cell_plus: index of the plus-side cell, or BOUNDARY
    normal_axis: axis the unit normal is parallel to
    sign: +1 if the normal points along +axis, -1 otherwise
          (always +1 for interior faces; outward for boundary faces)
    side: -1 for interior faces, else 2*axis + (0 for the low side, 1 high)
    """

    cell_minus: int
    cell_plus: int
    normal_axis: int
    sign: int = 1
    side: int = -1

    @property
    def is_boundary(self) -> bool:
        return self.cell_plus == BOUNDARY


def build_grid(dim: int, cells_per_axis, extents, origin=None) -> StructuredGrid:
    """Grid over a box of the given extents with uniform spacing per axis."""
    cells = tuple(int(n) for n in cells_per_axis)
    ext = tuple(float(e) for e in extents)
    if len(cells) != dim or len(ext) != dim:
        raise ValueError("cells_per_axis and extents must match dim")
    if any(e <= 0 for e in ext):
        raise ValueError(f"extents must be > 0, got {ext}")
    if any(n < 1 for n in cells):
        raise ValueError(f"cell counts must be >= 1, got {cells}")
    spacing = tuple(e / n for e, n in zip(ext, cells))
    orig = tuple(float(x) for x in origin) if origin is not None else (0.0,) * dim
    return StructuredGrid(dim=dim, cells=cells, spacing=spacing, origin=orig)


def _strides(cells) -> list[int]:
    s, out = 1, []
    for n in cells:
        out.append(s)
        s *= n
    return out


def interior_face_arrays(grid: StructuredGrid) -> dict[int, np.ndarray]:
    """Per axis: (nfaces, 2) int array of [cell_minus, cell_plus] pairs.

    The minus cell is the one with the smaller index; the normal points
    along the positive axis direction.
    """
    strides = _strides(grid.cells)
    out = {}
    for a in range(grid.dim):
        shape = list(grid.cells)
        idx = np.arange(grid.ncells).reshape(tuple(reversed(shape)))
        # reshape is z,y,x ordered (C order with x fastest), axis a maps to
        # numpy axis dim-1-a
        np_ax = grid.dim - 1 - a
        take = [slice(None)] * grid.dim
        take[np_ax] = slice(0, grid.cells[a] - 1)
        minus = idx[tuple(take)].ravel()
        plus = minus + strides[a]
        out[a] = np.stack([minus, plus], axis=1)
    return out


def boundary_face_arrays(grid: StructuredGrid) -> dict[int, np.ndarray]:
    """Per side code (2*axis + lo/hi): int array of adjacent cell indices."""
    out = {}
    for a in range(grid.dim):
        np_ax = grid.dim - 1 - a
        idx = np.arange(grid.ncells).reshape(tuple(reversed(grid.cells)))
        take_lo = [slice(None)] * grid.dim
        take_lo[np_ax] = 0
        take_hi = [slice(None)] * grid.dim
        take_hi[np_ax] = grid.cells[a] - 1
        out[2 * a] = idx[tuple(take_lo)].ravel()
        out[2 * a + 1] = idx[tuple(take_hi)].ravel()
    return out


def boundary_face_centers(grid: StructuredGrid, side: int) -> np.ndarray:
    """(nfaces, dim) centers of the boundary faces on one side.

    Ordered like boundary_face_arrays(grid)[side].
    """
    axis, hi = divmod(side, 2)
    cells = boundary_face_arrays(grid)[side]
    centers = grid.cell_centers()[cells]
    centers[:, axis] += (0.5 if hi else -0.5) * grid.spacing[axis]
    return centers


def interior_faces(grid: StructuredGrid) -> list[FaceRef]:
    """All interior faces, each enumerated once, canonical orientation."""
    faces = []
    for a in range(grid.dim):
        for minus, plus in interior_face_arrays(grid)[a]:
            faces.append(FaceRef(int(minus), int(plus), a))
    return faces


def boundary_faces(grid: StructuredGrid) -> list[FaceRef]:
    """All boundary faces with outward normals."""
    faces = []
    arrays = boundary_face_arrays(grid)
    for a in range(grid.dim):
        for c in arrays[2 * a]:
            faces.append(FaceRef(int(c), BOUNDARY, a, sign=-1, side=2 * a))
        for c in arrays[2 * a + 1]:
            faces.append(FaceRef(int(c), BOUNDARY, a, sign=1, side=2 * a + 1))
    return faces


@dataclass
class Partition:
    """One slab of an overlapping decomposition.

    Owned cells form the half-open slab [lo, hi) along the split axis; the
    extended box adds up to overlap_width cells of each neighbor. Local cell
    numbering is lexicographic (x fastest) within the extended box.
    """

    rank: int
    nranks: int
    axis: int
    lo: int
    hi: int
    ext_lo: int
    ext_hi: int
    grid: StructuredGrid
    slab_bounds: tuple[int, ...] = field(default=())

    @property
    def owned_box(self) -> tuple[tuple[int, int], ...]:
        box = [(0, n) for n in self.grid.cells]
        box[self.axis] = (self.lo, self.hi)
        return tuple(box)

    @property
    def local_cells(self) -> tuple[int, ...]:
        shape = list(self.grid.cells)
        shape[self.axis] = self.ext_hi - self.ext_lo
        return tuple(shape)

    @property
    def n_local(self) -> int:
        return int(np.prod(self.local_cells))

    def owner_rank(self, global_cell: int) -> int:
        """Rank whose owned slab contains the cell."""
        pos = self.grid.cell_coords(global_cell)[self.axis]
        return int(np.searchsorted(self.slab_bounds, pos, side="right") - 1)

    def owns(self, global_cell: int) -> bool:
        return self.lo <= self.grid.cell_coords(global_cell)[self.axis] < self.hi

    def in_extended(self, global_cell: int) -> bool:
        return (
            self.ext_lo <= self.grid.cell_coords(global_cell)[self.axis] < self.ext_hi
        )

    def global_to_local(self, global_cell: int) -> int:
        ijk = list(self.grid.cell_coords(global_cell))
        ijk[self.axis] -= self.ext_lo
        shape = self.local_cells
        if not 0 <= ijk[self.axis] < shape[self.axis]:
            raise IndexError(f"cell {global_cell} not in partition {self.rank}")
        idx = 0
        for a in reversed(range(self.grid.dim)):
            idx = idx * shape[a] + ijk[a]
        return idx

    def local_to_global(self, local_cell: int) -> int:
        shape = self.local_cells
        ijk = []
        for a in range(self.grid.dim):
            ijk.append(local_cell % shape[a])
            local_cell //= shape[a]
        ijk[self.axis] += self.ext_lo
        return self.grid.cell_index(ijk)

    def global_slice(self) -> tuple[slice, ...]:
        """Numpy slice (z,y,x ordered) extracting the extended box from a
        grid-shaped array reshaped as cells reversed."""
        take = [slice(None)] * self.grid.dim
        take[self.grid.dim - 1 - self.axis] = slice(self.ext_lo, self.ext_hi)
        return tuple(take)

    def extract(self, cell_array: np.ndarray) -> np.ndarray:
        """Copy the extended-box portion of a per-cell array (local numbering)."""
        full = np.asarray(cell_array).reshape(tuple(reversed(self.grid.cells)))
        return full[self.global_slice()].ravel().copy()

    def overlap_map(self) -> list[tuple[int, int, int]]:
        """List of (local cell, global cell, remote owner rank) for overlap cells."""
        out = []
        for pos in range(self.ext_lo, self.ext_hi):
            if self.lo <= pos < self.hi:
                continue
            remote = int(np.searchsorted(self.slab_bounds, pos, side="right") - 1)
            ijk0 = [0] * self.grid.dim
            ijk0[self.axis] = pos
            # enumerate the full transverse plane at this slab position
            other_axes = [a for a in range(self.grid.dim) if a != self.axis]
            ranges = [range(self.grid.cells[a]) for a in other_axes]
            mesh = np.meshgrid(*[np.asarray(r) for r in ranges], indexing="ij")
            coords = np.stack([m.ravel() for m in mesh], axis=1) if mesh else []
            for row in coords:
                ijk = list(ijk0)
                for a, v in zip(other_axes, row):
                    ijk[a] = int(v)
                g = self.grid.cell_index(ijk)
                out.append((self.global_to_local(g), g, remote))
        return out


def decompose(grid: StructuredGrid, ranks: int, overlap_width: int = 1) -> list[Partition]:
    """Slab decomposition along the longest axis (ties resolved to axis 0).

    Slabs are balanced to within one cell; each partition's extended box adds
    overlap_width cells toward each neighbor, clipped at the domain boundary.
    The serial case ranks=1 has an empty overlap.
    """
    if ranks < 1:
        raise ValueError(f"ranks must be >= 1, got {ranks}")
    if overlap_width < 1:
        raise ValueError(f"overlap_width must be >= 1, got {overlap_width}")
    axis = int(np.argmax(grid.cells))
    n = grid.cells[axis]
    if ranks > n:
        raise ValueError(f"{ranks} ranks exceed {n} cells along split axis {axis}")
    base, extra = divmod(n, ranks)
    bounds = [0]
    for r in range(ranks):
        bounds.append(bounds[-1] + base + (1 if r < extra else 0))
    parts = []
    for r in range(ranks):
        lo, hi = bounds[r], bounds[r + 1]
        ext_lo = max(0, lo - overlap_width) if r > 0 else lo
        ext_hi = min(n, hi + overlap_width) if r < ranks - 1 else hi
        parts.append(
            Partition(
                rank=r,
                nranks=ranks,
                axis=axis,
                lo=lo,
                hi=hi,
                ext_lo=ext_lo,
                ext_hi=ext_hi,
                grid=grid,
                slab_bounds=tuple(bounds[:-1]),
            )
        )
    return parts
