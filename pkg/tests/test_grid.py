import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from porestream.grid import (
    BOUNDARY,
    build_grid,
    boundary_faces,
    decompose,
    interior_face_arrays,
    interior_faces,
)


def test_build_grid_unit_spacing():
    g = build_grid(2, [100, 100], [100.0, 100.0])
    assert g.spacing == (1.0, 1.0)
    assert g.ncells == 10000


def test_build_grid_spe_dimensions():
    g = build_grid(3, [60, 220, 85], [365.76, 670.56, 51.816])
    assert g.spacing[0] == pytest.approx(6.096)
    assert g.spacing[1] == pytest.approx(3.048)
    assert g.spacing[2] == pytest.approx(0.6096)


def test_build_grid_single_cell():
    g = build_grid(2, [1, 1], [1.0, 1.0])
    assert interior_faces(g) == []
    assert len(boundary_faces(g)) == 4


def test_build_grid_rejects_bad_input():
    with pytest.raises(ValueError):
        build_grid(2, [0, 10], [1.0, 1.0])
    with pytest.raises(ValueError):
        build_grid(2, [10, 10], [0.0, 1.0])
    with pytest.raises(ValueError):
        build_grid(2, [10, 10], [-1.0, 1.0])


def test_cell_numbering_x_fastest():
    g = build_grid(2, [3, 2], [3.0, 2.0])
    assert g.cell_index((0, 0)) == 0
    assert g.cell_index((1, 0)) == 1
    assert g.cell_index((0, 1)) == 3
    assert g.cell_coords(5) == (2, 1)
    g3 = build_grid(3, [3, 2, 2], [1.0, 1.0, 1.0])
    assert g3.cell_index((0, 1, 1)) == 3 + 6
    assert g3.cell_coords(9) == (0, 1, 1)


def test_cell_centers_order_matches_index():
    g = build_grid(2, [3, 2], [3.0, 4.0])
    centers = g.cell_centers()
    for idx in range(g.ncells):
        assert np.allclose(centers[idx], g.cell_center(idx))


def test_containing_cell_round_trip():
    g = build_grid(3, [4, 3, 2], [4.0, 3.0, 2.0])
    for idx in range(g.ncells):
        assert g.containing_cell(g.cell_center(idx)) == idx


def test_interior_face_count_two_cells():
    g = build_grid(2, [2, 1], [2.0, 1.0])
    faces = interior_faces(g)
    assert len(faces) == 1
    assert faces[0].normal_axis == 0
    assert (faces[0].cell_minus, faces[0].cell_plus) == (0, 1)


def test_interior_face_count_2x2():
    g = build_grid(2, [2, 2], [2.0, 2.0])
    assert len(interior_faces(g)) == 4


def test_interior_face_count_100x100():
    g = build_grid(2, [100, 100], [100.0, 100.0])
    assert len(interior_faces(g)) == 19800


def test_interior_faces_canonical_orientation():
    g = build_grid(3, [3, 4, 2], [3.0, 4.0, 2.0])
    for f in interior_faces(g):
        assert f.cell_minus < f.cell_plus
        assert f.sign == 1
        ijk_m = g.cell_coords(f.cell_minus)
        ijk_p = g.cell_coords(f.cell_plus)
        diff = [p - m for m, p in zip(ijk_m, ijk_p)]
        assert diff[f.normal_axis] == 1
        assert sum(abs(d) for d in diff) == 1


def test_boundary_faces_outward():
    g = build_grid(2, [2, 2], [2.0, 2.0])
    faces = boundary_faces(g)
    assert len(faces) == 8
    for f in faces:
        assert f.cell_plus == BOUNDARY
        lo_side = f.side % 2 == 0
        assert f.sign == (-1 if lo_side else 1)


def test_decompose_two_ranks_overlap_columns():
    g = build_grid(2, [12, 6], [12.0, 6.0])
    parts = decompose(g, 2, 1)
    assert (parts[0].lo, parts[0].hi) == (0, 6)
    assert (parts[1].lo, parts[1].hi) == (6, 12)
    ov0 = parts[0].overlap_map()
    assert len(ov0) == 6
    assert all(g.cell_coords(gc)[0] == 6 and rr == 1 for _, gc, rr in ov0)
    ov1 = parts[1].overlap_map()
    assert all(g.cell_coords(gc)[0] == 5 and rr == 0 for _, gc, rr in ov1)


def test_decompose_serial_no_overlap():
    g = build_grid(2, [5, 4], [5.0, 4.0])
    (p,) = decompose(g, 1, 1)
    assert p.overlap_map() == []
    assert p.n_local == g.ncells


def test_decompose_four_ranks_width_two():
    g = build_grid(2, [100, 100], [100.0, 100.0])
    parts = decompose(g, 4, 2)
    assert [p.hi - p.lo for p in parts] == [25, 25, 25, 25]
    assert (parts[1].ext_lo, parts[1].ext_hi) == (23, 52)
    # two overlap columns on each internal side
    assert len(parts[0].overlap_map()) == 200
    assert len(parts[1].overlap_map()) == 400


def test_decompose_rejects_too_many_ranks():
    g = build_grid(2, [4, 100], [4.0, 100.0])
    with pytest.raises(ValueError):
        decompose(g, 101, 1)


def test_decompose_splits_longest_axis():
    g = build_grid(2, [4, 9], [4.0, 9.0])
    parts = decompose(g, 3, 1)
    assert all(p.axis == 1 for p in parts)


@settings(max_examples=60, deadline=None)
@given(
    nx=st.integers(1, 12),
    ny=st.integers(1, 12),
    ranks=st.integers(1, 8),
    width=st.integers(1, 3),
)
def test_decompose_conservation_and_symmetry(nx, ny, ranks, width):
    g = build_grid(2, [nx, ny], [float(nx), float(ny)])
    axis_len = max(nx, ny)
    if ranks > axis_len:
        with pytest.raises(ValueError):
            decompose(g, ranks, width)
        return
    parts = decompose(g, ranks, width)
    owned = set()
    for p in parts:
        mine = {c for c in range(g.ncells) if p.owns(c)}
        assert not owned & mine
        owned |= mine
    assert owned == set(range(g.ncells))
    # overlap symmetry: mapped owner really owns the cell
    for p in parts:
        for loc, glob, remote in p.overlap_map():
            assert parts[remote].owns(glob)
            assert p.local_to_global(loc) == glob


def test_local_global_round_trip():
    g = build_grid(3, [8, 3, 2], [8.0, 3.0, 2.0])
    for p in decompose(g, 3, 1):
        for loc in range(p.n_local):
            assert p.global_to_local(p.local_to_global(loc)) == loc


def test_extract_matches_local_numbering():
    g = build_grid(2, [6, 3], [6.0, 3.0])
    data = np.arange(g.ncells, dtype=float) * 2.0
    for p in decompose(g, 2, 1):
        local = p.extract(data)
        for loc in range(p.n_local):
            assert local[loc] == data[p.local_to_global(loc)]


def test_interior_face_arrays_match_face_list():
    g = build_grid(2, [4, 3], [4.0, 3.0])
    arrays = interior_face_arrays(g)
    listed = {(f.cell_minus, f.cell_plus, f.normal_axis) for f in interior_faces(g)}
    from_arrays = {
        (int(m), int(p), a) for a, arr in arrays.items() for m, p in arr
    }
    assert listed == from_arrays
