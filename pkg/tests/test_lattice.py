import pytest

from tqolab.lattice import (Box, QubitLayout, Square, Torus, assign_square_to_box,
                            ball, box_partition, enumerate_squares, site_ball)


def test_square_counts_translations():
    torus = Torus((4, 4))
    assert len(enumerate_squares(torus, 2)) == 16


def test_full_lattice_square_is_unique():
    torus = Torus((3, 3))
    squares = enumerate_squares(torus, 3)
    assert len(squares) == 1
    assert set(squares[0].sites(torus)) == set(torus.sites())


def test_square_union_covers_lattice():
    torus = Torus((3, 3))
    covered = set()
    for sq in enumerate_squares(torus, 2):
        covered |= set(sq.sites(torus))
    assert covered == set(torus.sites())


@pytest.mark.parametrize("r", [0, 5])
def test_square_size_bounds(r):
    with pytest.raises(ValueError):
        enumerate_squares(Torus((4, 4)), r)


def test_square_support_size_exact():
    torus = Torus((5, 5))
    for r in range(1, 6):
        for sq in enumerate_squares(torus, r):
            assert len(set(sq.sites(torus))) == r ** 2


def test_ball_growth_and_identity():
    torus = Torus((8, 8))
    a = Square((0, 0), 2)
    b2, sat = ball(torus, a, 2)
    assert not sat
    assert b2.size == 6
    assert b2.anchor == (6, 6)
    assert ball(torus, a, 0) == (a, False)


def test_ball_saturation_flag():
    torus = Torus((4, 4))
    a = Square((1, 1), 2)
    full, sat = ball(torus, a, 2)
    assert sat
    assert full.size == 4
    assert set(full.sites(torus)) == set(torus.sites())


def test_ball_composition():
    torus = Torus((9, 9))
    a = Square((4, 4), 1)
    inner, _ = ball(torus, a, 1)
    outer, sat = ball(torus, inner, 2)
    direct, _ = ball(torus, a, 3)
    assert not sat and outer == direct


def test_box_partition_divisible():
    torus = Torus((4, 4))
    boxes = box_partition(torus, 2)
    assert len(boxes) == 4
    assert all(b.shape == (2, 2) for b in boxes)
    covered = [s for b in boxes for s in b.sites(torus)]
    assert len(covered) == len(set(covered)) == 16


def test_box_partition_single_box():
    torus = Torus((4, 4))
    boxes = box_partition(torus, 4)
    assert len(boxes) == 1
    assert set(boxes[0].sites(torus)) == set(torus.sites())


def test_box_partition_truncated():
    torus = Torus((5, 5))
    boxes = box_partition(torus, 2)
    shapes = sorted(b.shape for b in boxes)
    assert (1, 1) in shapes and (2, 2) in shapes
    covered = [s for b in boxes for s in b.sites(torus)]
    assert len(covered) == len(set(covered)) == 25


@pytest.mark.parametrize("L,r", [(4, 2), (5, 2), (6, 3), (8, 2)])
def test_box_assignment_total_and_unique(L, r):
    torus = Torus((L, L))
    boxes = box_partition(torus, r)
    for sq in enumerate_squares(torus, 2):
        idx = assign_square_to_box(torus, boxes, sq, r)
        assert 0 <= idx < len(boxes)
        # the owning box holds the square's anchor site
        assert sq.anchor in set(boxes[idx].sites(torus))


def test_box_partition_rejects_small_boxes():
    with pytest.raises(ValueError):
        box_partition(Torus((4, 4)), 1)


def test_one_dimensional_intervals():
    torus = Torus((5,))
    squares = enumerate_squares(torus, 2)
    assert len(squares) == 5
    assert set(squares[0].sites(torus)) == {(0,), (1,)}
    grown, sat = site_ball(torus, (2,), 1)
    assert not sat and set(grown.sites(torus)) == {(1,), (2,), (3,)}


def test_torus_requires_equal_sides():
    with pytest.raises(ValueError):
        Torus((3, 4))


def test_qubit_layout_indexing():
    layout = QubitLayout(Torus((2, 2)), qubits_per_cell=2)
    assert layout.n_qubits == 8
    assert layout.qubit((1, 0), 1) == 5
    assert layout.cell_of(5) == ((1, 0), 1)
    sq = Square((0, 0), 2)
    assert layout.region_qubits(sq) == tuple(range(8))
