import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracsparse.dyadic import (
    BASE,
    CellBox,
    CubeFamily,
    SparseFamily,
    base_lattice,
    children,
    cover_cube,
    dilate3,
    shifted_lattices,
    subcubes,
    verify_sparse,
)
from fracsparse.grid import Box

UNIT = Box((0.0,), 1.0)
SQUARE = Box((0.0, 0.0), 1.0)


def test_children_interval():
    D = base_lattice(UNIT, 8)
    a, b = children(D.cube(0, (0,)))
    assert (a.real.lo, a.real.side) == ((0.0,), 0.5)
    assert (b.real.lo, b.real.side) == ((0.5,), 0.5)


def test_children_square():
    D = base_lattice(SQUARE, 4)
    kids = children(D.cube(0, (0, 0)))
    assert sorted(Q.lo for Q in kids) == [(0, 0), (0, 2), (2, 0), (2, 2)]
    assert all(Q.size == 2 for Q in kids)


def test_grandchildren_tile():
    D = base_lattice(UNIT, 16)
    gk = [c for Q in children(D.cube(0, (0,))) for c in children(Q)]
    cells = np.sort(np.concatenate([Q.cells() for Q in gk]))
    assert len(gk) == 4 and np.array_equal(cells, np.arange(16))


def test_children_of_leaf_rejected():
    D = base_lattice(UNIT, 4)
    with pytest.raises(ValueError):
        children(D.cube(2, (1,)))


@pytest.mark.parametrize("box,N", [(UNIT, 32), (SQUARE, 8)])
def test_every_level_partitions(box, N):
    for lat in [base_lattice(box, N)] + shifted_lattices(base_lattice(box, N)):
        for k in range(lat.max_level + 1):
            cells = np.concatenate([Q.cells() for Q in lat.level_cubes(k, inside_only=False)])
            assert np.array_equal(np.sort(cells), np.arange(N**box.n))


def test_dilate3_examples():
    D = base_lattice(UNIT, 8)
    Q = D.cube(2, (1,))  # [1/4, 1/2)
    T = dilate3(Q)
    assert T.real.lo[0] == 0.0 and T.real.side == 0.75
    R = dilate3(D.cube(0, (0,)))
    assert R.contains(D.cube(0, (0,)).cellbox)
    assert R.size**1 == 3 * 8 and R.is_clipped


@given(st.integers(1, 3), st.data())
def test_dilate3_measure(k, data):
    D = base_lattice(SQUARE, 8)
    idx = (data.draw(st.integers(0, 2**k - 1)), data.draw(st.integers(0, 2**k - 1)))
    Q = D.cube(k, idx)
    assert dilate3(Q).size ** 2 == 9 * Q.size**2


def test_shifted_lattice_counts_and_shifts():
    lats = shifted_lattices(base_lattice(UNIT, 16))
    assert [L.j for L in lats] == [0, 1, 2]
    assert sorted(L.shift[0] for L in lats) == [-1.0, 0.0, 1.0]
    for L in lats:
        for k in range(L.max_level + 1):
            assert L.side_cells(k) * (2**k) == 3 * 16
    assert len(shifted_lattices(base_lattice(SQUARE, 4))) == 9


@pytest.mark.parametrize("box,N", [(UNIT, 64), (SQUARE, 8)])
def test_shifted_lattices_nest(box, N):
    # each child of a shifted cube is inside its parent
    for L in shifted_lattices(base_lattice(box, N)):
        for k in range(L.max_level):
            for Q in L.level_cubes(k, inside_only=False):
                for c in children(Q):
                    assert Q.cellbox.contains(c.cellbox)


@pytest.mark.parametrize("box,N", [(UNIT, 64), (SQUARE, 8)])
def test_every_tripled_cube_in_some_lattice(box, N):
    D = base_lattice(box, N)
    lats = shifted_lattices(D)
    for k in range(D.max_level + 1):
        for Q in D.level_cubes(k):
            T = dilate3(Q)
            hits = [L for L in lats if L.cube_containing(k, T.lo).cellbox == T]
            assert len(hits) == 1
            # each lattice has a cube of side 3 l(Q) containing Q
            for L in lats:
                assert L.cube_containing(k, Q.lo).cellbox.contains(Q.cellbox)


def test_half_interval_covered_by_side_three_halves():
    D = base_lattice(UNIT, 16)
    Q = D.cube(1, (0,))
    lats = shifted_lattices(D)
    cands = [L.cube_containing(1, Q.lo) for L in lats]
    good = [P for P in cands if P.cellbox.contains(Q.cellbox) and P.real.side == 1.5]
    assert good


def test_cover_cube_examples():
    D = base_lattice(UNIT, 32)
    lats = shifted_lattices(D)
    Q = D.cube(3, (5,))
    j, P = cover_cube(Q, lats)
    assert P.j == j and P.cellbox.contains(Q.cellbox) and P.size <= 3 * Q.size
    root = D.cube(0, (0,))
    j0, P0 = cover_cube(root, lats)
    # brute force: smallest side among all shifted cubes containing the root
    sides = [
        L.side_cells(k)
        for L in lats
        for k in range(L.max_level + 1)
        for P in L.level_cubes(k, inside_only=False)
        if P.cellbox.contains(root.cellbox)
    ]
    assert P0.size == min(sides) and P0.cellbox.contains(root.cellbox)
    # a real box is snapped to cells
    j1, P1 = cover_cube(Box((0.25,), 0.25), lats)
    assert P1.cellbox.contains(D.cube(2, (1,)).cellbox)


def test_cover_cube_deterministic_tie_break():
    D = base_lattice(UNIT, 32)
    lats = shifted_lattices(D)
    Q = CellBox(UNIT, 32, (8,), 8)
    j, P = cover_cube(Q, lats)
    # candidates of equal side are ordered by lattice id
    same = [L for L in lats if L.cube_containing(P.level, Q.lo).cellbox.contains(Q) and L.side_cells(P.level) == P.size]
    assert j == min(L.j for L in same)
    assert cover_cube(Q, lats[::-1]) == (j, P)


@pytest.mark.parametrize("N", [2**10])
def test_cover_random_cubes_1d(N):
    rng = np.random.default_rng(7)
    lats = shifted_lattices(base_lattice(UNIT, N))
    for _ in range(1000):
        s = int(rng.integers(1, N // 3 + 1))
        lo = int(rng.integers(0, N - s + 1))
        Q = CellBox(UNIT, N, (lo,), s)
        j, P = cover_cube(Q, lats)
        assert P.cellbox.contains(Q)
        assert Q.size <= P.size <= 3 * Q.size


def test_cover_random_cubes_2d():
    rng = np.random.default_rng(8)
    N = 64
    lats = shifted_lattices(base_lattice(SQUARE, N))
    for _ in range(300):
        s = int(rng.integers(1, N // 3 + 1))
        lo = tuple(int(v) for v in rng.integers(0, N - s + 1, size=2))
        Q = CellBox(SQUARE, N, lo, s)
        j, P = cover_cube(Q, lats)
        assert P.cellbox.contains(Q) and P.size**2 <= 9 * Q.size**2


def test_cover_cube_exhaustive_dyadic():
    N = 2**10
    D = base_lattice(UNIT, N)
    lats = shifted_lattices(D)
    for k in range(D.max_level + 1):
        for Q in D.level_cubes(k):
            _, P = cover_cube(Q, lats)
            assert P.cellbox.contains(Q.cellbox) and P.size <= 3 * Q.size


def test_cover_cube_rejects_foreign_grid():
    lats = shifted_lattices(base_lattice(UNIT, 16))
    with pytest.raises(ValueError):
        cover_cube(CellBox(UNIT, 32, (0,), 4), lats)


def test_verify_sparse_examples():
    D = base_lattice(UNIT, 8)
    root = D.cube(0, (0,))
    S = SparseFamily(0.5)
    S.add(root, root.cells())
    c = verify_sparse(S)
    assert c.passed and c.worst_ratio == 1.0

    S = SparseFamily(0.5)
    half = D.cube(1, (0,))
    S.add(root, np.setdiff1d(root.cells(), half.cells()))
    S.add(half, half.cells())
    assert verify_sparse(S).passed

    S = SparseFamily(0.5)
    S.add(root, [0, 1, 2, 3])
    S.add(half, [3, 4 - 4, 1, 2])
    c = verify_sparse(S)
    assert not c.passed and not c.disjoint


def test_verify_sparse_ratio_and_containment():
    D = base_lattice(UNIT, 8)
    S = SparseFamily(0.5)
    S.add(D.cube(1, (0,)), [0])
    c = verify_sparse(S)
    assert not c.passed and c.worst_ratio == 0.25
    S = SparseFamily(0.1)
    S.add(D.cube(1, (0,)), [7])
    assert not verify_sparse(S).contained
    assert verify_sparse(SparseFamily(0.5)).passed


def test_sparse_family_csv_round_trip(tmp_path):
    D = base_lattice(SQUARE, 8)
    lats = shifted_lattices(D)
    S = SparseFamily(1 / 18)
    S.add(lats[4].cube(1, (0, 1)), [3, 4, 5])
    S.add(D.cube(2, (1, 1)), [18, 19])
    S.add(lats[0].cube(0, (0, 0)), [])
    S.to_csv(tmp_path / "s.csv", header="test")
    T = SparseFamily.from_csv(tmp_path / "s.csv")
    assert T.eta == S.eta
    assert T.cubes == S.cubes
    for Q in S.cubes:
        assert np.array_equal(T.witness[Q], S.witness[Q])


def test_subcubes_count():
    D = base_lattice(UNIT, 16)
    assert len(subcubes(D.cube(0, (0,)))) == 31
    assert len(subcubes(D.cube(0, (0,)), min_size=4)) == 7


def test_cube_family_standard():
    F = CubeFamily.standard(UNIT, 16)
    assert all(Q.inside for Q in F.cubes)
    assert sum(Q.j == BASE for Q in F.cubes) == 31
    rng = np.random.default_rng(0)
    v = rng.normal(size=16)
    avg = F.averages(v)
    for i in rng.integers(0, len(F), size=20):
        assert avg[i] == pytest.approx(v[F.cubes[i].cells()].mean())
    mx = F.scatter_max(avg, fill=-np.inf)
    for c in range(16):
        assert mx[c] == max(a for a, Q in zip(avg, F.cubes) if c in Q.cells())


def test_parent_child_roundtrip():
    for L in [base_lattice(UNIT, 32)] + shifted_lattices(base_lattice(UNIT, 32)):
        for Q in L.level_cubes(2, inside_only=False):
            for c in children(Q):
                assert c.parent() == Q
