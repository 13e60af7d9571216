"""Dyadic lattices on a root box, the 3^n shifted lattices, and sparse families.

All geometry is done in integer cell coordinates of the grid that subdivides
the root box into ``N^n`` cells.  The reference lattice (id ``-1``) has
level-``k`` cubes of ``2^(L-k)`` cells, ``L = log2 N``; its leaves are the
grid cells.  The shifted lattices ``0 .. 3^n - 1`` have level-``k`` cubes of
``3 * 2^(L-k)`` cells, offset per axis by ``(r_k - 1) * 2^(L-k)`` cells where
the residues follow ``r_{k+1} = (2 r_k - 1) mod 3``.  That recursion is what
makes every generation of a shifted lattice nest inside the previous one,
and at each level the three residues enumerate the three classes of
``3Q`` for reference cubes ``Q``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .grid import Box

__all__ = [
    "BASE",
    "DyadicLattice",
    "DyadicCube",
    "CellBox",
    "SparseFamily",
    "SparsityCertificate",
    "CubeFamily",
    "base_lattice",
    "children",
    "dilate3",
    "shifted_lattices",
    "cover_cube",
    "verify_sparse",
    "subcubes",
]

BASE = -1


def _log2(N: int) -> int:
    L = N.bit_length() - 1
    if N < 1 or (1 << L) != N:
        raise ValueError(f"N must be a power of 2, got {N}")
    return L


@dataclass(frozen=True)
class DyadicLattice:
    box: Box
    N: int
    j: int = BASE
    residues: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        _log2(self.N)
        if self.j == BASE:
            if self.residues:
                raise ValueError("the reference lattice carries no residues")
        elif len(self.residues) != self.box.n or any(r not in (0, 1, 2) for r in self.residues):
            raise ValueError(f"bad residues {self.residues}")

    @property
    def n(self) -> int:
        return self.box.n

    @property
    def max_level(self) -> int:
        return _log2(self.N)

    @property
    def is_base(self) -> bool:
        return self.j == BASE

    def side_cells(self, k: int) -> int:
        s = 1 << (self.max_level - k)
        return s if self.is_base else 3 * s

    def residue(self, k: int) -> tuple[int, ...]:
        r = self.residues
        for _ in range(k):
            r = tuple((2 * v - 1) % 3 for v in r)
        return r

    def offset_cells(self, k: int) -> tuple[int, ...]:
        if self.is_base:
            return (0,) * self.n
        s = 1 << (self.max_level - k)
        return tuple((r - 1) * s for r in self.residue(k))

    @property
    def shift(self) -> tuple[float, ...]:
        h = self.box.side / self.N
        return tuple(o * h for o in self.offset_cells(0))

    def cube(self, k: int, index: Sequence[int]) -> "DyadicCube":
        return DyadicCube(self, k, tuple(int(i) for i in index))

    def cube_containing(self, k: int, cell: Sequence[int]) -> "DyadicCube":
        s = self.side_cells(k)
        off = self.offset_cells(k)
        return self.cube(k, [(c - o) // s for c, o in zip(cell, off)])

    def level_cubes(self, k: int, inside_only: bool = True) -> list["DyadicCube"]:
        """Cubes of level k meeting the root box (or fully inside it)."""
        s = self.side_cells(k)
        ranges = []
        for o in self.offset_cells(k):
            if inside_only:
                lo_a, hi_a = -(o // s), (self.N - o) // s - 1
            else:
                lo_a, hi_a = (-o) // s, (self.N - o - 1) // s
            ranges.append(range(lo_a, hi_a + 1))
        return [self.cube(k, idx) for idx in itertools.product(*ranges)]


def base_lattice(box: Box, N: int) -> DyadicLattice:
    return DyadicLattice(box, N)


@dataclass(frozen=True)
class CellBox:
    """Grid-aligned cube in cell coordinates (may stick out of the root box)."""

    box: Box
    N: int
    lo: tuple[int, ...]
    size: int

    @property
    def n(self) -> int:
        return len(self.lo)

    @property
    def hi(self) -> tuple[int, ...]:
        return tuple(a + self.size for a in self.lo)

    @property
    def count(self) -> int:
        """Number of cells of the unclipped cube."""
        return self.size**self.n

    @property
    def real(self) -> Box:
        h = self.box.side / self.N
        return Box(tuple(b + a * h for b, a in zip(self.box.lo, self.lo)), self.size * h)

    @property
    def clipped_ranges(self) -> tuple[tuple[int, int], ...]:
        return tuple((max(a, 0), min(a + self.size, self.N)) for a in self.lo)

    @property
    def is_clipped(self) -> bool:
        return any(a < 0 or a + self.size > self.N for a in self.lo)

    @property
    def inside(self) -> bool:
        return not self.is_clipped

    def cells(self) -> np.ndarray:
        """Flat indices of the cells of the clipped cube, row-major order."""
        return _range_cells(self.clipped_ranges, self.N)

    def contains(self, other: "CellBox") -> bool:
        return all(a <= b and b + other.size <= a + self.size for a, b in zip(self.lo, other.lo))


def _range_cells(ranges: Sequence[tuple[int, int]], N: int) -> np.ndarray:
    axes = [np.arange(a, b, dtype=np.int64) for a, b in ranges]
    if any(ax.size == 0 for ax in axes):
        return np.zeros(0, dtype=np.int64)
    if len(axes) == 1:
        return axes[0]
    return (axes[0][:, None] * N + axes[1][None, :]).reshape(-1)


@dataclass(frozen=True)
class DyadicCube:
    lattice: DyadicLattice = field(repr=False)
    level: int
    index: tuple[int, ...]

    def __repr__(self) -> str:
        return f"DyadicCube(j={self.j}, k={self.level}, index={self.index})"

    @property
    def j(self) -> int:
        return self.lattice.j

    @property
    def n(self) -> int:
        return self.lattice.n

    @cached_property
    def size(self) -> int:
        return self.lattice.side_cells(self.level)

    @cached_property
    def lo(self) -> tuple[int, ...]:
        s = self.size
        return tuple(o + i * s for o, i in zip(self.lattice.offset_cells(self.level), self.index))

    @property
    def cellbox(self) -> CellBox:
        return CellBox(self.lattice.box, self.lattice.N, self.lo, self.size)

    @property
    def count(self) -> int:
        return self.size**self.n

    @property
    def inside(self) -> bool:
        return self.cellbox.inside

    @property
    def real(self) -> Box:
        return self.cellbox.real

    def cells(self) -> np.ndarray:
        return self.cellbox.cells()

    def contains(self, other: "DyadicCube | CellBox") -> bool:
        o = other.cellbox if isinstance(other, DyadicCube) else other
        return self.cellbox.contains(o)

    def parent(self) -> "DyadicCube":
        if self.level == 0:
            raise ValueError("level-0 cube has no parent inside the lattice")
        return self.lattice.cube_containing(self.level - 1, self.lo)


def children(Q: DyadicCube) -> list[DyadicCube]:
    lat = Q.lattice
    if Q.level >= lat.max_level:
        raise ValueError(f"{Q} is a leaf of its lattice")
    half = Q.size // 2
    out = []
    for e in itertools.product((0, 1), repeat=Q.n):
        corner = [a + ei * half for a, ei in zip(Q.lo, e)]
        out.append(lat.cube_containing(Q.level + 1, corner))
    return out


def subcubes(Q: DyadicCube, min_size: int = 1) -> list[DyadicCube]:
    """Q and all of its descendants in its own lattice, coarse to fine."""
    out = [Q]
    frontier = [Q]
    while frontier and frontier[0].level < Q.lattice.max_level and frontier[0].size // 2 >= min_size:
        frontier = [c for P in frontier for c in children(P)]
        out.extend(frontier)
    return out


def dilate3(Q: DyadicCube | CellBox) -> CellBox:
    """Concentric cube of three times the side; clip with ``cells()`` / ``clipped_ranges``."""
    c = Q.cellbox if isinstance(Q, DyadicCube) else Q
    return CellBox(c.box, c.N, tuple(a - c.size for a in c.lo), 3 * c.size)


def shifted_lattices(D: DyadicLattice) -> list[DyadicLattice]:
    out = []
    for t in itertools.product((0, 1, 2), repeat=D.n):
        j = sum(v * 3**d for d, v in enumerate(reversed(t)))
        out.append(DyadicLattice(D.box, D.N, j, tuple(t)))
    return sorted(out, key=lambda lat: lat.j)


def _as_cellbox(Q, lattices: Sequence[DyadicLattice]) -> CellBox:
    if isinstance(Q, CellBox):
        return Q
    if isinstance(Q, DyadicCube):
        return Q.cellbox
    root, N = lattices[0].box, lattices[0].N
    h = root.side / N
    lo_f = [(a - r) / h for a, r in zip(Q.lo, root.lo)]
    lo = [int(np.floor(v + 1e-9)) for v in lo_f]
    hi = [int(np.ceil(v + Q.side / h - 1e-9)) for v in lo_f]
    return CellBox(root, N, tuple(lo), max(b - a for a, b in zip(lo, hi)))


def cover_cube(Q, lattices: Sequence[DyadicLattice]) -> tuple[int, DyadicCube]:
    """Smallest lattice cube ``P`` with ``Q`` inside ``P`` and side at most ``3 l(Q)``.

    Ties between equal sides go to the smallest lattice id, then to the
    lexicographically smallest index.
    """
    c = _as_cellbox(Q, lattices)
    for lat in lattices:
        if lat.box != c.box or lat.N != c.N:
            raise ValueError("lattices and cube live on different grids")
    best = None
    for lat in lattices:
        for k in range(lat.max_level + 1):
            s = lat.side_cells(k)
            if s < c.size or s > 3 * c.size:
                continue
            P = lat.cube_containing(k, c.lo)
            if P.cellbox.contains(c):
                key = (s, lat.j, P.index)
                if best is None or key < best[0]:
                    best = (key, P)
    if best is None:
        raise ValueError(f"no lattice cube of side <= 3 l(Q) covers {c}")
    return best[1].j, best[1]


@dataclass(frozen=True)
class SparsityCertificate:
    passed: bool
    worst_cube: DyadicCube | None
    worst_ratio: float
    disjoint: bool = True
    contained: bool = True


@dataclass
class SparseFamily:
    """Cubes with witness cell sets ``E_Q`` (flat indices) and parameter ``eta``."""

    eta: float
    cubes: list[DyadicCube] = field(default_factory=list)
    witness: dict[DyadicCube, np.ndarray] = field(default_factory=dict)

    def add(self, Q: DyadicCube, E: Iterable[int] | np.ndarray) -> None:
        E = np.unique(np.asarray(list(E) if not isinstance(E, np.ndarray) else E, dtype=np.int64))
        if Q in self.witness:
            self.witness[Q] = np.union1d(self.witness[Q], E)
        else:
            self.cubes.append(Q)
            self.witness[Q] = E

    def __len__(self) -> int:
        return len(self.cubes)

    def to_csv(self, path, header: str = "") -> None:
        with open(path, "w") as fh:
            if header:
                fh.write(f"# {header}\n")
            if self.cubes:
                lat = self.cubes[0].lattice
                lo = ";".join(repr(v) for v in lat.box.lo)
                fh.write(f"# eta={self.eta!r} box_lo={lo} box_side={lat.box.side!r} N={lat.N}\n")
            else:
                fh.write(f"# eta={self.eta!r}\n")
            fh.write("j,k," + ",".join(f"index{d}" for d in range(self.cubes[0].n if self.cubes else 1)) + ",witness_cells\n")
            for Q in self.cubes:
                idx = ",".join(str(i) for i in Q.index)
                cells = ";".join(str(int(c)) for c in self.witness[Q])
                fh.write(f"{Q.j},{Q.level},{idx},{cells}\n")

    @classmethod
    def from_csv(cls, path) -> "SparseFamily":
        meta: dict[str, str] = {}
        rows = []
        with open(path) as fh:
            for ln in fh:
                ln = ln.strip()
                if not ln:
                    continue
                if ln.startswith("#"):
                    for tok in ln.lstrip("#").split():
                        if "=" in tok:
                            key, val = tok.split("=", 1)
                            meta.setdefault(key, val)
                    continue
                if ln.startswith("j,"):
                    continue
                rows.append(ln.split(","))
        S = cls(float(meta["eta"]))
        if not rows:
            return S
        box = Box(tuple(float(t) for t in meta["box_lo"].split(";")), float(meta["box_side"]))
        N = int(meta["N"])
        lattices = {BASE: base_lattice(box, N)}
        lattices.update({lat.j: lat for lat in shifted_lattices(lattices[BASE])})
        for r in rows:
            j, k = int(r[0]), int(r[1])
            idx = tuple(int(t) for t in r[2 : 2 + box.n])
            cells = r[2 + box.n]
            E = np.array([int(t) for t in cells.split(";")] if cells else [], dtype=np.int64)
            S.add(lattices[j].cube(k, idx), E)
        return S


def verify_sparse(S: SparseFamily) -> SparsityCertificate:
    seen: set[int] = set()
    disjoint = True
    contained = True
    worst_cube, worst = None, float("inf")
    for Q in S.cubes:
        E = S.witness.get(Q, np.zeros(0, dtype=np.int64))
        Eset = set(int(c) for c in E)
        if seen & Eset:
            disjoint = False
        seen |= Eset
        if not Eset <= set(int(c) for c in Q.cells()):
            contained = False
        ratio = len(Eset) / Q.count
        if ratio < worst:
            worst, worst_cube = ratio, Q
    if not S.cubes:
        worst = 1.0
    passed = disjoint and contained and worst >= S.eta
    return SparsityCertificate(passed, worst_cube, worst, disjoint, contained)


@dataclass(frozen=True, eq=False)
class CubeFamily:
    """Finite family of lattice cubes lying inside the root box.

    Cubes are bucketed by side so that cell gathers vectorize: for every
    bucket ``cells`` is an integer array ``(#cubes, size^n)`` of flat cell
    indices.
    """

    cubes: tuple[DyadicCube, ...]

    def __post_init__(self) -> None:
        if not self.cubes:
            raise ValueError("cube family must be nonempty")
        for Q in self.cubes:
            if not Q.inside:
                raise ValueError(f"{Q} sticks out of the root box")

    @classmethod
    def standard(
        cls, box: Box, N: int, max_level: int | None = None, shifted: bool = True
    ) -> "CubeFamily":
        """Reference cubes of levels ``0..max_level`` plus shifted-lattice cubes inside the box."""
        D = base_lattice(box, N)
        top = D.max_level if max_level is None else min(max_level, D.max_level)
        cubes = []
        for k in range(top + 1):
            cubes.extend(D.level_cubes(k))
        if shifted:
            for lat in shifted_lattices(D):
                for k in range(lat.max_level + 1):
                    if lat.side_cells(k) < N >> top:
                        continue
                    cubes.extend(lat.level_cubes(k))
        return cls(tuple(cubes))

    def __len__(self) -> int:
        return len(self.cubes)

    @property
    def N(self) -> int:
        return self.cubes[0].lattice.N

    @property
    def n(self) -> int:
        return self.cubes[0].n

    @cached_property
    def lo(self) -> np.ndarray:
        return np.array([Q.lo for Q in self.cubes], dtype=np.int64)

    @cached_property
    def size(self) -> np.ndarray:
        return np.array([Q.size for Q in self.cubes], dtype=np.int64)

    @cached_property
    def buckets(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """``(family indices, cell index matrix)`` per distinct side."""
        out = []
        N, n = self.N, self.n
        for s in np.unique(self.size):
            ids = np.flatnonzero(self.size == s)
            off = np.arange(s, dtype=np.int64)
            if n == 1:
                cells = self.lo[ids, 0][:, None] + off[None, :]
            else:
                rel = (off[:, None] * N + off[None, :]).reshape(-1)
                cells = (self.lo[ids, 0] * N + self.lo[ids, 1])[:, None] + rel[None, :]
            out.append((ids, cells))
        return out

    def averages(self, values: np.ndarray) -> np.ndarray:
        """Mean of a flat cell array over every cube of the family."""
        out = np.empty(len(self.cubes))
        flat = np.asarray(values).reshape(-1)
        for ids, cells in self.buckets:
            out[ids] = flat[cells].mean(axis=1)
        return out

    def scatter_max(self, per_cube: np.ndarray, fill: float = 0.0) -> np.ndarray:
        """Cellwise max of ``per_cube`` over the cubes containing each cell."""
        out = np.full(self.N**self.n, fill)
        for ids, cells in self.buckets:
            np.maximum.at(out, cells.reshape(-1), np.repeat(per_cube[ids], cells.shape[1]))
        return out
