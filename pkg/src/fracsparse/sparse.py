"""Sparse operators and the constructive pointwise sparse domination of commutators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dyadic import (
    CellBox,
    DyadicCube,
    SparseFamily,
    base_lattice,
    children,
    cover_cube,
    dilate3,
    shifted_lattices,
    verify_sparse,
)
from .frac_ops import _local_grand_max_flat, frac_kernel, iterated_commutator
from .grid import GridFunction
from .weights import Weight

__all__ = [
    "SparseOperatorSpec",
    "CubeStep",
    "DominationReport",
    "sparse_avg",
    "sparse_frac",
    "sparse_commutator_form",
    "weighted_sparse_iterate",
    "cz_stop_cubes",
    "build_sparse_domination",
]


@dataclass(frozen=True)
class SparseOperatorSpec:
    family: SparseFamily
    alpha: float
    m: int
    h: int
    b: GridFunction

    def __post_init__(self) -> None:
        if not 0 <= self.h <= self.m:
            raise ValueError(f"need 0 <= h <= m, got h={self.h}, m={self.m}")


def _cube_stats(Q: DyadicCube, h: float) -> tuple[np.ndarray, float]:
    # clipped cells and full (unclipped) measure of the cube
    return Q.cells(), (Q.size * h) ** Q.n


def sparse_avg(S: SparseFamily, f: GridFunction) -> GridFunction:
    """``sum_Q <|f|>_Q chi_Q``; averages use the full measure of ``Q``."""
    af = np.abs(f.flat)
    out = np.zeros(f.size)
    hn = f.h**f.n
    for Q in S.cubes:
        cells, vol = _cube_stats(Q, f.h)
        out[cells] += af[cells].sum() * hn / vol
    return f.with_values(out)


def sparse_frac(S: SparseFamily, alpha: float, f: GridFunction) -> GridFunction:
    """``sum_Q |Q|^(alpha/n - 1) int_Q |f| chi_Q``."""
    if not 0 < alpha < f.n:
        raise ValueError(f"alpha must lie in (0, n), got {alpha}")
    af = np.abs(f.flat)
    out = np.zeros(f.size)
    hn = f.h**f.n
    for Q in S.cubes:
        cells, vol = _cube_stats(Q, f.h)
        out[cells] += vol ** (alpha / f.n - 1) * af[cells].sum() * hn
    return f.with_values(out)


def _commutator_terms(
    S: SparseFamily, alpha: float, m: int, b: np.ndarray, f: np.ndarray, h: float, n: int
) -> np.ndarray:
    # row hh holds the sparse form with exponent pair (m, hh)
    out = np.zeros((m + 1, f.size))
    hn = h**n
    for Q in S.cubes:
        cells, vol = _cube_stats(Q, h)
        if cells.size == 0:
            continue
        bQ = b[cells].mean()
        d = b[cells] - bQ
        ad = np.abs(d)
        for hh in range(m + 1):
            avg = np.sum(np.abs(f[cells] * d**hh)) * hn / vol
            out[hh, cells] += ad ** (m - hh) * vol ** (alpha / n) * avg
    return out


def sparse_commutator_form(spec: SparseOperatorSpec, f: GridFunction) -> GridFunction:
    """``sum_Q |b - b_Q|^(m-h) |Q|^(alpha/n) <|f (b - b_Q)^h|>_Q chi_Q``.

    ``b_Q`` is the mean of ``b`` over the part of ``Q`` inside the box.
    """
    b = spec.b
    terms = _commutator_terms(spec.family, spec.alpha, spec.m, b.flat, f.flat, f.h, f.n)
    return f.with_values(terms[spec.h])


def weighted_sparse_iterate(S: SparseFamily, eta: Weight | GridFunction, j: int, f: GridFunction) -> GridFunction:
    """``j``-fold composition of ``g -> A_S(g) eta``."""
    if j < 1:
        raise ValueError("j must be >= 1")
    ev = eta.w.flat if isinstance(eta, Weight) else eta.flat
    g = f
    for _ in range(j):
        g = g.with_values(sparse_avg(S, g).flat * ev)
    return g


def cz_stop_cubes(E: np.ndarray, Q0: DyadicCube, lam: float) -> list[DyadicCube]:
    """Maximal reference-lattice subcubes of ``Q0`` where the density of ``E`` exceeds ``lam``."""
    mask = np.asarray(E, dtype=bool).reshape(-1)
    avg0 = mask[Q0.cells()].mean()
    if avg0 > lam:
        raise ValueError(f"average of chi_E on Q0 is {avg0}, above lambda = {lam}")
    out = []
    stack = [Q0]
    max_level = Q0.lattice.max_level
    while stack:
        Q = stack.pop()
        if Q.level >= max_level:
            continue
        for P in children(Q):
            cells = P.cells()
            hits = int(mask[cells].sum())
            if hits == 0:
                continue
            if hits > lam * cells.size:
                out.append(P)
            else:
                stack.append(P)
    out.sort(key=lambda P: P.lo)
    return out


@dataclass(frozen=True)
class CubeStep:
    """Record of one active cube of the recursion."""

    cube: DyadicCube
    cover: DyadicCube
    C: float
    exceptional: int
    budget: int
    stop_cubes: tuple[DyadicCube, ...]
    witness: int
    leaf: bool = False


@dataclass
class DominationReport:
    families: list[SparseFamily]
    constant: float
    adaptive_constants: list[float]
    base_family: SparseFamily
    steps: list[CubeStep] = field(default_factory=list)
    lhs: np.ndarray | None = None
    rhs: np.ndarray | None = None

    @property
    def max_adaptive_C(self) -> float:
        return max(self.adaptive_constants, default=0.0)

    @property
    def family_sizes(self) -> list[int]:
        return [len(S) for S in self.families]

    def certificates(self):
        return [verify_sparse(S) for S in self.families]


def build_sparse_domination(
    f: GridFunction,
    b: GridFunction,
    alpha: float,
    m: int,
    depth: int | None = None,
    rule: str = "exact",
    zero_tol: float = 1e-14,
    c_min: float = 0.0,
) -> DominationReport:
    """Build the 1/2-sparse family, map it to the shifted lattices, measure the constant.

    At each active cube ``Q`` the exceptional set is where the local grand
    maximal function of ``(b - b_R)^h f`` exceeds ``C |3Q|^(alpha/n)
    <|(b - b_R)^h f|>_{3Q}`` for some ``h``, with ``R`` the covering cube of
    ``3Q`` and ``C`` the smallest power of 2 (any integer exponent, at least
    ``c_min``) keeping the set within ``|Q| / 2^(n+2)`` cells, or 0 when all
    positive ratios fit.  Cubes at level ``depth`` are leaves.
    """
    if not b.same_grid(f):
        raise ValueError("b and f live on different grids")
    n, N, h = f.n, f.N, f.h
    D = base_lattice(f.box, N)
    lattices = shifted_lattices(D)
    leaf = D.max_level if depth is None else min(depth, D.max_level)
    K = frac_kernel(alpha, f.box, N, rule)
    fv = np.ascontiguousarray(f.flat)
    bv = np.ascontiguousarray(b.flat)
    families = [SparseFamily(1.0 / (2 * 9**n)) for _ in lattices]
    F = SparseFamily(0.5)
    steps: list[CubeStep] = []
    adaptive: list[float] = []

    if not np.any(fv):
        return DominationReport(families, 0.0, adaptive, F, steps, np.zeros(f.size), np.zeros(f.size))

    root = D.cube(0, (0,) * n)
    stack = [root]
    lam = 2.0 ** -(n + 1)
    while stack:
        Q = stack.pop()
        T = dilate3(Q)
        _, R = cover_cube(T, lattices)
        Qc = Q.cells()
        if Q.level >= leaf:
            F.add(Q, Qc)
            families[R.j].add(R, Qc)
            steps.append(CubeStep(Q, R, 0.0, 0, 0, (), Qc.size, leaf=True))
            continue
        bR = bv[R.cells()].mean()
        Tc = T.cells()
        vol3 = (T.size * h) ** n
        ratio = np.zeros(Qc.size)
        for hh in range(m + 1):
            g = np.ascontiguousarray((bv - bR) ** hh * fv)
            thr = vol3 ** (alpha / n) * np.abs(g[Tc]).sum() * h**n / vol3
            if thr == 0:
                continue
            M = _local_grand_max_flat(K, g, Q)[Qc]
            ratio = np.maximum(ratio, M / thr)
        budget = Qc.size // 2 ** (n + 2)
        C = _smallest_power_of_two(ratio, budget, c_min)
        adaptive.append(C)
        mask = np.zeros(f.size, dtype=bool)
        exc = Qc[ratio > C]
        mask[exc] = True
        Ps = cz_stop_cubes(mask, Q, lam)
        covered = np.concatenate([P.cells() for P in Ps]) if Ps else np.zeros(0, dtype=np.int64)
        E_Q = np.setdiff1d(Qc, covered)
        F.add(Q, E_Q)
        families[R.j].add(R, E_Q)
        steps.append(CubeStep(Q, R, C, int(exc.size), budget, tuple(Ps), int(E_Q.size)))
        stack.extend(reversed(Ps))

    lhs = np.abs(iterated_commutator(b, m, f, alpha, rule).flat)
    rhs = np.zeros(f.size)
    for S in families:
        if len(S):
            terms = _commutator_terms(S, alpha, m, bv, fv, h, n)
            for hh in range(m + 1):
                rhs += math.comb(m, hh) * terms[hh]
    constant = _pointwise_constant(lhs, rhs, zero_tol * np.max(np.abs(fv)))
    return DominationReport(families, constant, adaptive, F, steps, lhs, rhs)


def _smallest_power_of_two(ratio: np.ndarray, budget: int, c_min: float = 0.0) -> float:
    # smallest C = 2^k (k any integer, C >= c_min) with #{ratio > C} <= budget
    r = np.sort(ratio)[::-1]
    crit = float(r[budget]) if budget < r.size else 0.0
    if crit <= 0:
        return c_min
    C = 2.0 ** math.ceil(math.log2(crit))
    if C < crit:
        C *= 2.0
    return max(C, c_min)


def _pointwise_constant(lhs: np.ndarray, rhs: np.ndarray, tol: float) -> float:
    pos = rhs > 0
    if np.any(~pos & (lhs >= tol)):
        return math.inf
    if not np.any(pos):
        return 0.0
    return float(np.max(lhs[pos] / rhs[pos]))
