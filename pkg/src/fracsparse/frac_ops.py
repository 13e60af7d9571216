"""Fractional integral, fractional/grand maximal operators and iterated commutators."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.signal import convolve2d

from . import kernels
from .dyadic import CubeFamily, DyadicCube, dilate3, subcubes
from .grid import Box, GridFunction

__all__ = [
    "FracKernelMatrix",
    "frac_kernel",
    "frac_integral",
    "frac_integral_at",
    "frac_maximal",
    "grand_maximal_truncated",
    "local_grand_maximal",
    "iterated_commutator",
    "iterated_commutator_inductive",
    "commutator_binomial",
    "commutator_from_moments",
]

DENSE_LIMIT_1D = 2**9


def _krow_exact(N: int, h: float, alpha: float) -> np.ndarray:
    # int over the cell d cells away of |t|^(alpha-1), closed form
    d = np.arange(N) * h
    lo = np.maximum(d - h / 2, 0.0)
    hi = d + h / 2
    k = (hi**alpha - lo**alpha) / alpha
    k[0] = 2 * (h / 2) ** alpha / alpha
    return k


def _gauss_sub(a: float, b: float, sub: int = 4, order: int = 4) -> tuple[np.ndarray, np.ndarray]:
    x, w = leggauss(order)
    edges = np.linspace(a, b, sub + 1)
    lo, hi = edges[:-1, None], edges[1:, None]
    pts = 0.5 * (hi - lo) * x[None, :] + 0.5 * (hi + lo)
    wts = 0.5 * (hi - lo) * w[None, :]
    return pts.ravel(), wts.ravel()


def _krow_three_tier(N: int, h: float, alpha: float) -> np.ndarray:
    d = np.arange(N, dtype=float) * h
    k = np.empty(N)
    k[0] = 2 * (h / 2) ** alpha / alpha
    k[1:] = d[1:] ** (alpha - 1) * h
    if N > 1:
        t, w = _gauss_sub(h / 2, 3 * h / 2)
        k[1] = np.sum(w * t ** (alpha - 1))
    return k


def _ktable_2d(N: int, h: float, alpha: float) -> np.ndarray:
    a = np.arange(N, dtype=float)
    dist = h * np.sqrt(a[:, None] ** 2 + a[None, :] ** 2)
    with np.errstate(divide="ignore"):
        tab = dist ** (alpha - 2) * h * h
    rho = h / math.sqrt(math.pi)
    tab[0, 0] = 2 * math.pi * rho**alpha / alpha
    t, w = _gauss_sub(-h / 2, h / 2)
    for i, j in ((0, 1), (1, 0), (1, 1)):
        if i < N and j < N:
            X = i * h + t[:, None]
            Y = j * h + t[None, :]
            tab[i, j] = np.sum(w[:, None] * w[None, :] * np.hypot(X, Y) ** (alpha - 2))
    return tab


@dataclass(frozen=True, eq=False)
class FracKernelMatrix:
    """Cell-to-cell weights of ``|x - y|^(alpha - n)``.

    ``rule="exact"`` (n=1 default) integrates the kernel over every source
    cell in closed form.  ``rule="three_tier"`` uses the closed-form self
    cell, subdivided 4-point Gauss for nearest neighbours and the midpoint
    rule beyond; it is the only rule for n=2, where the self cell is the
    equal-area disk.
    """

    alpha: float
    box: Box
    N: int
    rule: str = "exact"

    def __post_init__(self) -> None:
        if not 0 < self.alpha < self.box.n:
            raise ValueError(f"alpha must lie in (0, n), got {self.alpha}")
        if self.rule not in ("exact", "three_tier"):
            raise ValueError(f"unknown kernel rule {self.rule!r}")
        if self.box.n == 2 and self.rule == "exact":
            object.__setattr__(self, "rule", "three_tier")

    @property
    def n(self) -> int:
        return self.box.n

    @property
    def h(self) -> float:
        return self.box.side / self.N

    @cached_property
    def krow(self) -> np.ndarray:
        """1D: weight between cells ``d`` apart; 2D: table over ``(|di|, |dj|)``."""
        if self.n == 2:
            tab = _ktable_2d(self.N, self.h, self.alpha)
        elif self.rule == "exact":
            tab = _krow_exact(self.N, self.h, self.alpha)
        else:
            tab = _krow_three_tier(self.N, self.h, self.alpha)
        tab.setflags(write=False)
        return tab

    @cached_property
    def _full2d(self) -> np.ndarray:
        N = self.N
        idx = np.abs(np.arange(-(N - 1), N))
        return self.krow[idx[:, None], idx[None, :]]

    def matrix(self) -> np.ndarray:
        """Dense ``N^n x N^n`` matrix (row = target cell, column = source cell)."""
        if self.n == 1:
            if self.N > DENSE_LIMIT_1D:
                raise ValueError(f"dense matrix only for N <= {DENSE_LIMIT_1D}")
            i = np.arange(self.N)
            return self.krow[np.abs(i[:, None] - i[None, :])]
        N = self.N
        ii, jj = np.divmod(np.arange(N * N), N)
        return self.krow[np.abs(ii[:, None] - ii[None, :]), np.abs(jj[:, None] - jj[None, :])]

    def apply(self, f: np.ndarray) -> np.ndarray:
        f = np.ascontiguousarray(f, dtype=float).reshape(-1)
        if self.n == 1:
            return kernels.toeplitz_apply(self.krow, f)
        N = self.N
        full = convolve2d(f.reshape(N, N), self._full2d, mode="full")
        return full[N - 1 : 2 * N - 1, N - 1 : 2 * N - 1].reshape(-1)

    def apply_window(self, g: np.ndarray, source: np.ndarray, target: np.ndarray) -> np.ndarray:
        """``sum_{j in source} K[i, j] g[j]`` for flat cells ``i in target``."""
        g = np.asarray(g, dtype=float).reshape(-1)
        if self.n == 1 and source.size and _contiguous(source) and _contiguous(target):
            return kernels.window_apply(
                self.krow, g, int(source[0]), int(source[-1]) + 1, int(target[0]), int(target[-1]) + 1
            )
        if source.size == 0:
            return np.zeros(target.size)
        return self._block(target, source) @ g[source]

    def _block(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        if self.n == 1:
            return self.krow[np.abs(rows[:, None] - cols[None, :])]
        ri, rj = np.divmod(rows, self.N)
        ci, cj = np.divmod(cols, self.N)
        return self.krow[np.abs(ri[:, None] - ci[None, :]), np.abs(rj[:, None] - cj[None, :])]


def _contiguous(a: np.ndarray) -> bool:
    return a.size > 0 and int(a[-1]) - int(a[0]) + 1 == a.size


@lru_cache(maxsize=32)
def _cached_kernel(alpha: float, box: Box, N: int, rule: str) -> FracKernelMatrix:
    return FracKernelMatrix(alpha, box, N, rule)


def frac_kernel(alpha: float, box: Box, N: int, rule: str = "exact") -> FracKernelMatrix:
    return _cached_kernel(float(alpha), box, N, rule)


def frac_integral(f: GridFunction, alpha: float, rule: str = "exact") -> GridFunction:
    K = frac_kernel(alpha, f.box, f.N, rule)
    return f.with_values(K.apply(f.flat))


def frac_integral_at(
    moments: np.ndarray, alpha: float, box: Box, N: int, x: np.ndarray | float
) -> np.ndarray:
    """Point values ``sum_j moments_j int_{cell j} |x - y|^(alpha-1) dy`` for n=1.

    ``moments`` are cell averages of the density; ``x`` may lie anywhere,
    including outside the box.
    """
    if box.n != 1:
        raise ValueError("point evaluation is implemented for n=1")
    h = box.side / N
    edges = box.lo[0] + h * np.arange(N + 1)
    lo, hi = edges[:-1], edges[1:]
    x = np.atleast_1d(np.asarray(x, dtype=float))
    dl = x[:, None] - lo[None, :]
    dh = hi[None, :] - x[:, None]
    inside = (dl > 0) & (dh > 0)
    w = np.where(
        inside,
        (np.abs(dl) ** alpha + np.abs(dh) ** alpha) / alpha,
        np.abs(np.abs(dh) ** alpha - np.abs(dl) ** alpha) / alpha,
    )
    return w @ np.asarray(moments, dtype=float)


def frac_maximal(f: GridFunction, alpha: float, F: CubeFamily) -> GridFunction:
    """Cellwise max over cubes of ``|Q|^(alpha/n - 1) int_Q |f|``."""
    if not 0 <= alpha < f.n:
        raise ValueError(f"alpha must lie in [0, n), got {alpha}")
    avg = F.averages(np.abs(f.flat))
    vol = (F.size * f.h) ** f.n
    return f.with_values(F.scatter_max(vol ** (alpha / f.n) * avg))


def _truncated_cube_max(
    K: FracKernelMatrix,
    g: np.ndarray,
    u: np.ndarray,
    cubes: Sequence[DyadicCube],
    source: np.ndarray,
) -> np.ndarray:
    # per cube Q: max over cells of Q of |u - I(g chi_{3Q clipped})|, where u is
    # I(g chi_source); cubes whose window is the whole source get an exact 0
    if K.n == 1:
        qlo = np.array([Q.lo[0] for Q in cubes], dtype=np.int64)
        qsz = np.array([Q.size for Q in cubes], dtype=np.int64)
        wlo = np.maximum(qlo - qsz, 0)
        whi = np.minimum(qlo + 2 * qsz, K.N)
        out = kernels.truncated_max(K.krow, g, u, qlo, qsz, wlo, whi)
        out[(wlo == source[0]) & (whi == source[-1] + 1)] = 0.0
        return out
    out = np.empty(len(cubes))
    for c, Q in enumerate(cubes):
        tgt = Q.cells()
        win = dilate3(Q).cells()
        if np.array_equal(win, source):
            out[c] = 0.0
            continue
        v = K.apply_window(g, win, tgt)
        out[c] = np.max(np.abs(u[tgt] - v))
    return out


def grand_maximal_truncated(
    f: GridFunction, alpha: float, F: CubeFamily, rule: str = "exact"
) -> GridFunction:
    """Cellwise max over cubes Q of the cell max on Q of ``|I(f chi_{outside 3Q})|``."""
    K = frac_kernel(alpha, f.box, f.N, rule)
    g = np.ascontiguousarray(f.flat)
    u = K.apply(g)
    per_cube = _truncated_cube_max(K, g, u, F.cubes, np.arange(g.size))
    return f.with_values(F.scatter_max(per_cube))


def local_grand_maximal(
    f: GridFunction, alpha: float, Q0: DyadicCube, rule: str = "exact"
) -> GridFunction:
    """Local version on ``Q0`` over its grid-dyadic subcubes; zero outside ``Q0``."""
    K = frac_kernel(alpha, f.box, f.N, rule)
    g = np.ascontiguousarray(f.flat)
    return f.with_values(_local_grand_max_flat(K, g, Q0))


def _local_grand_max_flat(K: FracKernelMatrix, g: np.ndarray, Q0: DyadicCube) -> np.ndarray:
    cells0 = Q0.cells()
    src = dilate3(Q0).cells()
    u = np.zeros(g.size)
    u[cells0] = K.apply_window(g, src, cells0)
    subs = subcubes(Q0)
    per_cube = _truncated_cube_max(K, g, u, subs, src)
    out = np.zeros(g.size)
    for Q, v in zip(subs, per_cube):
        c = Q.cells()
        out[c] = np.maximum(out[c], v)
    return out


def iterated_commutator(
    b: GridFunction, m: int, f: GridFunction, alpha: float, rule: str = "exact"
) -> GridFunction:
    """Kernel form ``sum_j (b_i - b_j)^m K_ij f_j``."""
    if m < 0:
        raise ValueError("m must be >= 0")
    if not b.same_grid(f):
        raise ValueError("b and f live on different grids")
    K = frac_kernel(alpha, f.box, f.N, rule)
    if m == 0:
        return f.with_values(K.apply(f.flat))
    if f.n == 1:
        out = kernels.commutator_apply(
            K.krow, np.ascontiguousarray(b.flat), np.ascontiguousarray(f.flat), int(m)
        )
        return f.with_values(out)
    bf = b.flat
    D = bf[:, None] - bf[None, :]
    return f.with_values((D**m * K.matrix()) @ f.flat)


def iterated_commutator_inductive(
    b: GridFunction, m: int, f: GridFunction, alpha: float, rule: str = "exact"
) -> GridFunction:
    """``T_0 = I_alpha``, ``T_m f = b T_{m-1} f - T_{m-1}(b f)``."""
    K = frac_kernel(alpha, f.box, f.N, rule)
    bf = b.flat

    def T(k: int, g: np.ndarray) -> np.ndarray:
        if k == 0:
            return K.apply(g)
        return bf * T(k - 1, g) - T(k - 1, bf * g)

    return f.with_values(T(m, np.ascontiguousarray(f.flat)))


def commutator_binomial(
    b: GridFunction, m: int, f: GridFunction, alpha: float, c: float = 0.0, rule: str = "exact"
) -> GridFunction:
    """``sum_h (-1)^h C(m,h) I((b-c)^h f) (b-c)^(m-h)``."""
    K = frac_kernel(alpha, f.box, f.N, rule)
    bc = b.flat - c
    out = np.zeros(f.size)
    for h in range(m + 1):
        out += (-1) ** h * math.comb(m, h) * K.apply(bc**h * f.flat) * bc ** (m - h)
    return f.with_values(out)


def commutator_from_moments(
    b_mid: np.ndarray, moments: Sequence[np.ndarray], K: FracKernelMatrix
) -> np.ndarray:
    """Commutator from cell averages ``moments[h]`` of ``b^h f``.

    Evaluates ``sum_h (-1)^h C(m,h) b^(m-h) I(moments[h])`` with ``m =
    len(moments) - 1``; with exact moments this integrates ``b`` inside each
    source cell instead of sampling it.
    """
    m = len(moments) - 1
    out = np.zeros(np.asarray(b_mid).size)
    for h, M in enumerate(moments):
        out += (-1) ** h * math.comb(m, h) * b_mid ** (m - h) * K.apply(M)
    return out
