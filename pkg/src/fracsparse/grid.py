"""Uniform cell grids, midpoint quadrature and weighted Lebesgue norms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

__all__ = [
    "Box",
    "GridFunction",
    "ExponentSet",
    "sample",
    "integrate",
    "lp_weighted_norm",
    "dual_exponent",
    "sobolev_q",
    "powlog_mean",
    "abs_powlog_cell_means",
]


def _is_pow2(N: int) -> bool:
    return N >= 1 and (N & (N - 1)) == 0


@dataclass(frozen=True)
class Box:
    """Axis-aligned cube ``lo + [0, side)^n``."""

    lo: tuple[float, ...]
    side: float

    def __post_init__(self) -> None:
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        object.__setattr__(self, "lo", lo)
        if not self.side > 0:
            raise ValueError(f"box side must be positive, got {self.side}")
        if len(lo) not in (1, 2):
            raise ValueError(f"only dimensions 1 and 2 are supported, got {len(lo)}")

    @property
    def n(self) -> int:
        return len(self.lo)

    @property
    def hi(self) -> tuple[float, ...]:
        return tuple(v + self.side for v in self.lo)

    @property
    def volume(self) -> float:
        return self.side**self.n

    @classmethod
    def interval(cls, a: float, b: float) -> "Box":
        return cls((a,), b - a)

    def contains(self, other: "Box") -> bool:
        return all(
            a <= c and c + other.side <= a + self.side
            for a, c in zip(self.lo, other.lo)
        )


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Piecewise constant function on ``N^n`` equal cells of a box.

    ``values`` has shape ``(N,) * n``; the flat (row-major) index of a cell is
    the index used by every cell set in the package.
    """

    box: Box
    N: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if not _is_pow2(self.N) or self.N < 2:
            raise ValueError(f"N must be a power of 2 and >= 2, got {self.N}")
        v = np.array(self.values, dtype=float)
        shape = (self.N,) * self.box.n
        if v.size != self.N**self.box.n:
            raise ValueError(f"expected {self.N ** self.box.n} values, got {v.size}")
        v = v.reshape(shape)
        if not np.all(np.isfinite(v)):
            bad = int(np.flatnonzero(~np.isfinite(v.ravel()))[0])
            raise ValueError(f"non-finite value at cell {bad}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.box.n

    @property
    def h(self) -> float:
        return self.box.side / self.N

    @property
    def size(self) -> int:
        return self.N**self.n

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def axis_midpoints(self) -> np.ndarray:
        return self.box.lo[0] + self.h * (np.arange(self.N) + 0.5)

    def midpoints(self) -> tuple[np.ndarray, ...]:
        axes = [lo + self.h * (np.arange(self.N) + 0.5) for lo in self.box.lo]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.box, self.N, values)

    def same_grid(self, other: "GridFunction") -> bool:
        return self.box == other.box and self.N == other.N

    def at(self, x: float | np.ndarray) -> np.ndarray:
        """Linear interpolation between cell midpoints (n=1 only)."""
        if self.n != 1:
            raise ValueError("point evaluation is implemented for n=1")
        return np.interp(x, self.axis_midpoints(), self.values)

    # serialization

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("# box_lo,box_side,n,N\n")
            lo = ";".join(repr(v) for v in self.box.lo)
            fh.write(f"# {lo},{self.box.side!r},{self.n},{self.N}\n")
            for v in self.flat:
                fh.write(f"{v:.17g}\n")

    @classmethod
    def from_csv(cls, path) -> "GridFunction":
        with open(path) as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
        meta = None
        vals = []
        for ln in lines:
            if ln.startswith("#"):
                body = ln.lstrip("#").strip()
                if body and body[0] in "-+.0123456789":
                    meta = body
                continue
            vals.append(float(ln))
        if meta is None:
            raise ValueError(f"{path}: missing '# box_lo,box_side,n,N' metadata line")
        lo_s, side_s, n_s, N_s = meta.split(",")
        lo = tuple(float(t) for t in lo_s.split(";"))
        if len(lo) != int(n_s):
            raise ValueError(f"{path}: box_lo has {len(lo)} entries, n = {n_s}")
        return cls(Box(lo, float(side_s)), int(N_s), np.array(vals))


@dataclass(frozen=True)
class ExponentSet:
    """Exponents ``(n, alpha, p, m)``; ``q`` is always derived from them."""

    n: int
    alpha: float
    p: float
    m: int = 0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0 < self.alpha < self.n:
            raise ValueError(f"alpha must lie in (0, n), got {self.alpha}")
        if not 1 < self.p < self.n / self.alpha:
            raise ValueError(f"p must lie in (1, n/alpha), got {self.p}")
        if self.m < 0:
            raise ValueError("m must be >= 0")

    @property
    def q(self) -> float:
        return sobolev_q(self.n, self.alpha, self.p)

    @property
    def p_dual(self) -> float:
        return dual_exponent(self.p)

    @property
    def q_dual(self) -> float:
        return dual_exponent(self.q)

    def fraction(self, name: str) -> Fraction:
        """Exact rational value of ``alpha``, ``p``, ``q``, ``p_dual`` or ``q_dual``."""
        a = Fraction(self.alpha).limit_denominator(10**6)
        p = Fraction(self.p).limit_denominator(10**6)
        q = 1 / (1 / p - a / self.n)
        table = {
            "alpha": a,
            "p": p,
            "q": q,
            "p_dual": p / (p - 1),
            "q_dual": q / (q - 1),
        }
        return table[name]


def dual_exponent(p: float) -> float:
    if not p > 1:
        raise ValueError(f"dual exponent needs p > 1, got {p}")
    return p / (p - 1)


def sobolev_q(n: int, alpha: float, p: float) -> float:
    if not 1 < p < n / alpha:
        raise ValueError(f"need 1 < p < n/alpha, got p={p}, n/alpha={n / alpha}")
    return 1.0 / (1.0 / p - alpha / n)


def sample(expr: Callable[..., np.ndarray], box: Box, N: int) -> GridFunction:
    """Evaluate ``expr`` at the cell midpoints (one coordinate array per axis)."""
    if not _is_pow2(N) or N < 2:
        raise ValueError(f"N must be a power of 2 and >= 2, got {N}")
    h = box.side / N
    axes = [lo + h * (np.arange(N) + 0.5) for lo in box.lo]
    coords = np.meshgrid(*axes, indexing="ij")
    with np.errstate(all="ignore"):
        vals = np.broadcast_to(np.asarray(expr(*coords), dtype=float), coords[0].shape)
    bad = np.flatnonzero(~np.isfinite(vals.ravel()))
    if bad.size:
        raise ValueError(f"non-finite sample at cell {int(bad[0])}")
    return GridFunction(box, N, vals.copy())


def integrate(f: GridFunction, region: Iterable[int] | np.ndarray | None = None) -> float:
    """Midpoint rule over a set of flat cell indices (all cells if omitted)."""
    hn = f.h**f.n
    if region is None:
        return float(f.flat.sum() * hn)
    idx = np.asarray(list(region) if not isinstance(region, np.ndarray) else region)
    if idx.dtype == bool:
        return float(f.flat[idx.reshape(-1)].sum() * hn)
    idx = idx.astype(np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= f.size):
        raise ValueError("region contains cells outside the grid")
    return float(f.flat[idx].sum() * hn)


def lp_weighted_norm(f: GridFunction, p: float, w: GridFunction | None = None) -> float:
    """``(sum |f|^p w^p h^n)^(1/p)``; ``w=None`` means the unit weight."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    a = np.abs(f.flat)
    if w is not None:
        if not f.same_grid(w):
            raise ValueError("f and w live on different grids")
        if np.any(w.flat <= 0):
            raise ValueError("weight must be positive")
        a = a * w.flat
    return float((np.sum(a**p) * f.h**f.n) ** (1.0 / p))


# singular cell moments of |y|^c log^k |y|

_GL_NODES, _GL_WEIGHTS = leggauss(12)


def _int_from_zero(b: np.ndarray, c: float, k: int) -> np.ndarray:
    # closed form of int_0^b y^c log^k y dy, c > -1
    s = c + 1.0
    lb = np.log(b)
    tot = np.zeros_like(b)
    for j in range(k + 1):
        tot += (-1) ** j * (math.factorial(k) / math.factorial(k - j)) * lb ** (k - j) / s ** (j + 1)
    return b**s * tot


def powlog_mean(lo: np.ndarray, hi: np.ndarray, c: float, k: int = 0) -> np.ndarray:
    """Mean of ``y^c log^k y`` over ``[lo, hi]`` with ``0 <= lo < hi``.

    Intervals starting at 0 use the closed-form antiderivative; for
    ``c <= -1`` the mean of ``y^c`` there is ``inf``.  The other intervals
    use a 12-point Gauss-Legendre rule.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    out = np.empty(lo.shape)
    z = lo == 0
    if np.any(z):
        if c > -1:
            out[z] = _int_from_zero(hi[z], c, k) / hi[z]
        elif k == 0:
            out[z] = np.inf
        else:
            raise ValueError(f"y^{c} log^{k} y is not integrable at 0")
    nz = ~z
    if np.any(nz):
        a, b = lo[nz], hi[nz]
        y = 0.5 * (b - a)[:, None] * _GL_NODES[None, :] + 0.5 * (a + b)[:, None]
        out[nz] = 0.5 * (np.log(y) ** k * y**c) @ _GL_WEIGHTS
    return out


def abs_powlog_cell_means(box: Box, N: int, c: float, k: int = 0, center: float = 0.0) -> np.ndarray:
    """Cell means of ``|x - center|^c log^k |x - center|`` on a 1D grid."""
    if box.n != 1:
        raise ValueError("cell moments are implemented for n=1")
    h = box.side / N
    edges = box.lo[0] - center + h * np.arange(N + 1)
    a, b = edges[:-1], edges[1:]
    out = np.empty(N)
    left = b <= 0
    right = a >= 0
    out[left] = powlog_mean(-b[left], -a[left], c, k)
    out[right] = powlog_mean(a[right], b[right], c, k)
    mid = ~(left | right)
    if np.any(mid):
        # cell straddles the singularity: split at 0
        am, bm = -a[mid], b[mid]
        zero = np.zeros_like(am)
        out[mid] = (powlog_mean(zero, am, c, k) * am + powlog_mean(zero, bm, c, k) * bm) / (am + bm)
    return out


def _check_same(fs: Sequence[GridFunction]) -> None:
    for g in fs[1:]:
        if not fs[0].same_grid(g):
            raise ValueError("grid functions live on different grids")
