"""Weights, Muckenhoupt-type constants over cube families, BMO norms, medians."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dyadic import CubeFamily, DyadicCube
from .grid import Box, GridFunction, abs_powlog_cell_means, sample

__all__ = [
    "Weight",
    "PowerWeight",
    "ConstantCertificate",
    "ap_constant",
    "apq_constant",
    "ainfty_constant",
    "bmo_nu_norm",
    "median",
    "oscillation",
    "power_weight",
]


@dataclass(frozen=True, eq=False)
class Weight:
    """Positive weight given by its cell values.

    ``power_mean(s)`` returns the cell averages of ``w^s``; every constant is
    computed from these so that subclasses with exact moments plug in.
    """

    w: GridFunction

    def __post_init__(self) -> None:
        if np.any(self.w.flat <= 0):
            raise ValueError("weights must be positive at every cell")

    @property
    def grid(self) -> GridFunction:
        return self.w

    def power_mean(self, s: float) -> np.ndarray:
        return self.w.flat**s

    def power(self, s: float) -> "Weight":
        return Weight(self.w.with_values(self.w.values**s))

    def inverse(self) -> "Weight":
        return self.power(-1.0)

    def mass(self, cells: np.ndarray) -> float:
        return float(self.power_mean(1.0)[cells].sum() * self.w.h**self.w.n)


@dataclass(frozen=True, eq=False)
class PowerWeight(Weight):
    """``|x - center|^exponent`` with exact cell means of its powers (n=1)."""

    exponent: float = 0.0
    center: float = 0.0

    @classmethod
    def make(cls, exponent: float, box: Box, N: int, center: float = 0.0) -> "PowerWeight":
        if box.n == 1:
            w = sample(lambda x: np.abs(x - center) ** exponent, box, N)
        else:
            w = sample(lambda x, y: np.hypot(x - center, y - center) ** exponent, box, N)
        return cls(w, exponent, center)

    def power_mean(self, s: float) -> np.ndarray:
        if self.w.n != 1:
            return self.w.flat**s
        return abs_powlog_cell_means(self.w.box, self.w.N, self.exponent * s, 0, self.center)

    def power(self, s: float) -> "PowerWeight":
        return PowerWeight(self.w.with_values(self.w.values**s), self.exponent * s, self.center)


@dataclass(frozen=True)
class ConstantCertificate:
    value: float
    cube: DyadicCube
    name: str = ""


def _certify(vals: np.ndarray, F: CubeFamily, name: str) -> ConstantCertificate:
    i = int(np.argmax(vals))  # first maximizer in family order
    return ConstantCertificate(float(vals[i]), F.cubes[i], name)


def ap_constant(w: Weight, p: float, F: CubeFamily) -> ConstantCertificate:
    """``max_Q <w>_Q <w^(-1/(p-1))>_Q^(p-1)``."""
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    a = F.averages(w.power_mean(1.0))
    b = F.averages(w.power_mean(-1.0 / (p - 1.0)))
    return _certify(a * b ** (p - 1.0), F, f"A_{p:g}")


def apq_constant(w: Weight, p: float, q: float, F: CubeFamily) -> ConstantCertificate:
    """``max_Q <w^q>_Q <w^(-p')>_Q^(q/p')``."""
    if not 1 < p < q:
        raise ValueError(f"need 1 < p < q, got p={p}, q={q}")
    pd = p / (p - 1.0)
    a = F.averages(w.power_mean(q))
    b = F.averages(w.power_mean(-pd))
    return _certify(a * b ** (q / pd), F, f"A_{p:g},{q:g}")


def ainfty_constant(w: Weight, F: CubeFamily) -> ConstantCertificate:
    """Fujii-Wilson constant ``max_Q w(Q)^-1 int_Q M(w chi_Q)``.

    The maximal function at a cell of ``Q`` is the largest ``<w>_P`` over
    family cubes ``P`` with the cell in ``P`` and ``P`` inside ``Q``.
    """
    wm = w.power_mean(1.0)
    avg = F.averages(wm)
    lo, size = F.lo, F.size
    vals = np.empty(len(F))
    N = F.N
    for qi, Q in enumerate(F.cubes):
        inside = np.all((lo >= lo[qi]) & (lo + size[:, None] <= lo[qi] + size[qi]), axis=1)
        M = np.zeros(N**F.n)
        for ids, cells in F.buckets:
            sel = inside[ids]
            if np.any(sel):
                np.maximum.at(M, cells[sel].reshape(-1), np.repeat(avg[ids][sel], cells.shape[1]))
        qc = Q.cells()
        vals[qi] = M[qc].sum() / wm[qc].sum()
    return _certify(vals, F, "A_inf")


def bmo_nu_norm(b: GridFunction, nu: Weight, F: CubeFamily) -> ConstantCertificate:
    """``max_Q nu(Q)^-1 int_Q |b - b_Q|`` (midpoint averages)."""
    flat = b.flat
    dev = np.empty(len(F))
    for ids, cells in F.buckets:
        B = flat[cells]
        dev[ids] = np.abs(B - B.mean(axis=1, keepdims=True)).mean(axis=1)
    return _certify(dev / F.averages(nu.power_mean(1.0)), F, "BMO_nu")


def median(b: GridFunction, Q: DyadicCube) -> float:
    """Lower median of the cell values of ``b`` on ``Q``."""
    v = np.sort(b.flat[Q.cells()])
    if v.size == 0:
        raise ValueError(f"{Q} has no cells in the grid")
    return float(v[(v.size - 1) // 2])


def oscillation(b: GridFunction, Q: DyadicCube, lam: float) -> float:
    """``min_c`` of the ``ceil(lam #Q)``-th largest value of ``|b - c|`` on ``Q``.

    The minimum over all real ``c`` is the half-width of the narrowest
    window holding ``#Q - k + 1`` of the sorted values, attained at its
    center; this can be strictly smaller than the best ``c`` among the cell
    values themselves.
    """
    v = np.sort(b.flat[Q.cells()])
    n = v.size
    if not lam * n >= 1:
        raise ValueError(f"lambda |Q| = {lam * n} cells is below one cell")
    k = math.ceil(lam * n - 1e-12)
    M = n - k + 1
    return float(np.min(v[M - 1 :] - v[: n - M + 1]) / 2)


def power_weight(delta: float, p_dual: float, box: Box, N: int) -> PowerWeight:
    """``|x|^((n - delta)/p')`` sampled at midpoints, with exact cell moments."""
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return PowerWeight.make((box.n - delta) / p_dual, box, N)
