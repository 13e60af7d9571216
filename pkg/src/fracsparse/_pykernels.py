"""Pure numpy versions of the compiled kernels (same signatures)."""

from __future__ import annotations

import numpy as np

_CHUNK = 256


def _full(krow: np.ndarray, n: int) -> np.ndarray:
    # kfull[t] = krow[|t - (n - 1)|] for t in [0, 2n - 1)
    k = krow[:n]
    return np.concatenate([k[::-1], k[1:]])


def toeplitz_apply(krow, f):
    f = np.asarray(f, dtype=float)
    N = f.size
    return np.convolve(f, _full(np.asarray(krow), N))[N - 1 : 2 * N - 1].copy()


def commutator_apply(krow, b, f, m):
    krow = np.asarray(krow)
    b = np.asarray(b, dtype=float)
    f = np.asarray(f, dtype=float)
    N = f.size
    out = np.empty(N)
    cols = np.arange(N)
    for s in range(0, N, _CHUNK):
        rows = np.arange(s, min(s + _CHUNK, N))
        K = krow[np.abs(rows[:, None] - cols[None, :])]
        D = b[rows, None] - b[None, :]
        out[rows] = (D**m * K) @ f
    return out


def window_apply(krow, g, wlo, whi, olo, ohi):
    krow = np.asarray(krow)
    rows = np.arange(olo, ohi)
    cols = np.arange(wlo, whi)
    if rows.size == 0:
        return np.zeros(0)
    if cols.size == 0:
        return np.zeros(rows.size)
    return krow[np.abs(rows[:, None] - cols[None, :])] @ np.asarray(g, dtype=float)[wlo:whi]


def truncated_max(krow, g, u, qlo, qsize, wlo, whi):
    out = np.zeros(len(qlo))
    for c in range(len(qlo)):
        a, s = int(qlo[c]), int(qsize[c])
        v = window_apply(krow, g, int(wlo[c]), int(whi[c]), a, a + s)
        out[c] = np.max(np.abs(np.asarray(u)[a : a + s] - v))
    return out
