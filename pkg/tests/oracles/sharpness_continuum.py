"""Continuum reference values for the sharpness ratio R(delta).

Independent of the package: nested adaptive quadrature of

    T f(x) = int (log|x| - log|y|)^m |x - y|^(alpha-1) |y|^(delta-1) chi_(-1,1)(y) dy

with x = X, y = X t, written as X^(alpha+delta-1) G(1/X), and of

    R = (int |T f|^q |x|^((1-delta) q/p') dx)^(1/q) / (int_{-1}^1 |x|^(delta-1))^(1/p).

Run as a script to print the values frozen in test_experiments.py.
"""

import math
import warnings

import numpy as np
from scipy.integrate import quad
from scipy.special import gamma, gammaincc

warnings.filterwarnings("ignore")

ALPHA, P, Q, PD = 0.5, 4 / 3, 4.0, 4.0


def G(X, m, d):
    # int_{-X}^{X} (-log|t|)^m |1-t|^(alpha-1) |t|^(delta-1) dt
    f1 = lambda u: math.exp(-d * u) * u**m * (1 - math.exp(-u)) ** (ALPHA - 1)
    u0 = max(0.0, -math.log(X))
    I1 = quad(f1, u0, u0 + 1, limit=200)[0] + quad(f1, u0 + 1, np.inf, limit=400)[0]
    I2 = 0.0
    if X > 1:
        f2 = lambda t: (-math.log(t)) ** m * (t - 1) ** (ALPHA - 1) * t ** (d - 1)
        I2 = quad(f2, 1, 2, limit=200)[0] + (quad(f2, 2, X, limit=400)[0] if X > 2 else 0.0)
    f3 = lambda u: math.exp(-d * u) * u**m * (1 + math.exp(-u)) ** (ALPHA - 1)
    I3 = quad(f3, u0, np.inf, limit=400)[0]
    if X > 1:
        f4 = lambda s: (-math.log(s)) ** m * (1 + s) ** (ALPHA - 1) * s ** (d - 1)
        I3 += quad(f4, 1, X, limit=400)[0]
    return I1 + I2 + I3


def G_small(u, m, d):
    # X = e^u -> 0: both half-lines contribute int_{-u}^inf t^m e^{-d t} dt
    return 2 * gammaincc(m + 1, -d * u) * gamma(m + 1) / d ** (m + 1)


def R(m, d):
    s = d * Q / P
    U = 30.0
    # x = e^{-u}: |T f|^q |x|^{w q} dx becomes e^{-s u} |G|^q du
    f = lambda u: math.exp(-s * u) * abs(G(math.exp(u), m, d)) ** Q
    total = quad(f, -math.log(4), U, limit=200)[0]
    total += abs(G(math.exp(U), m, d)) ** Q * math.exp(-s * U) / s
    g = lambda u: math.exp(-s * u) * abs(G(math.exp(u), m, d) if u > -8 else G_small(u, m, d)) ** Q
    total += quad(g, -8, -math.log(4), limit=200)[0]
    total += quad(g, -40 / (d * Q / PD), -8, limit=400)[0]
    return (2 * total) ** (1 / Q) / (2 / d) ** (1 / P)


if __name__ == "__main__":
    ds = [2.0**-k for k in range(3, 9)]
    for m in (0, 1, 2):
        print(m, [R(m, d) for d in ds])
