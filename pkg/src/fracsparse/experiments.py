"""Scaling-law and constant experiments built on the operator and weight modules."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.integrate import quad

from .dyadic import CubeFamily, DyadicCube, base_lattice, verify_sparse
from .frac_ops import commutator_from_moments, frac_integral_at, frac_kernel, iterated_commutator
from .grid import Box, ExponentSet, GridFunction, abs_powlog_cell_means, lp_weighted_norm
from .sparse import build_sparse_domination
from .weights import (
    PowerWeight,
    Weight,
    ap_constant,
    apq_constant,
    bmo_nu_norm,
    median,
    oscillation,
    power_weight,
)

__all__ = [
    "FitReport",
    "fit_loglog",
    "KappaInputs",
    "kappa_m",
    "kappa_one_weight_exponents",
    "kappa_collapse_check",
    "SharpnessRow",
    "SharpnessResult",
    "sharpness_experiment",
    "ibp_minorant",
    "random_test_function",
    "test_functions",
    "BloomReport",
    "bloom_upper_check",
    "NecessityReport",
    "necessity_check",
    "domination_constant_report",
    "write_rows",
]


@dataclass(frozen=True)
class FitReport:
    slope: float
    intercept: float
    max_residual: float
    points: tuple[tuple[float, float], ...]


def fit_loglog(x: Sequence[float], y: Sequence[float]) -> FitReport:
    """Least-squares line through ``(log x, log y)``."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    if lx.size < 4:
        raise ValueError(f"need at least 4 points for a fit, got {lx.size}")
    slope, icpt = np.polyfit(lx, ly, 1)
    res = ly - (slope * lx + icpt)
    return FitReport(float(slope), float(icpt), float(np.max(np.abs(res))), tuple(zip(lx.tolist(), ly.tolist())))


# kappa_m


@dataclass(frozen=True)
class KappaInputs:
    exps: ExponentSet
    lam_apq: float
    mu_apq: float
    lam_p_ap: float
    mu_p_ap: float
    lam_q_aq: float
    mu_q_aq: float

    def __post_init__(self) -> None:
        for name in ("lam_apq", "mu_apq", "lam_p_ap", "mu_p_ap", "lam_q_aq", "mu_q_aq"):
            if not getattr(self, name) >= 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")

    @classmethod
    def one_weight(cls, exps: ExponentSet, K: float) -> "KappaInputs":
        """``mu = lambda`` with the extremal relations between the three constants."""
        return cls(exps, K, K, K ** (exps.p / exps.q), K ** (exps.p / exps.q), K, K)


def kappa_m(inp: KappaInputs) -> float:
    e = inp.exps
    m, n, a, p, q = e.m, e.n, e.alpha, e.p, e.q
    big = max(1.0, e.p_dual / q)
    if m == 0:
        return inp.lam_apq ** ((1 - a / n) * big)
    eq = max(1.0, 1.0 / (q - 1))
    ep = max(1.0, 1.0 / (p - 1))
    total = 0.0
    for h in range(m + 1):
        lead = (inp.lam_apq ** (h / m) * inp.mu_apq ** ((m - h) / m)) ** ((1 - a / n) * big)
        P = (inp.lam_q_aq ** ((m + h + 1) / 2) * inp.mu_q_aq ** ((m - h - 1) / 2)) ** ((m - h) / m * eq)
        Q = (inp.lam_p_ap ** ((h - 1) / 2) * inp.mu_p_ap ** (m - (h - 1) / 2)) ** (h / m * ep)
        total += math.comb(m, h) * lead * P * Q
    return total


def kappa_one_weight_exponents(exps: ExponentSet) -> list[tuple[int, Fraction]]:
    """``(C(m,h), e_h)`` with ``kappa_m = sum_h C(m,h) K^(e_h)`` when ``mu = lambda``.

    Exponents are exact rationals built from the rational values of alpha and p.
    """
    m, n = exps.m, exps.n
    a, p, q = exps.fraction("alpha"), exps.fraction("p"), exps.fraction("q")
    pd = exps.fraction("p_dual")
    big = max(Fraction(1), pd / q)
    eq = max(Fraction(1), 1 / (q - 1))
    ep = max(Fraction(1), 1 / (p - 1))
    lead = (1 - a / n) * big
    if m == 0:
        return [(1, lead)]
    out = []
    for h in range(m + 1):
        # K^{(m+h+1)/2} K^{(m-h-1)/2} = K^m for P, (K^{p/q})^{(h-1)/2 + m - (h-1)/2} for Q
        eP = Fraction(m) * Fraction(m - h, m) * eq
        eQ = (p / q) * m * Fraction(h, m) * ep
        out.append((math.comb(m, h), lead + eP + eQ))
    return out


def kappa_collapse_check(exps: ExponentSet, Ks: Sequence[float]) -> dict:
    """Check ``kappa_m <= 2^m K^((m+1-alpha/n) max(1, p'/q))`` exactly and in floating point."""
    m, n = exps.m, exps.n
    big = max(Fraction(1), exps.fraction("p_dual") / exps.fraction("q"))
    target = (m + 1 - exps.fraction("alpha") / n) * big
    terms = kappa_one_weight_exponents(exps)
    exact = sum(c for c, _ in terms) <= 2**m and all(e <= target for _, e in terms)
    worst = 0.0
    for K in Ks:
        val = kappa_m(KappaInputs.one_weight(exps, K))
        worst = max(worst, val / K ** float(target))
    return {"exact": bool(exact), "target_exponent": target, "max_ratio": worst, "c_m": 2**m}


# sharpness


@dataclass(frozen=True)
class SharpnessRow:
    delta: float
    K: float
    R: float
    numerator: float
    denominator: float
    grid_part: float
    inner_tail: float
    outer_tail: float


@dataclass(frozen=True)
class SharpnessResult:
    fit: FitReport
    weight_fit: FitReport
    theory_slope: float
    rows: tuple[SharpnessRow, ...]
    dropped: tuple[float, ...] = ()
    dual: bool = False


def _commutator_tail(
    moments: list[np.ndarray], exps: ExponentSet, box: Box, N: int, delta: float, w_exp: float
) -> float:
    """``int_{|x| > half-width} |T f|^q |x|^(w_exp q) dx`` beyond the grid.

    Up to ``2^10`` half-widths the commutator is evaluated pointwise from the
    cell moments; farther out only its multipole expansion in ``log |x|`` is
    kept.
    """
    m, a, q = exps.m, exps.alpha, exps.q
    L = box.lo[0] + box.side
    h = box.side / N
    mu = [h * float(M.sum()) for M in moments]

    def T_point(X: float) -> float:
        lx = math.log(abs(X))
        return sum(
            (-1) ** k * math.comb(m, k) * lx ** (m - k) * float(frac_integral_at(M, a, box, N, X)[0])
            for k, M in enumerate(moments)
        )

    def P(u: float) -> float:
        return sum((-1) ** k * math.comb(m, k) * u ** (m - k) * mu[k] for k in range(m + 1))

    gam = 1 + (a - 1) * q + w_exp * q
    if not gam < 0:
        raise ValueError(f"exterior tail diverges (exponent {gam}) at delta={delta}")
    U0, U1 = math.log(L), math.log(L * 2**10)
    total = 0.0
    for sgn in (1.0, -1.0):
        near = quad(lambda u: math.exp((1 + w_exp * q) * u) * abs(T_point(sgn * math.exp(u))) ** q, U0, U1, limit=200)[0]
        # v = exp(gam (u - U1)) maps [U1, inf) onto (0, 1]
        far = math.exp(gam * U1) / -gam * quad(lambda v: abs(P(U1 + math.log(v) / gam)) ** q, 0.0, 1.0, limit=400)[0]
        total += near + far
    return total


def _sharpness_point(
    exps: ExponentSet, delta: float, box: Box, N: int, r0: float
) -> tuple[float, float, float, float, float]:
    """Numerator pieces and denominator of ``R(delta)``."""
    m, a, p, q = exps.m, exps.alpha, exps.p, exps.q
    pd = exps.p_dual
    h = box.side / N
    x = box.lo[0] + h * (np.arange(N) + 0.5)
    edges = box.lo[0] + h * np.arange(N + 1)
    supp = np.maximum(np.abs(edges[:-1]), np.abs(edges[1:])) <= 1 + 1e-12
    moments = [np.where(supp, abs_powlog_cell_means(box, N, delta - 1, k), 0.0) for k in range(m + 1)]
    K = frac_kernel(a, box, N)
    Tf = commutator_from_moments(np.log(np.abs(x)), moments, K)
    w_exp = (1 - delta) / pd
    wq = abs_powlog_cell_means(box, N, w_exp * q, 0)
    dens = np.abs(Tf) ** q * wq
    if not np.all(np.isfinite(dens)):
        raise ValueError(f"non-finite commutator density at delta={delta}")
    ax = np.abs(x)
    bulk = float(dens[ax > r0].sum() * h)
    shell = float(dens[(ax > r0 / 2) & (ax <= r0)].sum() * h)
    # |Tf|^q w^q is homogeneous of degree -1 + delta q/p near 0
    rho = 2.0 ** (-delta * q / p)
    inner = shell * rho / (1 - rho)
    outer = _commutator_tail(moments, exps, box, N, delta, w_exp)
    num = (bulk + shell + inner + outer) ** (1 / q)
    # ||f||_{L^p(w^p)}^p has density |x|^(delta-1) on the unit ball
    den = float(np.sum(np.where(supp, abs_powlog_cell_means(box, N, delta - 1, 0), 0.0)) * h) ** (1 / p)
    return num, den, bulk + shell, inner, outer


def sharpness_experiment(
    n: int,
    alpha: float,
    p: float,
    m: int,
    deltas: Sequence[float],
    N: int = 2**12,
    half_width: float = 4.0,
    r0: float = 1 / 8,
    refine_check: bool = True,
    tol: float = 0.05,
) -> SharpnessResult:
    """Power-weight experiment with ``b = log|x|`` and ``f = |x|^(delta-1)`` on the unit ball.

    ``R(delta)`` is the ratio of the ``L^q(w^q)`` norm of the commutator
    over the whole line to ``||f||_{L^p(w^p)}``; the grid covers
    ``[-half_width, half_width]`` and the parts near 0 and beyond the box are
    closed analytically.  When ``p'/q < 1`` the dual exponents ``(q', p')``
    are used: the discrete operator is its own transpose up to ``(-1)^m``,
    so the same commutator serves, and the weight constant is reported for
    ``w^{-1}`` in ``A_{p,q}``.
    """
    if n != 1:
        raise ValueError("the sharpness experiment runs at n=1")
    exps = ExponentSet(n, alpha, p, m)
    if len(deltas) < 4:
        raise ValueError("need at least 4 values of delta")
    for d in deltas:
        if not 0 < d < 1:
            raise ValueError(f"delta must lie in (0, 1), got delta={d}")
    dual = exps.p_dual / exps.q < 1
    run = ExponentSet(n, alpha, exps.q_dual, m) if dual else exps
    box = Box((-half_width,), 2 * half_width)
    F = CubeFamily.standard(box, N)
    theory = (m + 1 - alpha / n) * max(1.0, exps.p_dual / exps.q)

    def weight_constant(d: float) -> float:
        w = power_weight(d, run.p_dual, box, N)
        if dual:
            return apq_constant(w.inverse(), p, exps.q, F).value
        return apq_constant(w, p, exps.q, F).value

    ds = sorted(float(d) for d in deltas)[::-1]
    dropped = []
    if refine_check:
        d0 = ds[-1]
        r1 = _ratio(run, d0, box, N, r0)
        r2 = _ratio(run, d0, box, 2 * N, r0)
        if abs(r2 / r1 - 1) > tol:
            dropped.append(d0)
            ds = ds[:-1]
    rows = []
    for d in ds:
        num, den, grid_part, inner, outer = _sharpness_point(run, d, box, N, r0)
        rows.append(SharpnessRow(d, weight_constant(d), num / den, num, den, grid_part, inner, outer))
    Ks = [r.K for r in rows]
    fit = fit_loglog(Ks, [r.R for r in rows])
    wfit = fit_loglog([1 / r.delta for r in rows], Ks)
    return SharpnessResult(fit, wfit, theory, tuple(rows), tuple(dropped), dual)


def _ratio(exps: ExponentSet, d: float, box: Box, N: int, r0: float) -> float:
    num, den, *_ = _sharpness_point(exps, d, box, N, r0)
    return num / den


def ibp_minorant(m: int, delta: float, x: float) -> tuple[float, float]:
    """``(int_0^{1/|x|} log^m(1/r) r^(delta-1) dr, delta^(-m-1) |x|^(-delta))`` by quadrature."""
    X = 1.0 / abs(x)
    # r = X e^{-t}
    val = quad(
        lambda t: (t + math.log(1 / X)) ** m * (X * math.exp(-t)) ** delta,
        0.0,
        np.inf,
        limit=200,
    )[0]
    return val, delta ** (-m - 1) * abs(x) ** (-delta)


# test functions


def random_test_function(box: Box, N: int, rng: np.random.Generator, kind: str = "smooth") -> GridFunction:
    """Smoothed i.i.d. uniform values, or the indicator of a random dyadic cube."""
    n = box.n
    if kind == "smooth":
        v = rng.uniform(-1.0, 1.0, size=(N,) * n)
        acc = v.copy()
        for ax in range(n):
            acc = acc + np.roll(v, 1, axis=ax) + np.roll(v, -1, axis=ax)
        return GridFunction(box, N, acc / (1 + 2 * n))
    if kind == "dyadic":
        D = base_lattice(box, N)
        k = int(rng.integers(1, D.max_level + 1))
        idx = [int(rng.integers(0, 2**k)) for _ in range(n)]
        v = np.zeros(N**n)
        v[D.cube(k, idx).cells()] = 1.0
        return GridFunction(box, N, v)
    raise ValueError(f"unknown test function kind {kind!r}")


def test_functions(box: Box, N: int, trials: int, rng: np.random.Generator) -> list[GridFunction]:
    """Alternating rough and structured candidates."""
    return [random_test_function(box, N, rng, "smooth" if t % 2 == 0 else "dyadic") for t in range(trials)]


test_functions.__test__ = False  # keep pytest from collecting it


# Bloom-type upper check


@dataclass(frozen=True)
class BloomReport:
    ratio: float
    bmo: float
    kappa: float
    constants: dict
    empirical_c: float
    trials: int


def bloom_upper_check(
    mu: Weight,
    lam: Weight,
    b: GridFunction,
    m: int,
    alpha: float,
    p: float,
    trials: int,
    seed: int = 0,
    F: CubeFamily | None = None,
) -> BloomReport:
    """Largest ``||T f||_{L^q(lam^q)} / ||f||_{L^p(mu^p)}`` over test functions, against ``||b||^m kappa_m``.

    ``nu = mu / lam`` cellwise.
    """
    box, N = b.box, b.N
    exps = ExponentSet(box.n, alpha, p, m)
    q = exps.q
    F = F or CubeFamily.standard(box, N)
    rng = np.random.default_rng(seed)
    ratio = 0.0
    for f in test_functions(box, N, trials, rng):
        Tf = iterated_commutator(b, m, f, alpha)
        ratio = max(ratio, lp_weighted_norm(Tf, q, lam.w) / lp_weighted_norm(f, p, mu.w))
    consts = {
        "lam_apq": apq_constant(lam, p, q, F).value,
        "mu_apq": apq_constant(mu, p, q, F).value,
        "lam_p_ap": ap_constant(lam.power(p), p, F).value,
        "mu_p_ap": ap_constant(mu.power(p), p, F).value,
        "lam_q_aq": ap_constant(lam.power(q), q, F).value,
        "mu_q_aq": ap_constant(mu.power(q), q, F).value,
    }
    kap = kappa_m(KappaInputs(exps, **consts))
    if m >= 1:
        nu = Weight(mu.w.with_values((mu.w.flat / lam.w.flat) ** (1.0 / m)))
        bmo = bmo_nu_norm(b, nu, F).value
    else:
        bmo = 1.0
    scale = bmo**m * kap
    c = 0.0 if ratio == 0 else ratio / scale
    return BloomReport(ratio, bmo, kap, consts, c, trials)


# necessity construction


@dataclass(frozen=True)
class NecessityReport:
    omega: float
    median: float
    size_A: int
    size_B: int
    sigma: int
    lhs_i: float
    rhs_i: float
    holds_i: bool
    restricted_norm: float
    chain_bound: float
    nu_mean: float
    c: float
    holds_ii: bool


def necessity_check(
    b: GridFunction,
    mu: Weight,
    lam: Weight,
    m: int,
    alpha: float,
    Q: DyadicCube,
    p: float = 4 / 3,
) -> NecessityReport:
    """Run the set construction on ``Q`` and evaluate both inequalities on the grid."""
    if b.n != 1:
        raise ValueError("the necessity construction is implemented for n=1")
    if m < 1:
        raise ValueError("m must be >= 1")
    n, h = b.n, b.h
    exps = ExponentSet(n, alpha, p, m)
    q, qd = exps.q, exps.q_dual
    lam_frac = 2.0 ** -(n + 2)
    cells = Q.cells()
    vals = b.flat[cells]
    omega = oscillation(b, Q, lam_frac)
    med = median(b, Q)
    nE = math.ceil(lam_frac * cells.size - 1e-12)
    # E: largest |b - median|, ties by cell order
    E = cells[np.argsort(-np.abs(vals - med), kind="stable")[:nE]]
    # A: the upper half by value, ties by cell order
    order = np.argsort(-vals, kind="stable")
    A = np.sort(cells[order[: cells.size // 2]])
    B = np.setdiff1d(cells, A)
    EA = np.intersect1d(E, A)
    if 2 * EA.size >= E.size:
        A1, B1, sigma = EA, B, 1
    else:
        A1, B1, sigma = np.intersect1d(E, B), A, (-1) ** m
    ell = Q.size * h
    chiB = np.zeros(b.size)
    chiB[B1] = 1.0
    T = iterated_commutator(b, m, b.with_values(chiB), alpha).flat
    lhs = omega**m * (A1.size * h) * (B1.size * h)
    rhs = ell ** (n - alpha) * sigma * float(T[A1].sum() * h)
    # chain: Holder on Q, then the restricted norm of T on chi_{B'}
    lam_neg = float(np.sum(lam.power_mean(-qd)[cells]) * h) ** (1 / qd)
    mu_p_Q = float(np.sum(mu.power_mean(p)[cells]) * h) ** (1 / p)
    mu_p_B = float(np.sum(mu.power_mean(p)[B1]) * h) ** (1 / p)
    TchiB = b.with_values(T)
    c_T = lp_weighted_norm(TchiB, q, lam.w) / mu_p_B if mu_p_B > 0 else 0.0
    chain = (ell ** (n - alpha) * lam_neg * c_T * mu_p_Q / ((A1.size * h) * (B1.size * h))) ** (1 / m)
    nu_m = (mu.w.flat[cells] / lam.w.flat[cells]) ** (1.0 / m)
    nu_mean = float(nu_m.mean())
    c = chain / nu_mean
    return NecessityReport(
        omega, med, int(A1.size), int(B1.size), int(sigma), lhs, rhs, bool(lhs <= rhs),
        c_T, chain, nu_mean, c, bool(omega <= chain),
    )


# aggregated domination constants


def domination_constant_report(
    n: int, alpha: float, m: int, trials: int, N: int, seed: int = 0
) -> list[dict]:
    """Measured pointwise constants for ``trials`` seeded random ``(f, b)`` pairs."""
    box = Box((0.0,) * n, 1.0)
    rows = []
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        f = random_test_function(box, N, rng, "smooth")
        b = random_test_function(box, N, rng, "smooth")
        rep = build_sparse_domination(f, b, alpha, m)
        certs = rep.certificates()
        rows.append(
            {
                "trial": t,
                "m": m,
                "constant": rep.constant,
                "max_adaptive_C": rep.max_adaptive_C,
                "base_cubes": len(rep.base_family),
                "family_sizes": ";".join(str(s) for s in rep.family_sizes),
                "base_sparse": verify_sparse(rep.base_family).passed,
                "shifted_sparse": all(c.passed for c in certs),
                "min_ratio": min(c.worst_ratio for c in certs),
            }
        )
    return rows


def write_rows(path, rows: list[dict], header: str = "") -> None:
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        if not rows:
            return
        wr = csv.DictWriter(fh, fieldnames=list(rows[0]))
        wr.writeheader()
        for r in rows:
            wr.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v) for k, v in r.items()})
