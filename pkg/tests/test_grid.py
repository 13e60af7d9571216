import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from fracsparse.grid import (
    Box,
    ExponentSet,
    GridFunction,
    abs_powlog_cell_means,
    dual_exponent,
    integrate,
    lp_weighted_norm,
    powlog_mean,
    sample,
    sobolev_q,
)

vals = st.lists(st.floats(-10, 10), min_size=8, max_size=8)


def test_sample_zero(unit):
    f = sample(lambda x: 0 * x, unit, 4)
    assert np.all(f.flat == 0)


def test_sample_midpoints(unit):
    f = sample(lambda x: x, unit, 4)
    assert f.flat.tolist() == [1 / 8, 3 / 8, 5 / 8, 7 / 8]


def test_sample_log_finite(sym):
    f = sample(lambda x: np.log(np.abs(x)), sym, 8)
    assert np.all(np.isfinite(f.flat))
    assert f.flat[3] == pytest.approx(math.log(1 / 8))


def test_sample_rejects_nonfinite_with_cell():
    with pytest.raises(ValueError, match="cell 2"):
        sample(lambda x: 1 / (x - 0.625), Box((0.0,), 1.0), 4)


def test_sample_rejects_bad_N(unit):
    with pytest.raises(ValueError):
        sample(lambda x: x, unit, 6)


def test_integrate_examples(unit):
    assert integrate(sample(lambda x: 1 + 0 * x, unit, 8)) == 1.0
    assert integrate(sample(lambda x: x, unit, 4)) == 0.5
    # (1 + 9 + 25 + 49) / 64 / 4 = 84/256; the midpoint rule undershoots 1/3 by h^2/12
    assert integrate(sample(lambda x: x**2, unit, 4)) == pytest.approx(84 / 256, abs=1e-15)
    assert 1 / 3 - 84 / 256 == pytest.approx((1 / 4) ** 2 / 12)


def test_integrate_regions(unit):
    f = sample(lambda x: x, unit, 4)
    assert integrate(f, [0, 1]) == pytest.approx(1 / 8)
    assert integrate(f, np.array([True, False, False, True])) == pytest.approx(1 / 4)
    with pytest.raises(ValueError):
        integrate(f, [4])


def test_lp_norm_examples(unit):
    one = sample(lambda x: 1 + 0 * x, unit, 8)
    for p in (1, 1.5, 2, 7):
        assert lp_weighted_norm(one, p, one) == pytest.approx(1.0)
    assert lp_weighted_norm(one.with_values(2 * one.flat), 2, one) == pytest.approx(2.0)
    chi = sample(lambda x: (x < 0.5).astype(float), unit, 8)
    three = one.with_values(3 * one.flat)
    assert lp_weighted_norm(chi, 2, three) == pytest.approx(3 / math.sqrt(2), rel=1e-15)


def test_lp_norm_mismatched_grids(unit):
    with pytest.raises(ValueError):
        lp_weighted_norm(sample(lambda x: x, unit, 4), 2, sample(lambda x: 1 + x, unit, 8))


def test_exponents():
    assert dual_exponent(2) == 2
    assert dual_exponent(4 / 3) == pytest.approx(4)
    assert sobolev_q(1, 0.5, 4 / 3) == pytest.approx(4)
    for bad in (1.0, 0.5):
        with pytest.raises(ValueError):
            dual_exponent(bad)
    with pytest.raises(ValueError):
        sobolev_q(1, 0.5, 2.0)


@given(st.floats(0.05, 0.95), st.floats(1.01, 5.0))
def test_exponent_set_relation(alpha, t):
    p = 1 + (1 / alpha - 1) * (t - 1) / 5  # p in (1, n/alpha)
    e = ExponentSet(1, alpha, p)
    assert abs(1 / e.q + alpha - 1 / p) < 1e-12
    assert e.q > p


def test_exponent_set_fractions():
    e = ExponentSet(1, 0.5, 4 / 3, 2)
    assert e.fraction("q") == 4
    assert e.fraction("p_dual") == 4


@given(vals, vals, st.floats(-3, 3))
def test_integrate_linear(a, b, c):
    box = Box((0.0,), 1.0)
    f, g = GridFunction(box, 8, a), GridFunction(box, 8, b)
    lhs = integrate(f.with_values(f.flat + c * g.flat))
    assert lhs == pytest.approx(integrate(f) + c * integrate(g), abs=1e-9)


@given(vals, st.lists(st.floats(0, 5), min_size=8, max_size=8))
def test_integrate_monotone(a, d):
    box = Box((0.0,), 1.0)
    f = GridFunction(box, 8, a)
    assert integrate(f) <= integrate(f.with_values(f.flat + np.array(d))) + 1e-12


@given(vals, st.floats(-5, 5).filter(lambda c: c == 0 or abs(c) > 1e-6), st.floats(1, 6))
def test_lp_homogeneous(a, c, p):
    f = GridFunction(Box((0.0,), 1.0), 8, a)
    assert lp_weighted_norm(f.with_values(c * f.flat), p) == pytest.approx(abs(c) * lp_weighted_norm(f, p), rel=1e-12, abs=1e-300)


@given(vals, vals, st.floats(1.05, 8))
def test_holder(a, b, p):
    box = Box((0.0,), 1.0)
    f, g = GridFunction(box, 8, a), GridFunction(box, 8, b)
    fg = f.with_values(np.abs(f.flat * g.flat))
    assert integrate(fg) <= lp_weighted_norm(f, p) * lp_weighted_norm(g, dual_exponent(p)) * (1 + 1e-12) + 1e-300


def test_csv_round_trip_bit_exact(tmp_path, rng):
    for box, N in ((Box((-4.0,), 8.0), 64), (Box((0.1, -0.3), 1.7), 8)):
        f = GridFunction(box, N, rng.normal(size=N**box.n) * 10.0 ** rng.integers(-200, 200, size=N**box.n))
        f.to_csv(tmp_path / "f.csv")
        first = (tmp_path / "f.csv").read_text().splitlines()[0]
        assert first == "# box_lo,box_side,n,N"
        g = GridFunction.from_csv(tmp_path / "f.csv")
        assert g.same_grid(f)
        assert np.array_equal(g.values, f.values)


def test_gridfunction_is_immutable(unit):
    f = sample(lambda x: x, unit, 4)
    with pytest.raises(ValueError):
        f.values[0] = 1.0


def test_gridfunction_rejects_nonfinite(unit):
    with pytest.raises(ValueError, match="cell 1"):
        GridFunction(unit, 4, [0, np.nan, 0, 0])


@pytest.mark.parametrize("c,k", [(-0.5, 0), (-0.9, 1), (0.3, 2), (-0.75, 3)])
def test_powlog_mean_against_quad(c, k):
    # independent oracle: adaptive quadrature with the singularity at an endpoint
    for lo, hi in ((0.0, 0.3), (0.2, 0.7), (1.5, 4.0)):
        ref = quad(lambda y: y**c * math.log(y) ** k, lo, hi, limit=200)[0] / (hi - lo)
        got = float(powlog_mean(np.array([lo]), np.array([hi]), c, k)[0])
        assert got == pytest.approx(ref, rel=1e-9, abs=1e-12)


def test_cell_means_straddling_center():
    box = Box((-1.0,), 2.0)
    got = abs_powlog_cell_means(box, 3, -0.5, 0, center=0.0)
    # middle cell [-1/3, 1/3]
    assert got[1] == pytest.approx(4 * math.sqrt(1 / 3) / (2 / 3))
    assert got[0] == pytest.approx(got[2])
