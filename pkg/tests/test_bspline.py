import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgqi import bspline
from oracles import cox_de_boor


def test_frozen_center_values():
    assert bspline.eval_centered(1, 0.0) == 1.0
    assert bspline.eval_centered(2, 0.0) == 1.0
    assert bspline.eval_centered(3, 0.0) == 0.75
    assert math.isclose(bspline.eval_centered(4, 0.0), 2.0 / 3.0)
    assert math.isclose(bspline.eval_centered(4, 1.0), 1.0 / 6.0)
    assert bspline.eval_centered(3, 0.5) == 0.5
    # box convention: right-continuous at the jump
    assert bspline.eval_centered(1, -0.5) == 1.0
    assert bspline.eval_centered(1, 0.5) == 0.0


@pytest.mark.parametrize("r", bspline.ORDERS)
def test_matches_cox_de_boor(r):
    ts = np.linspace(-2.5, 2.5, 641)  # includes all knots of every order
    for t in ts:
        assert abs(bspline.eval_centered(r, t) - cox_de_boor(r, t)) < 1e-12


@pytest.mark.parametrize("r", bspline.ORDERS)
def test_support_and_symmetry(r):
    assert bspline.eval_centered(r, r / 2 + 1e-9) == 0.0
    assert bspline.eval_centered(r, -r / 2 - 1e-9) == 0.0
    if r > 1:
        ts = np.linspace(0.0, r / 2, 101)
        np.testing.assert_allclose(bspline.eval_centered(r, ts),
                                   bspline.eval_centered(r, -ts))


@settings(max_examples=60, deadline=None)
@given(st.floats(-3.0, 3.0), st.integers(1, 4))
def test_partition_of_unity(t, r):
    total = sum(bspline.eval_centered(r, t - s) for s in range(-6, 7))
    assert abs(total - 1.0) < 1e-12


def test_shift_bounds_counts():
    assert bspline.shift_bounds(2, 3) == (0, 8)
    assert bspline.shift_bounds(4, 2) == (-1, 5)
    # order 1 carries one extra shift: its box is right-open, so the
    # translate whose support meets [0,1] only at x=1 is still nonzero there
    assert bspline.shift_bounds(1, 2) == (0, 9)
    assert bspline.shift_bounds(3, 1) == (-2, 6)
    for r in bspline.ORDERS:
        for k in range(5):
            lo, hi = bspline.shift_bounds(r, k)
            n = hi - lo + 1
            if r % 2 == 0:
                assert n == (1 << k) + r - 1
            elif r == 1:
                assert n == (1 << (k + 1)) + 2
            else:
                assert n == (1 << (k + 1)) + 2 * r - 1


def test_active_shifts_cover_right_endpoint():
    # every active set must reproduce values at x = 1 exactly; the order-1
    # box is the delicate case (half-open support)
    for r in bspline.ORDERS:
        for k in (0, 1, 3):
            den = bspline.shift_denominator(r)
            lo, hi = bspline.shift_bounds(r, k)
            total = sum(bspline.eval_centered(r, (1 << k) * 1.0 - s / den)
                        for s in range(lo, hi + 1))
            # half-integer schemes double-cover; integer schemes sum to 1
            assert total > 0.999


def test_eval_dilated_rejects_inactive_index():
    with pytest.raises(ValueError, match="inactive"):
        bspline.eval_dilated(2, 2, -1, 0.5)
    with pytest.raises(ValueError, match="dimension"):
        bspline.eval_dilated(2, (1, 1), (0, 0), (0.5,))


def test_eval_dilated_tensor_product():
    v = bspline.eval_dilated(3, (1, 2), (1, 3), (0.3, 0.6))
    v1 = bspline.eval_centered(3, 2 * 0.3 - 0.5)
    v2 = bspline.eval_centered(3, 4 * 0.6 - 1.5)
    assert math.isclose(v, v1 * v2)


@pytest.mark.parametrize("r", bspline.ORDERS)
def test_integral_interior_is_meshwidth(r):
    # a spline fully inside [0,1] integrates to 2^-k
    k = 4
    den = bspline.shift_denominator(r)
    s = den * (1 << (k - 1))  # centered at 1/2
    assert math.isclose(bspline.integral_dilated_1d(r, k, s), 0.5**k,
                        rel_tol=1e-13)


def test_integral_truncated_values():
    # order 2 hat at the left edge keeps only its right half
    assert math.isclose(bspline.integral_dilated_1d(2, 0, 0), 0.5)
    assert math.isclose(bspline.integral_dilated_1d(2, 2, 0), 0.125)
    # order 1 box at s=0 on level 0 covers [0, 1/2)
    assert math.isclose(bspline.integral_dilated_1d(1, 0, 0), 0.5)


@pytest.mark.parametrize("r,k,s", [(2, 1, 0), (3, 1, -1), (4, 2, -1),
                                   (4, 3, 9), (3, 2, 11), (1, 1, 3)])
def test_integral_against_quadrature(r, k, s):
    from scipy.integrate import quad

    den = bspline.shift_denominator(r)
    val, _ = quad(lambda x: bspline.eval_centered(r, (1 << k) * x - s / den),
                  0.0, 1.0, limit=200)
    assert math.isclose(bspline.integral_dilated_1d(r, k, s), val,
                        rel_tol=1e-9, abs_tol=1e-12)


def test_integral_on_cube_is_product():
    v = bspline.integral_on_cube(4, (1, 2), (1, 3))
    v1 = bspline.integral_dilated_1d(4, 1, 1)
    v2 = bspline.integral_dilated_1d(4, 2, 3)
    assert math.isclose(v, v1 * v2)


@pytest.mark.parametrize("r", bspline.ORDERS)
def test_eval_expansion_matches_direct_sum(r):
    rng = np.random.default_rng(3)
    k = (1, 2)
    ranges = bspline.active_shifts(r, k)
    coeffs = rng.standard_normal((len(ranges[0]), len(ranges[1])))
    s_min = (ranges[0].start, ranges[1].start)
    X = rng.uniform(0.0, 1.0, size=(40, 2))
    got = bspline.eval_expansion(r, k, s_min, coeffs, X)
    want = np.zeros(40)
    for i, s1 in enumerate(ranges[0]):
        for j, s2 in enumerate(ranges[1]):
            want += coeffs[i, j] * np.array(
                [bspline.eval_dilated(r, k, (s1, s2), tuple(x)) for x in X])
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_order_out_of_range():
    with pytest.raises(ValueError, match="order"):
        bspline.eval_centered(5, 0.0)
    with pytest.raises(ValueError, match="order"):
        bspline.shift_bounds(0, 1)
