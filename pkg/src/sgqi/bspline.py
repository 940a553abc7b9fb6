"""Centered cardinal B-splines and their dyadic dilates.

The splines here are the r-fold convolutions of the unit box, centered at
the origin, hard-coded as piecewise polynomials for orders r = 1..4.  The
test suite validates them against a Cox-de Boor recursion written
independently.

Conventions:
  * order r has support [-r/2, r/2],
  * even r uses integer shifts M(2^k x - s), odd r half-integer shifts
    M(2^k x - s/2),
  * the r = 1 box is right-continuous (value 1 on [-1/2, 1/2)) so point
    evaluation is single-valued at the jump.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

ORDERS = (1, 2, 3, 4)


def _check_order(r: int) -> None:
    if r not in ORDERS:
        raise ValueError("order out of range")


def shift_denominator(r: int) -> int:
    """2 for odd orders (half-integer translation scheme), 1 for even."""
    _check_order(r)
    return 1 if r % 2 == 0 else 2


def eval_centered(r: int, t):
    """Value of the centered B-spline of order r at t (scalar or ndarray)."""
    _check_order(r)
    t = np.asarray(t, dtype=float)
    u = np.abs(t)
    if r == 1:
        v = np.where((t >= -0.5) & (t < 0.5), 1.0, 0.0)
    elif r == 2:
        v = np.maximum(1.0 - u, 0.0)
    elif r == 3:
        v = np.where(u <= 0.5, 0.75 - u * u, 0.0)
        mid = (u > 0.5) & (u < 1.5)
        # parabola pieces meet at u = 1/2 with value 1/2
        v = np.where(mid, 0.5 * (1.5 - u) ** 2, v)
    else:
        v = np.where(u <= 1.0, 2.0 / 3.0 - u * u + 0.5 * u**3, 0.0)
        outer = (u > 1.0) & (u < 2.0)
        v = np.where(outer, (2.0 - u) ** 3 / 6.0, v)
    if v.ndim == 0:
        return float(v)
    return v


def _as_level(k, name="k"):
    if isinstance(k, (int, np.integer)):
        k = (int(k),)
    k = tuple(int(v) for v in k)
    if any(v < 0 for v in k):
        raise ValueError(f"{name} must be nonnegative")
    return k


def shift_bounds(r: int, k: int) -> tuple[int, int]:
    """Inclusive bounds of the univariate active-shift set at level k.

    Even r: integer s with -r/2 < s < 2^k + r/2.
    Odd r:  integer s with -r  < s < 2^(k+1) + r (half-integer scheme).

    The order-1 box is right-open, so the shift just past the right edge
    (support meeting [0,1] only at x = 1) still evaluates to 1 there and
    must stay active; dropping it would break the level telescoping at
    that single point.  Higher orders vanish at their support edge.
    """
    _check_order(r)
    if r % 2 == 0:
        return (-(r // 2) + 1, (1 << k) + r // 2 - 1)
    if r == 1:
        return (0, (1 << (k + 1)) + 1)
    return (-r + 1, (1 << (k + 1)) + r - 1)


def active_shifts(r: int, k) -> list[range]:
    """Per-dimension shift ranges of the basis functions alive on [0,1]^d."""
    k = _as_level(k)
    out = []
    for ki in k:
        lo, hi = shift_bounds(r, ki)
        out.append(range(lo, hi + 1))
    return out


def _check_index(r, k, s):
    k = _as_level(k)
    if isinstance(s, (int, np.integer)):
        s = (int(s),)
    s = tuple(int(v) for v in s)
    if len(s) != len(k):
        raise ValueError("level and shift dimensions differ")
    for ki, si in zip(k, s):
        lo, hi = shift_bounds(r, ki)
        if not lo <= si <= hi:
            raise ValueError("inactive spline index")
    return k, s


def eval_dilated(r: int, k, s, x):
    """Tensor-product dilated spline at a point x in [0,1]^d.

    Computes prod_i M(2^{k_i} x_i - s_i) for even r and
    prod_i M(2^{k_i} x_i - s_i/2) for odd r.
    """
    k, s = _check_index(r, k, s)
    if np.isscalar(x):
        x = (float(x),)
    x = tuple(float(v) for v in x)
    if len(x) != len(k):
        raise ValueError("point dimension mismatch")
    den = shift_denominator(r)
    val = 1.0
    for ki, si, xi in zip(k, s, x):
        val *= eval_centered(r, math.ldexp(xi, ki) - si / den)
    return val


@lru_cache(maxsize=8)
def _gauss_rule(npts: int):
    nodes, weights = np.polynomial.legendre.leggauss(npts)
    return nodes, weights


@lru_cache(maxsize=None)
def integral_dilated_1d(r: int, k: int, s: int, den: int | None = None) -> float:
    """Exact integral over [0,1] of M(2^k x - s/den).

    Integrated piece by piece between the spline knots with a Gauss rule of
    ceil(r/2) points, which is exact for the degree r-1 polynomial pieces.
    den defaults to the parity scheme of r.
    """
    _check_order(r)
    if den is None:
        den = shift_denominator(r)
    # substitute t = 2^k x - s/den
    lo = -s / den
    hi = math.ldexp(1.0, k) - s / den
    half = r / 2.0
    lo = max(lo, -half)
    hi = min(hi, half)
    if hi <= lo:
        return 0.0
    knots = [-half + i for i in range(r + 1)]
    cuts = sorted({lo, hi, *[c for c in knots if lo < c < hi]})
    gx, gw = _gauss_rule((r + 1) // 2)
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (a + b)
        rad = 0.5 * (b - a)
        total += rad * float(np.dot(gw, eval_centered(r, mid + rad * gx)))
    return math.ldexp(total, -k)


def integral_on_cube(r: int, k, s) -> float:
    """Integral of the tensor dilated spline over the unit cube."""
    k, s = _check_index(r, k, s)
    den = shift_denominator(r)
    val = 1.0
    for ki, si in zip(k, s):
        val *= integral_dilated_1d(r, ki, si, den)
    return val


def eval_expansion(r: int, k, s_min, coeffs: np.ndarray, X: np.ndarray,
                   den: int | None = None) -> np.ndarray:
    """Evaluate a single-level tensor spline expansion at many points.

    coeffs[i_1,...,i_d] is the coefficient of the shift s_min + i (per
    dimension), with translation denominator den (1 for integer shifts,
    2 for half-integer).  X has shape (npts, d).  Shifts outside the
    coefficient array contribute nothing.
    """
    _check_order(r)
    k = _as_level(k)
    d = len(k)
    if den is None:
        den = shift_denominator(r)
    npts = X.shape[0]
    m = den * r  # candidate shifts per dimension covering the support
    cols = []
    vals = []
    for i in range(d):
        u = X[:, i] * float(1 << k[i])
        a = den * u - den * r / 2.0
        s_lo = np.floor(a).astype(np.int64) + 1
        cand = s_lo[:, None] + np.arange(m, dtype=np.int64)[None, :]
        B = eval_centered(r, u[:, None] - cand / den)
        col = cand - s_min[i]
        inside = (col >= 0) & (col < coeffs.shape[i])
        B = np.where(inside, B, 0.0)
        cols.append(np.clip(col, 0, coeffs.shape[i] - 1))
        vals.append(B)
    out = np.zeros(npts)
    for combo in np.ndindex(*([m] * d)):
        w = vals[0][:, combo[0]].copy()
        for i in range(1, d):
            w *= vals[i][:, combo[i]]
        idx = tuple(cols[i][:, combo[i]] for i in range(d))
        out += coeffs[idx] * w
    return out
