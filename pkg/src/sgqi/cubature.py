"""Cubature induced by the sampling recovery operator.

Integrating the reconstruction exactly (spline integrals are known in
closed form) collapses to a weighted sum of the original point samples.
This module exposes both views: integrate an already-built reconstruction,
or assemble the weight for every grid point once and reuse it.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import bspline
from .grids import LevelSet, key_to_coords, level_point_keys
from .quasi_interp import surplus_matrix, vectorize_handle
from .recovery import Reconstruction


@lru_cache(maxsize=None)
def _integral_vector(r: int, k: int) -> np.ndarray:
    """Integrals over [0,1] of every active shift at univariate level k."""
    lo, hi = bspline.shift_bounds(r, k)
    den = bspline.shift_denominator(r)
    return np.array([bspline.integral_dilated_1d(r, k, s, den)
                     for s in range(lo, hi + 1)])


def integrate_reconstruction(rec: Reconstruction) -> float:
    """Exact integral of the reconstruction over the unit cube."""
    total = 0.0
    for k, lvl in sorted(rec.surplus.items()):
        T = lvl.coeffs
        for axis in range(rec.d - 1, -1, -1):
            T = np.tensordot(T, _integral_vector(rec.r, k[axis]),
                             axes=([T.ndim - 1], [0]))
        total += float(T)
    return total


@dataclass
class CubatureRule:
    """Point weights lambda_x for integrating sampled functions.

    weights maps the exact dyadic key of each grid point (see
    grids.level_point_keys) to its weight; points() and weight_vector()
    return matching arrays in a deterministic coordinate order.
    """

    r: int
    d: int
    delta: LevelSet
    weights: dict
    budget: int

    def _sorted_keys(self):
        return sorted(self.weights,
                      key=lambda key: key_to_coords(key))

    def points(self) -> np.ndarray:
        return np.array([key_to_coords(key) for key in self._sorted_keys()])

    def weight_vector(self) -> np.ndarray:
        return np.array([self.weights[key] for key in self._sorted_keys()])


def assemble_weights(delta: LevelSet, r: int) -> CubatureRule:
    """Accumulate per-point cubature weights over all levels of the set.

    Per level the weight of node tau factors across dimensions as
    (integral vector) @ (surplus matrix); the outer product is then
    scattered onto the distinct grid points by exact dyadic identity.
    """
    if not delta.is_downward_closed():
        raise ValueError("level set must be downward closed")
    d = delta.d
    acc: dict = {}
    for k in delta.levels:
        per_dim = []
        for ki in k:
            W, _ = surplus_matrix(r, ki)
            ivec = _integral_vector(r, ki)
            per_dim.append(W.T.dot(ivec))
        w = per_dim[0]
        for u in per_dim[1:]:
            w = np.multiply.outer(w, u)
        flat = w.reshape(-1)
        for key, wt in zip(level_point_keys(k), flat):
            acc[key] = acc.get(key, 0.0) + float(wt)
    return CubatureRule(r=r, d=d, delta=delta, weights=acc,
                        budget=delta.budget())


def apply_rule(rule: CubatureRule, f) -> float:
    """Evaluate f once per grid point and return the weighted sum."""
    fv = vectorize_handle(f, rule.d)
    pts = rule.points()
    vals = fv(pts)
    return float(np.dot(rule.weight_vector(), vals))


# ---------------------------------------------------------------------------
# exact text export

def _exact_decimal(num: int, exp: int) -> str:
    """Decimal string of num / 2**exp with no rounding (dyadics terminate)."""
    if exp == 0:
        return str(num)
    digits = num * 5 ** exp  # num/2^exp = num*5^exp / 10^exp
    sign = "-" if digits < 0 else ""
    s = str(abs(digits)).rjust(exp + 1, "0")
    whole, frac = s[:-exp], s[-exp:]
    frac = frac.rstrip("0")
    return f"{sign}{whole}.{frac}" if frac else f"{sign}{whole}"


def export_csv(rule: CubatureRule, fh) -> None:
    """Write `x_1,...,x_d,weight` rows; coordinates as exact decimals."""
    header = ",".join(f"x_{i + 1}" for i in range(rule.d)) + ",weight"
    fh.write(header + "\n")
    for key in rule._sorted_keys():
        coords = [_exact_decimal(key[2 * i], key[2 * i + 1])
                  for i in range(rule.d)]
        fh.write(",".join(coords) + "," + repr(rule.weights[key]) + "\n")
