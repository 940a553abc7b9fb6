"""Error measurement and experiment analytics.

Provides the discrete L_q error against a reconstruction, a discrete
Besov-type quasinorm used as a membership diagnostic, an energy-norm
surrogate built from residual surpluses, least-squares rate fitting, and
the analytic corpus of test functions (polynomial controls, smooth
products, kinks with tunable smoothness).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from . import recovery
from .grids import LevelSet, SmoothnessSpec
from .quasi_interp import vectorize_handle

_LATTICE_CAP = 1 << 24
_FALLBACK_POINTS = 10 ** 6
_CHUNK = 1 << 16


def max_threads() -> int:
    """Thread cap for chunked estimators, from SGQI_MAX_THREADS (default 1)."""
    raw = os.environ.get("SGQI_MAX_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


@dataclass
class TestFunction:
    label: str
    handle: object          # vectorized (npts, d) -> (npts,)
    exact_integral: float | None
    membership: str


@dataclass
class RateFit:
    points: tuple          # ((n, error), ...)
    slope: float
    intercept: float
    residual: float


# ---------------------------------------------------------------------------
# discrete L_q error

def _lattice_axes(rec, resolution, offset):
    d = rec.d
    if resolution is None:
        kmax = rec.max_level()
        counts = [(1 << (kmax[i] + 3)) + 1 for i in range(d)]
    elif np.isscalar(resolution):
        counts = [int(resolution)] * d
    else:
        counts = [int(m) for m in resolution]
        if len(counts) != d:
            raise ValueError("resolution length does not match dimension")
    if any(m < 2 for m in counts):
        raise ValueError("resolution must be at least 2 per dimension")
    axes, wts = [], []
    for m in counts:
        h = 1.0 / (m - 1)
        if offset:
            axes.append((np.arange(m - 1) + 0.5) * h)
            wts.append(np.full(m - 1, h))
        else:
            axes.append(np.arange(m) * h)
            w = np.full(m, h)
            w[0] = w[-1] = h / 2.0
            wts.append(w)
    return axes, wts


def _chunk_ranges(total, chunk):
    return [(s, min(s + chunk, total)) for s in range(0, total, chunk)]


def discrete_lq_error(f, rec, q_norm: float, resolution=None, offset=False,
                      method=None, points=None, seed=7) -> float:
    """Discrete L_q distance between f and the reconstruction.

    method: "lattice" (tensor trapezoid, or midpoint when offset=True),
    "halton", or "mc"; None picks the lattice unless its total size would
    exceed 2^24 points, then falls back to 10^6 Halton points.  q_norm may
    be inf for the lattice max.
    """
    if not (q_norm > 0):
        raise ValueError("q must be positive")
    fv = vectorize_handle(f, rec.d)

    if method is None:
        axes, wts = _lattice_axes(rec, resolution, offset)
        total = math.prod(len(ax) for ax in axes)
        method = "lattice" if total <= _LATTICE_CAP else "halton"

    if method == "lattice":
        axes, wts = _lattice_axes(rec, resolution, offset)
        shape = tuple(len(ax) for ax in axes)
        total = math.prod(shape)

        def _block(rng):
            lo, hi = rng
            idx = np.unravel_index(np.arange(lo, hi), shape)
            X = np.column_stack([axes[i][idx[i]] for i in range(rec.d)])
            diff = np.abs(fv(X) - recovery.evaluate_batch(rec, X))
            if math.isinf(q_norm):
                return float(diff.max())
            w = wts[0][idx[0]].copy()
            for i in range(1, rec.d):
                w *= wts[i][idx[i]]
            return float(np.dot(w, diff ** q_norm))

        ranges = _chunk_ranges(total, _CHUNK)
        nthr = max_threads()
        if nthr > 1 and len(ranges) > 1:
            with ThreadPoolExecutor(max_workers=nthr) as pool:
                parts = list(pool.map(_block, ranges))
        else:
            parts = [_block(rng) for rng in ranges]
        if math.isinf(q_norm):
            return max(parts)
        return math.fsum(parts) ** (1.0 / q_norm)

    npts = _FALLBACK_POINTS if points is None else int(points)
    if method == "halton":
        X = qmc.Halton(d=rec.d, scramble=True,
                       seed=seed).random(npts)
    elif method == "mc":
        X = np.random.default_rng(seed).random((npts, rec.d))
    else:
        raise ValueError("unknown error estimation method")
    diff = np.abs(fv(X) - recovery.evaluate_batch(rec, X))
    if math.isinf(q_norm):
        return float(diff.max())
    return float(np.mean(diff ** q_norm) ** (1.0 / q_norm))


# ---------------------------------------------------------------------------
# discrete Besov-type quasinorm and energy surrogate

def _coeff_norm(arr: np.ndarray, p: float) -> float:
    a = np.abs(arr)
    if math.isinf(p):
        return float(a.max())
    return float((a ** p).sum() ** (1.0 / p))


def _level_weight_log2(k, spec: SmoothnessSpec) -> float:
    if spec.kind == "mixed":
        return float(np.dot(spec.a, k))
    return spec.alpha * sum(k) + spec.beta * max(k)


def besov_quasinorm_B3(rec, spec: SmoothnessSpec, truncation=None) -> float:
    """Discrete scale-weighted coefficient quasinorm (membership diagnostic).

    Sums (level weight) * 2^{-|k|_1/p} * ||c_k||_p over stored levels with
    |k|_inf <= truncation, aggregated in the theta power (sup for inf).
    """
    p, theta = spec.p, spec.theta
    terms = []
    for k, lvl in sorted(rec.surplus.items()):
        if truncation is not None and max(k) > truncation:
            continue
        lg = _level_weight_log2(k, spec)
        if not math.isinf(p):
            lg -= sum(k) / p
        terms.append(2.0 ** lg * _coeff_norm(lvl.coeffs, p))
    if not terms:
        return 0.0
    if math.isinf(theta):
        return max(terms)
    return float(np.sum(np.array(terms) ** theta) ** (1.0 / theta))


def energy_error_surrogate(f, rec, spec: SmoothnessSpec, tau: float,
                           truncation=None, reference=None,
                           gamma=None) -> float:
    """Residual-surplus surrogate for the energy-norm error.

    Rebuilds f on a strictly larger reference level set; levels already in
    rec carry identical surpluses and drop out, so the sum runs over the
    shell of missing levels, each weighted 2^{gamma |k|_inf - |k|_1 / q}
    in the q coefficient norm and aggregated in the tau power.
    """
    if gamma is None:
        gamma = spec.gamma
    if gamma is None:
        raise ValueError("surrogate needs a gamma weight")
    if reference is None:
        if truncation is None:
            raise ValueError("need a reference level set or a truncation box")
        from .grids import comparison_sets
        reference = comparison_sets(truncation, 1.0, "fullgrid", rec.d)
    if not (rec.delta.issubset(reference) and len(reference) > len(rec.delta)):
        raise ValueError("reference set must strictly contain the "
                         "reconstruction levels")
    ref = recovery.build(f, reference, rec.r)
    q = spec.q
    terms = []
    for k, lvl in sorted(ref.surplus.items()):
        if k in rec.surplus:
            continue  # identical surplus, exact zero residual
        lg = gamma * max(k)
        if not math.isinf(q):
            lg -= sum(k) / q
        terms.append(2.0 ** lg * _coeff_norm(lvl.coeffs, q))
    if not terms:
        return 0.0
    if math.isinf(tau):
        return max(terms)
    return float(np.sum(np.array(terms) ** tau) ** (1.0 / tau))


# ---------------------------------------------------------------------------
# rate fitting

def fit_rate(points) -> RateFit:
    """Least-squares slope of log2(error) against log2(n)."""
    pts = tuple((int(n), float(e)) for n, e in points)
    if len(pts) < 4:
        raise ValueError("need at least 4 points for a rate fit")
    ns = np.array([n for n, _ in pts], dtype=float)
    es = np.array([e for _, e in pts])
    if not (np.diff(ns) > 0).all():
        raise ValueError("budgets must be strictly increasing")
    if (es <= 0).any():
        raise ValueError("cannot fit log of nonpositive")
    A = np.vstack([np.log2(ns), np.ones_like(ns)]).T
    y = np.log2(es)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return RateFit(points=pts, slope=float(coef[0]), intercept=float(coef[1]),
                   residual=float(np.sqrt(np.mean(resid ** 2))))


# ---------------------------------------------------------------------------
# test corpus

def _clip_exponent(lam: float, r: int) -> float:
    return float(min(max(lam, 1e-6), r - 1 - 1e-9))


def _kink_exponents(spec: SmoothnessSpec, r: int):
    inv_p = 0.0 if math.isinf(spec.p) else 1.0 / spec.p
    if spec.kind == "mixed":
        return [_clip_exponent(ai - inv_p, r) for ai in spec.a]
    if spec.beta is not None and spec.beta != 0.0:
        # dominant direction carries the whole alpha+beta budget
        return [_clip_exponent(spec.alpha + spec.beta - inv_p, r)]
    return [_clip_exponent(spec.alpha - inv_p, r)] * spec.d


def _kink_handle(lams):
    lams = np.array(lams)

    def h(X):
        return np.prod(np.abs(X[:, :len(lams)] - 0.5) ** lams, axis=1)

    return h


def kink_integral_1d(lam: float) -> float:
    return 0.5 ** lam / (lam + 1.0)


def corpus(d: int, r: int, spec: SmoothnessSpec):
    """Test functions: exact-reproduction control, smooth product, kink."""
    deg = r - 1
    funcs = [
        TestFunction(
            label="poly",
            handle=lambda X, deg=deg: np.prod(X ** deg, axis=1),
            exact_integral=(1.0 / r) ** d,
            membership=f"coordinate degree {deg} polynomial, "
                       "reproduced exactly by the recovery operator",
        ),
        TestFunction(
            label="sinprod",
            handle=lambda X: np.prod(np.sin(np.pi * X), axis=1),
            exact_integral=(2.0 / math.pi) ** d,
            membership="analytic tensor product, in every class considered",
        ),
    ]
    lams = _kink_exponents(spec, r)
    integ = math.prod(kink_integral_1d(l) for l in lams)
    desc = ", ".join(f"{l:.4g}" for l in lams)
    funcs.append(TestFunction(
        label="kink",
        handle=_kink_handle(lams),
        exact_integral=integ,
        membership=f"product kink with exponents ({desc}); univariate "
                   f"factor |t-1/2|^lam has smoothness lam + 1/p on the "
                   f"sup-aggregated scale",
    ))
    return funcs
